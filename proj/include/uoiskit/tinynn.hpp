#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace uoiskit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Relu };

/// Affine map y = W x + b with W stored as (out x in).
struct DenseLayer {
  Matrix weight;
  Vector bias;
};

/// Fully connected network: affine + rectifier on every hidden layer, plain
/// affine output. Batches are row-major samples (rows = samples).
struct Mlp {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::Relu;

  /// All parameters zero.
  static Mlp zeros(const std::vector<int>& widths);
  /// Uniform in ±sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  static Mlp glorot(const std::vector<int>& widths, std::uint64_t seed);

  std::vector<int> widths() const;
  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
};

/// Intermediate values of one forward pass, needed by backward.
struct MlpTrace {
  /// inputs[l] is the input of layer l; inputs.back() is the network output.
  std::vector<Matrix> inputs;
};

struct MlpGradients {
  std::vector<DenseLayer> layers;
  Matrix input;
};

Matrix mlp_forward(const Mlp& net, const Matrix& x);
MlpTrace mlp_forward_trace(const Mlp& net, const Matrix& x);

/// Exact reverse-mode gradients of sum(upstream ⊙ forward(x)).
MlpGradients mlp_backward(const Mlp& net, const Matrix& x, const Matrix& upstream);
MlpGradients mlp_backward(const Mlp& net, const MlpTrace& trace, const Matrix& upstream);

struct TrainConfig {
  double initial_lr = 1e-3;
  double decay_factor = 0.1;
  int decay_period = 10;
  int max_epochs = 30;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct AdamWState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  long step = 0;

  static AdamWState for_net(const Mlp& net);
};

/// Decoupled weight decay followed by the bias-corrected Adam update.
/// Throws NumericalError on a non-finite gradient.
void adamw_step(AdamWState& state, Mlp& net, const MlpGradients& grads, const TrainConfig& cfg, double lr);

/// Step schedule: initial_lr * decay_factor^floor(epoch / decay_period).
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// Flat little-endian checkpoint: magic, version, widths, activation, then
/// each layer's row-major weights followed by its biases (64-bit floats).
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Mlp best;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Loss over one mini-batch of training indices. Accumulates parameter
/// gradients into `grads` (already zeroed, shaped like the net).
using BatchLossFn = std::function<double(const Mlp& net, std::span<const std::size_t> batch, MlpGradients& grads)>;
using ValidationLossFn = std::function<double(const Mlp& net)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch AdamW with the step schedule. Training indices are shuffled each
/// epoch from cfg.seed; the net with the lowest validation loss is returned.
TrainResult fit(Mlp net, std::size_t train_count, const TrainConfig& cfg, const BatchLossFn& batch_loss,
                const ValidationLossFn& validation_loss, const EpochCallback& on_epoch = {});

MlpGradients zero_gradients(const Mlp& net);

}  // namespace uoiskit
