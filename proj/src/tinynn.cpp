#include "uoiskit/tinynn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "uoiskit/error.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

namespace {

constexpr char kMagic[8] = {'U', 'O', 'I', 'S', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::InvalidDimensions, message);
}

bool all_finite(const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); }

template <typename T>
void write_pod(std::ofstream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(ErrorKind::DatasetError, "truncated checkpoint " + path.string());
  return value;
}

}  // namespace

Mlp Mlp::zeros(const std::vector<int>& widths) {
  if (widths.size() < 2) fail(ErrorKind::InvalidDimensions, "an MLP needs at least input and output widths");
  Mlp net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] < 1 || widths[i + 1] < 1) fail(ErrorKind::InvalidDimensions, "layer widths must be positive");
    net.layers.push_back({Matrix::Zero(widths[i + 1], widths[i]), Vector::Zero(widths[i + 1])});
  }
  return net;
}

Mlp Mlp::glorot(const std::vector<int>& widths, std::uint64_t seed) {
  Mlp net = zeros(widths);
  Rng rng(seed);
  for (DenseLayer& l : net.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
    }
  }
  return net;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> out;
  if (layers.empty()) return out;
  out.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const DenseLayer& l : layers) out.push_back(static_cast<int>(l.weight.rows()));
  return out;
}

int Mlp::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
int Mlp::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

MlpTrace mlp_forward_trace(const Mlp& net, const Matrix& x) {
  require(!net.layers.empty(), "mlp_forward: network has no layers");
  require(x.cols() == net.input_dim(), "mlp_forward: input width " + std::to_string(x.cols()) +
                                           " does not match network input " + std::to_string(net.input_dim()));
  MlpTrace trace;
  trace.inputs.reserve(net.layers.size() + 1);
  trace.inputs.push_back(x);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& l = net.layers[i];
    Matrix z = trace.inputs.back() * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    if (i + 1 < net.layers.size()) z = z.cwiseMax(0.0);
    trace.inputs.push_back(std::move(z));
  }
  return trace;
}

Matrix mlp_forward(const Mlp& net, const Matrix& x) { return std::move(mlp_forward_trace(net, x).inputs.back()); }

MlpGradients mlp_backward(const Mlp& net, const MlpTrace& trace, const Matrix& upstream) {
  require(trace.inputs.size() == net.layers.size() + 1, "mlp_backward: trace does not match network");
  const Matrix& out = trace.inputs.back();
  require(upstream.rows() == out.rows() && upstream.cols() == out.cols(),
          "mlp_backward: upstream gradient shape does not match output");
  MlpGradients g;
  g.layers.resize(net.layers.size());
  Matrix delta = upstream;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Matrix& in = trace.inputs[i];
    g.layers[i].weight = delta.transpose() * in;
    g.layers[i].bias = delta.colwise().sum().transpose();
    delta = delta * net.layers[i].weight;
    // Rectifier derivative; the input of layer i is the post-activation of layer i-1.
    if (i > 0) delta = (in.array() > 0.0).select(delta, 0.0);
  }
  g.input = std::move(delta);
  return g;
}

MlpGradients mlp_backward(const Mlp& net, const Matrix& x, const Matrix& upstream) {
  return mlp_backward(net, mlp_forward_trace(net, x), upstream);
}

MlpGradients zero_gradients(const Mlp& net) {
  MlpGradients g;
  for (const DenseLayer& l : net.layers) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) fail(ErrorKind::ConfigError, "learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail(ErrorKind::ConfigError, "decay factor must lie in (0, 1]");
  if (decay_period < 1) fail(ErrorKind::ConfigError, "decay period must be at least one epoch");
  if (max_epochs < 1) fail(ErrorKind::ConfigError, "max_epochs must be at least 1");
  if (batch_size < 1) fail(ErrorKind::ConfigError, "batch size must be at least 1");
  if (weight_decay < 0.0) fail(ErrorKind::ConfigError, "weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorKind::ConfigError, "betas must lie in [0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    fail(ErrorKind::ConfigError, "validation fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"initial_lr", c.initial_lr},     {"decay_factor", c.decay_factor}, {"decay_period", c.decay_period},
          {"max_epochs", c.max_epochs},     {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
          {"beta2", c.beta2},               {"epsilon", c.epsilon},           {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.decay_period = j.value("decay_period", c.decay_period);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

AdamWState AdamWState::for_net(const Mlp& net) {
  AdamWState s;
  s.m = zero_gradients(net).layers;
  s.v = s.m;
  return s;
}

void adamw_step(AdamWState& state, Mlp& net, const MlpGradients& grads, const TrainConfig& cfg, double lr) {
  if (state.m.size() != net.layers.size() || grads.layers.size() != net.layers.size()) {
    fail(ErrorKind::InvalidDimensions, "adamw_step: state, gradients and network disagree on layer count");
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& g = grads.layers[i];
    const DenseLayer& p = net.layers[i];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() || g.bias.size() != p.bias.size()) {
      fail(ErrorKind::InvalidDimensions, "adamw_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    if (!all_finite(g)) fail(ErrorKind::NumericalError, "non-finite gradient at layer " + std::to_string(i));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param -= lr * cfg.weight_decay * param;
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    update(net.layers[i].weight, state.m[i].weight, state.v[i].weight, grads.layers[i].weight);
    update(net.layers[i].bias, state.m[i].bias, state.v[i].bias, grads.layers[i].bias);
  }
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  const int steps = std::max(epoch, 0) / cfg.decay_period;
  return cfg.initial_lr * std::pow(cfg.decay_factor, steps);
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::DatasetError, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  const std::vector<int> widths = net.widths();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(widths.size()));
  for (int w : widths) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden));
  for (const DenseLayer& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) write_pod<double>(out, l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) write_pod<double>(out, l.bias(r));
  }
  if (!out) fail(ErrorKind::DatasetError, "short write to checkpoint " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigError, "missing checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::DatasetError, path.string() + " is not a uoiskit checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) fail(ErrorKind::DatasetError, "unsupported checkpoint version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in, path);
  if (count < 2 || count > 64) fail(ErrorKind::DatasetError, "implausible layer count in " + path.string());
  std::vector<int> widths;
  for (std::uint32_t i = 0; i < count; ++i) widths.push_back(static_cast<int>(read_pod<std::uint32_t>(in, path)));
  const auto activation = read_pod<std::uint32_t>(in, path);
  if (activation != static_cast<std::uint32_t>(Activation::Relu)) fail(ErrorKind::DatasetError, "unknown activation tag");
  Mlp net = Mlp::zeros(widths);
  for (DenseLayer& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = read_pod<double>(in, path);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = read_pod<double>(in, path);
  }
  return net;
}

TrainResult fit(Mlp net, std::size_t train_count, const TrainConfig& cfg, const BatchLossFn& batch_loss,
                const ValidationLossFn& validation_loss, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_count == 0) fail(ErrorKind::SamplingError, "no training samples");
  Rng rng(cfg.seed);
  AdamWState state = AdamWState::for_net(net);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      MlpGradients grads = zero_gradients(net);
      const double loss = batch_loss(net, std::span<const std::size_t>(order.data() + start, end - start), grads);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::NumericalError, "training loss diverged at epoch " + std::to_string(epoch));
      }
      adamw_step(state, net, grads, cfg, lr);
      loss_sum += loss;
      ++batches;
    }
    EpochRecord record{epoch, lr, loss_sum / static_cast<double>(batches), validation_loss(net)};
    if (!std::isfinite(record.val_loss)) {
      fail(ErrorKind::NumericalError, "validation loss diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (result.best_epoch < 0 || record.val_loss < result.best_val_loss) {
      result.best = net;
      result.best_epoch = epoch;
      result.best_val_loss = record.val_loss;
    }
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace uoiskit
