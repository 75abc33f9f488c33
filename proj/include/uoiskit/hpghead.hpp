#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uoiskit/hpg.hpp"
#include "uoiskit/synthgen.hpp"
#include "uoiskit/tinynn.hpp"

namespace uoiskit {

inline constexpr int kPixelFeatureWidth = 8;
/// Output rows of the head: background logit, foreground logit, heatmap pre-activation.
inline constexpr int kHpgOutputs = 3;

/// Per-pixel feature columns: r, g, b in [0,1]; x/(w-1), y/(h-1); 5x5 mean and
/// standard deviation of intensity (clipped at the border); central-difference
/// gradient magnitude of intensity. One row per pixel in row-major order.
Matrix extract_features(const RgbImage& image);

struct HpgTrainOptions {
  GaussianSpec spec;
  HpgLossWeights weights;
  int pixels_per_image = 4096;
  std::vector<int> hidden{256, 256};
};

std::vector<int> hpg_widths(const std::vector<int>& hidden);

/// Loss on a set of sampled pixels of one image, gradients written to `grads`
/// with respect to the network outputs (rows = pixels, cols = 3). Class weights
/// are balanced over the sampled pixels.
struct HpgPixelTargets {
  std::vector<std::uint8_t> foreground;
  std::vector<double> heat;
};
struct HpgPixelLoss {
  double fg = 0.0;
  double heat = 0.0;
  double total = 0.0;
  Matrix output_grad;
};
HpgPixelLoss hpg_pixel_loss(const Matrix& outputs, const HpgPixelTargets& targets, const HpgLossWeights& weights);

double sigmoid(double z);

/// Per-pixel application of the head: logits -> FgPrediction, logistic of the
/// third output -> Heatmap.
std::pair<FgPrediction, Heatmap> predict_hpg(const Mlp& net, const RgbImage& image);

/// Full-image L_HPG of the head on one scene.
double hpg_scene_loss(const Mlp& net, const Scene& scene, const HpgTrainOptions& options);

/// Trains the head on the given scenes. A seeded cfg.validation_fraction of the
/// scenes (at least one when there are two or more) is held out and scored with
/// the full-image loss each epoch.
TrainResult train_hpg_head(const std::vector<Scene>& scenes, const TrainConfig& cfg,
                           const HpgTrainOptions& options = {}, const EpochCallback& on_epoch = {});

}  // namespace uoiskit
