#pragma once

#include <filesystem>
#include <vector>

#include "uoiskit/mask.hpp"

namespace uoiskit {

/// Dense per-pixel map with values in [0, 1], row-major.
struct Heatmap {
  ImageSize size;
  std::vector<double> values;

  Heatmap() = default;
  explicit Heatmap(ImageSize s) : size(s), values(s.pixels(), 0.0) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * size.w + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * size.w + x]; }
};

struct GaussianSpec {
  double sigma = 8.0;
};

/// Per-pixel two-class logits, stored interleaved as (background, foreground).
struct FgPrediction {
  ImageSize size;
  std::vector<double> logits;

  FgPrediction() = default;
  explicit FgPrediction(ImageSize s) : size(s), logits(s.pixels() * 2, 0.0) {}

  double background(std::size_t p) const { return logits[2 * p]; }
  double foreground(std::size_t p) const { return logits[2 * p + 1]; }
  /// Softmax probability of the foreground class.
  double foreground_probability(std::size_t p) const;
};

struct Keypoint {
  PixelPoint point;
  double score = 0.0;
};

struct HpgLossWeights {
  double foreground = 0.1;
  double heatmap = 1.0;
};

/// Gaussian keypoint heatmap: each instance contributes a Gaussian centred on
/// its (real-valued) mask centroid and overlapping kernels are merged with a
/// per-pixel max. Throws EmptyMask if an instance has no pixels.
Heatmap build_gt_heatmap(const std::vector<BinaryMask>& instances, ImageSize size, const GaussianSpec& spec);

/// Mean squared per-pixel difference.
double heatmap_mse(const Heatmap& pred, const Heatmap& gt);

/// Class-balanced weights: w_c = 1 / (count_c * classes_present); a class with
/// no pixels gets weight 0. Sums to 1 over all pixels.
struct ClassWeights {
  double background = 0.0;
  double foreground = 0.0;
};
ClassWeights class_balanced_weights(std::size_t fg_count, std::size_t bg_count);

/// Weighted softmax cross-entropy with class-balanced weights.
double weighted_ce(const FgPrediction& pred, const BinaryMask& gt_fg);

/// Loss plus its gradient with respect to each logit of pred.
struct LossWithGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
LossWithGrad weighted_ce_with_grad(const FgPrediction& pred, const BinaryMask& gt_fg);

double hpg_loss(double l_fg, double l_h, const HpgLossWeights& weights = {});

/// Pixels whose foreground probability exceeds threshold.
BinaryMask binarize_foreground(const FgPrediction& pred, double threshold = 0.85);

/// Local maxima of a clipped 3x3 window above `threshold` and inside `fg`,
/// sorted by value (ties in row-major order), truncated to k.
std::vector<Keypoint> select_peaks(const Heatmap& heat, const BinaryMask& fg, int k = 30, double threshold = 0.007);

/// 16-bit binary PGM (P5, big-endian samples, maxval 65535).
void write_heatmap_pgm(const Heatmap& heat, const std::filesystem::path& path);

}  // namespace uoiskit
