#include "uoiskit/hpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "uoiskit/error.hpp"

namespace uoiskit {

namespace {

void require_size(ImageSize a, ImageSize b, const char* what) {
  if (a != b) {
    fail(ErrorKind::InvalidDimensions, std::string(what) + ": sizes differ (" + std::to_string(a.h) + "x" +
                                           std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                           std::to_string(b.w) + ")");
  }
}

}  // namespace

double FgPrediction::foreground_probability(std::size_t p) const {
  return 1.0 / (1.0 + std::exp(background(p) - foreground(p)));
}

Heatmap build_gt_heatmap(const std::vector<BinaryMask>& instances, ImageSize size, const GaussianSpec& spec) {
  size.validate();
  if (!(spec.sigma > 0.0)) fail(ErrorKind::ConfigError, "Gaussian sigma must be positive");
  std::vector<Centroid> keypoints;
  keypoints.reserve(instances.size());
  for (const BinaryMask& m : instances) {
    require_size(m.size(), size, "build_gt_heatmap");
    keypoints.push_back(mask_centroid(m));
  }
  Heatmap heat(size);
  const double inv_two_sigma_sq = 1.0 / (2.0 * spec.sigma * spec.sigma);
  for (int y = 0; y < size.h; ++y) {
    for (int x = 0; x < size.w; ++x) {
      double best = 0.0;
      for (const Centroid& k : keypoints) {
        const double dx = x - k.x, dy = y - k.y;
        best = std::max(best, std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq));
      }
      heat.at(x, y) = best;
    }
  }
  return heat;
}

double heatmap_mse(const Heatmap& pred, const Heatmap& gt) {
  require_size(pred.size, gt.size, "heatmap_mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - gt.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.values.size());
}

ClassWeights class_balanced_weights(std::size_t fg_count, std::size_t bg_count) {
  const int present = (fg_count > 0 ? 1 : 0) + (bg_count > 0 ? 1 : 0);
  ClassWeights w;
  if (fg_count > 0) w.foreground = 1.0 / (static_cast<double>(fg_count) * present);
  if (bg_count > 0) w.background = 1.0 / (static_cast<double>(bg_count) * present);
  return w;
}

LossWithGrad weighted_ce_with_grad(const FgPrediction& pred, const BinaryMask& gt_fg) {
  require_size(pred.size, gt_fg.size(), "weighted_ce");
  const std::vector<std::uint8_t> labels = rle_decode(gt_fg);
  const std::size_t fg_count = mask_area(gt_fg);
  const ClassWeights w = class_balanced_weights(fg_count, labels.size() - fg_count);

  LossWithGrad out;
  out.grad.assign(pred.logits.size(), 0.0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const double lb = pred.background(p), lf = pred.foreground(p);
    const double m = std::max(lb, lf);
    const double log_z = m + std::log(std::exp(lb - m) + std::exp(lf - m));
    const double prob_fg = std::exp(lf - log_z);
    const double prob_bg = std::exp(lb - log_z);
    const bool is_fg = labels[p] != 0;
    const double weight = is_fg ? w.foreground : w.background;
    out.loss += weight * (log_z - (is_fg ? lf : lb));
    out.grad[2 * p] = weight * (prob_bg - (is_fg ? 0.0 : 1.0));
    out.grad[2 * p + 1] = weight * (prob_fg - (is_fg ? 1.0 : 0.0));
  }
  return out;
}

double weighted_ce(const FgPrediction& pred, const BinaryMask& gt_fg) {
  return weighted_ce_with_grad(pred, gt_fg).loss;
}

double hpg_loss(double l_fg, double l_h, const HpgLossWeights& weights) {
  return weights.foreground * l_fg + weights.heatmap * l_h;
}

BinaryMask binarize_foreground(const FgPrediction& pred, double threshold) {
  std::vector<std::uint8_t> bits(pred.size.pixels(), 0);
  for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = pred.foreground_probability(p) > threshold;
  return rle_encode(bits, pred.size);
}

std::vector<Keypoint> select_peaks(const Heatmap& heat, const BinaryMask& fg, int k, double threshold) {
  require_size(heat.size, fg.size(), "select_peaks");
  if (k < 1) return {};
  const std::vector<std::uint8_t> gate = rle_decode(fg);
  const int h = heat.size.h, w = heat.size.w;
  std::vector<Keypoint> peaks;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = heat.at(x, y);
      if (!(v > threshold) || !gate[static_cast<std::size_t>(y) * w + x]) continue;
      bool is_max = true;
      for (int ny = std::max(0, y - 1); ny <= std::min(h - 1, y + 1) && is_max; ++ny) {
        for (int nx = std::max(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx) {
          if (heat.at(nx, ny) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({{x, y}, v});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
  if (peaks.size() > static_cast<std::size_t>(k)) peaks.resize(static_cast<std::size_t>(k));
  return peaks;
}

void write_heatmap_pgm(const Heatmap& heat, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::DatasetError, "cannot write " + path.string());
  out << "P5\n" << heat.size.w << " " << heat.size.h << "\n65535\n";
  for (double v : heat.values) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xFF)};
    out.write(bytes, 2);
  }
}

}  // namespace uoiskit
