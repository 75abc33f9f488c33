#include "uoiskit/hpghead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uoiskit/error.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

namespace {

constexpr int kWindowRadius = 2;
constexpr Eigen::Index kPredictChunk = 16384;

void add_into(MlpGradients& acc, const MlpGradients& g) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].weight += g.layers[l].weight;
    acc.layers[l].bias += g.layers[l].bias;
  }
}

void check_head(const Mlp& net) {
  if (net.input_dim() != kPixelFeatureWidth || net.output_dim() != kHpgOutputs) {
    fail(ErrorKind::InvalidDimensions, "HPG head must map " + std::to_string(kPixelFeatureWidth) + " -> " +
                                           std::to_string(kHpgOutputs) + ", got " + std::to_string(net.input_dim()) +
                                           " -> " + std::to_string(net.output_dim()));
  }
}

HpgPixelTargets scene_targets(const Scene& scene, const GaussianSpec& spec) {
  HpgPixelTargets t;
  t.foreground = rle_decode(scene.foreground);
  t.heat = build_gt_heatmap(scene.instances, scene.size(), spec).values;
  return t;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix extract_features(const RgbImage& image) {
  const ImageSize size = image.size;
  size.validate();
  const int h = size.h, w = size.w;
  const std::size_t n = size.pixels();

  std::vector<double> intensity(n);
  for (std::size_t p = 0; p < n; ++p) {
    const std::uint8_t* c = &image.data[3 * p];
    intensity[p] = (static_cast<double>(c[0]) + c[1] + c[2]) / (3.0 * 255.0);
  }

  // Summed-area tables of I and I^2 with a zero first row and column.
  const std::size_t sw = static_cast<std::size_t>(w) + 1;
  std::vector<double> s1(sw * (h + 1), 0.0), s2(sw * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double r1 = 0.0, r2 = 0.0;
    for (int x = 0; x < w; ++x) {
      const double v = intensity[static_cast<std::size_t>(y) * w + x];
      r1 += v;
      r2 += v * v;
      s1[(y + 1) * sw + x + 1] = s1[y * sw + x + 1] + r1;
      s2[(y + 1) * sw + x + 1] = s2[y * sw + x + 1] + r2;
    }
  }
  auto box = [&](const std::vector<double>& s, int x0, int y0, int x1, int y1) {
    return s[(y1 + 1) * sw + x1 + 1] - s[y0 * sw + x1 + 1] - s[(y1 + 1) * sw + x0] + s[y0 * sw + x0];
  };
  auto at = [&](int x, int y) {
    return intensity[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };

  const double sx = w > 1 ? 1.0 / (w - 1) : 0.0;
  const double sy = h > 1 ? 1.0 / (h - 1) : 0.0;
  Matrix f(static_cast<Eigen::Index>(n), kPixelFeatureWidth);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - kWindowRadius), y1 = std::min(h - 1, y + kWindowRadius);
    for (int x = 0; x < w; ++x) {
      const auto row = static_cast<Eigen::Index>(y) * w + x;
      const std::uint8_t* c = image.px(x, y);
      f(row, 0) = c[0] / 255.0;
      f(row, 1) = c[1] / 255.0;
      f(row, 2) = c[2] / 255.0;
      f(row, 3) = x * sx;
      f(row, 4) = y * sy;
      const int x0 = std::max(0, x - kWindowRadius), x1 = std::min(w - 1, x + kWindowRadius);
      const double count = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
      const double mean = box(s1, x0, y0, x1, y1) / count;
      const double var = box(s2, x0, y0, x1, y1) / count - mean * mean;
      f(row, 5) = mean;
      // below 8-bit quantisation, so only rounding residue of the table sums
      f(row, 6) = var > 1e-12 ? std::sqrt(var) : 0.0;
      const double gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
      const double gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
      f(row, 7) = std::hypot(gx, gy);
    }
  }
  return f;
}

std::vector<int> hpg_widths(const std::vector<int>& hidden) {
  std::vector<int> widths{kPixelFeatureWidth};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(kHpgOutputs);
  return widths;
}

HpgPixelLoss hpg_pixel_loss(const Matrix& outputs, const HpgPixelTargets& targets, const HpgLossWeights& weights) {
  const Eigen::Index n = outputs.rows();
  if (outputs.cols() != kHpgOutputs || static_cast<std::size_t>(n) != targets.foreground.size() ||
      targets.foreground.size() != targets.heat.size()) {
    fail(ErrorKind::InvalidDimensions, "hpg_pixel_loss: outputs and targets disagree in shape");
  }
  HpgPixelLoss out;
  out.output_grad = Matrix::Zero(n, kHpgOutputs);
  if (n == 0) return out;

  const std::size_t fg_count = static_cast<std::size_t>(
      std::count_if(targets.foreground.begin(), targets.foreground.end(), [](std::uint8_t v) { return v != 0; }));
  const ClassWeights cw = class_balanced_weights(fg_count, static_cast<std::size_t>(n) - fg_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool fg = targets.foreground[static_cast<std::size_t>(i)] != 0;
    const double wc = fg ? cw.foreground : cw.background;
    const double z0 = outputs(i, 0), z1 = outputs(i, 1);
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const double p1 = std::exp(z1 - lse);
    out.fg += wc * (lse - (fg ? z1 : z0));
    out.output_grad(i, 0) = weights.foreground * wc * ((1.0 - p1) - (fg ? 0.0 : 1.0));
    out.output_grad(i, 1) = weights.foreground * wc * (p1 - (fg ? 1.0 : 0.0));

    const double hpred = sigmoid(outputs(i, 2));
    const double d = hpred - targets.heat[static_cast<std::size_t>(i)];
    out.heat += d * d;
    out.output_grad(i, 2) = weights.heatmap * 2.0 * d * hpred * (1.0 - hpred) / static_cast<double>(n);
  }
  out.heat /= static_cast<double>(n);
  out.total = hpg_loss(out.fg, out.heat, weights);
  return out;
}

std::pair<FgPrediction, Heatmap> predict_hpg(const Mlp& net, const RgbImage& image) {
  check_head(net);
  const Matrix features = extract_features(image);
  FgPrediction fg(image.size);
  Heatmap heat(image.size);
  for (Eigen::Index start = 0; start < features.rows(); start += kPredictChunk) {
    const Eigen::Index len = std::min(kPredictChunk, features.rows() - start);
    const Matrix out = mlp_forward(net, features.middleRows(start, len));
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto p = static_cast<std::size_t>(start + i);
      fg.logits[2 * p] = out(i, 0);
      fg.logits[2 * p + 1] = out(i, 1);
      heat.values[p] = sigmoid(out(i, 2));
    }
  }
  return {std::move(fg), std::move(heat)};
}

double hpg_scene_loss(const Mlp& net, const Scene& scene, const HpgTrainOptions& options) {
  check_head(net);
  const auto [fg, heat] = predict_hpg(net, scene.image);
  const double l_fg = weighted_ce(fg, scene.foreground);
  const double l_h = heatmap_mse(heat, build_gt_heatmap(scene.instances, scene.size(), options.spec));
  return hpg_loss(l_fg, l_h, options.weights);
}

TrainResult train_hpg_head(const std::vector<Scene>& scenes, const TrainConfig& cfg, const HpgTrainOptions& options,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  if (scenes.empty()) fail(ErrorKind::DatasetError, "HPG training needs at least one scene");
  if (options.pixels_per_image < 1) fail(ErrorKind::ConfigError, "pixels_per_image must be at least 1");
  if (!(options.spec.sigma > 0.0)) fail(ErrorKind::ConfigError, "heatmap sigma must be positive");

  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, 0x5A11));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(scenes.size())));
  n_val = scenes.size() > 1 ? std::clamp<std::size_t>(n_val, 1, scenes.size() - 1) : 0;
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  std::vector<Matrix> features(scenes.size());
  std::vector<HpgPixelTargets> targets(scenes.size());
  for (std::size_t id : train) {
    features[id] = extract_features(scenes[id].image);
    targets[id] = scene_targets(scenes[id], options.spec);
  }

  Rng pixel_rng(derive_seed(cfg.seed, 0x91C5));
  const BatchLossFn batch_loss = [&](const Mlp& net, std::span<const std::size_t> batch, MlpGradients& grads) {
    double total = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b : batch) {
      const std::size_t id = train[b];
      const std::size_t n = scenes[id].size().pixels();
      const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(options.pixels_per_image));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      Matrix x(static_cast<Eigen::Index>(k), kPixelFeatureWidth);
      HpgPixelTargets t;
      t.foreground.resize(k);
      t.heat.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t p = pick(pixel_rng);
        x.row(static_cast<Eigen::Index>(i)) = features[id].row(static_cast<Eigen::Index>(p));
        t.foreground[i] = targets[id].foreground[p];
        t.heat[i] = targets[id].heat[p];
      }
      const MlpTrace trace = mlp_forward_trace(net, x);
      const HpgPixelLoss loss = hpg_pixel_loss(trace.inputs.back(), t, options.weights);
      add_into(grads, mlp_backward(net, trace, inv * loss.output_grad));
      total += inv * loss.total;
    }
    return total;
  };

  const std::vector<std::size_t>& eval_ids = val.empty() ? train : val;
  const ValidationLossFn validation = [&](const Mlp& net) {
    double sum = 0.0;
    for (std::size_t id : eval_ids) sum += hpg_scene_loss(net, scenes[id], options);
    return sum / static_cast<double>(eval_ids.size());
  };

  Mlp init = Mlp::glorot(hpg_widths(options.hidden), derive_seed(cfg.seed, 0x4B9));
  return fit(std::move(init), train.size(), cfg, batch_loss, validation, on_epoch);
}

}  // namespace uoiskit
