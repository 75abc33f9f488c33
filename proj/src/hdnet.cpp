#include "uoiskit/hdnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uoiskit/error.hpp"
#include "uoiskit/parallel.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

namespace {

void check_net(const Mlp& net, Eigen::Index width) {
  if (net.input_dim() != width || net.output_dim() != 1) {
    fail(ErrorKind::InvalidDimensions, "HDNet expects input width " + std::to_string(width) +
                                           " and scalar output, got " + std::to_string(net.input_dim()) + " -> " +
                                           std::to_string(net.output_dim()));
  }
}

PixelPoint pick_pixel(const BinaryMask& mask, Rng& rng) {
  const std::size_t area = mask_area(mask);
  std::size_t k = std::uniform_int_distribution<std::size_t>(0, area - 1)(rng);
  for (const PixelSpan& s : mask.spans()) {
    const std::size_t len = s.end - s.begin;
    if (k < len) {
      const std::size_t idx = s.begin + k;
      return {static_cast<int>(idx % mask.size().w), static_cast<int>(idx / mask.size().w)};
    }
    k -= len;
  }
  return {};
}

}  // namespace

std::vector<int> hdnet_widths(int channels, int hidden) { return {2 * channels, hidden, hidden, 1}; }

Matrix hdnet_features(const MaskProposal& p) {
  const auto c = static_cast<Eigen::Index>(p.iou_token.size());
  Matrix x(kSlotCount, 2 * c);
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    if (static_cast<Eigen::Index>(p.mask_tokens[k].size()) != c) {
      fail(ErrorKind::InvalidDimensions, "mask token width differs from IoU token width");
    }
    const auto row = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < c; ++i) {
      x(row, i) = p.iou_token[static_cast<std::size_t>(i)];
      x(row, c + i) = p.mask_tokens[k][static_cast<std::size_t>(i)];
    }
  }
  return x;
}

RefinedProposal refine_scores(const MaskProposal& proposal, const Mlp& net) {
  const Matrix x = hdnet_features(proposal);
  check_net(net, x.cols());
  const Matrix residual = mlp_forward(net, x);
  RefinedProposal out{proposal, {}};
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    out.refined_scores[k] = residual(static_cast<Eigen::Index>(k), 0) + proposal.base_scores[k];
  }
  return out;
}

double iou_target(PixelPoint prompt, const BinaryMask& generated, const Scene& scene) {
  const auto index = scene.instance_at(prompt);
  if (!index) return 0.0;
  return mask_iou(scene.instances[*index], generated);
}

double hdnet_loss(const std::vector<SlotScores>& pred, const std::vector<SlotScores>& target) {
  if (pred.size() != target.size()) {
    fail(ErrorKind::InvalidDimensions, "hdnet_loss: " + std::to_string(pred.size()) + " predictions vs " +
                                           std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double per_prompt = 0.0;
    for (std::size_t k = 0; k < kSlotCount; ++k) {
      const double d = pred[i][k] - target[i][k];
      per_prompt += d * d;
    }
    total += per_prompt / kSlotCount;
  }
  return total / static_cast<double>(pred.size());
}

HdnetSample make_sample(const MaskProposal& proposal, const Scene& scene) {
  HdnetSample s;
  const Matrix x = hdnet_features(proposal);
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    const Eigen::RowVectorXd row = x.row(static_cast<Eigen::Index>(k));
    s.features[k].assign(row.data(), row.data() + row.size());
    s.targets[k] = iou_target(proposal.prompt, proposal.masks[k], scene);
  }
  s.base_scores = proposal.base_scores;
  s.background = !scene.instance_at(proposal.prompt).has_value();
  return s;
}

std::vector<HdnetSample> build_training_set(const std::vector<Scene>& scenes, int prompts_per_scene,
                                            double bg_fraction, const MaskProposer& proposer, std::uint64_t seed,
                                            int jobs) {
  if (prompts_per_scene < 1) fail(ErrorKind::ConfigError, "prompts per scene must be at least 1");
  if (!(bg_fraction >= 0.0 && bg_fraction <= 1.0)) fail(ErrorKind::ConfigError, "bg_fraction must lie in [0, 1]");
  const int negatives = static_cast<int>(std::lround(prompts_per_scene * bg_fraction));
  const int positives = prompts_per_scene - negatives;
  const std::size_t m = static_cast<std::size_t>(prompts_per_scene);

  std::vector<HdnetSample> samples(scenes.size() * m);
  parallel_for(scenes.size(), jobs, [&](std::size_t si) {
    const Scene& scene = scenes[si];
    if (positives > 0 && scene.instances.empty()) {
      fail(ErrorKind::SamplingError, "scene " + std::to_string(si) + " has no instances to sample positives from");
    }
    const BinaryMask background = mask_complement(scene.foreground);
    if (negatives > 0 && mask_area(background) == 0) {
      fail(ErrorKind::SamplingError, "scene " + std::to_string(si) + " has no background to sample negatives from");
    }
    Rng rng(derive_seed(seed, si));
    for (std::size_t j = 0; j < m; ++j) {
      const bool positive = j < static_cast<std::size_t>(positives);
      const PixelPoint prompt = positive ? pick_pixel(scene.instances[j % scene.instances.size()], rng)
                                         : pick_pixel(background, rng);
      const std::uint64_t prompt_seed = derive_seed(derive_seed(seed, si), j + 1);
      samples[si * m + j] = make_sample(proposer.propose(scene, si, prompt, prompt_seed), scene);
    }
  });
  return samples;
}

std::vector<HdnetSample> build_training_set(const std::vector<Scene>& scenes, int prompts_per_scene,
                                            double bg_fraction, const OracleConfig& cfg, std::uint64_t seed,
                                            int jobs) {
  const OracleProposer proposer(cfg);
  return build_training_set(scenes, prompts_per_scene, bg_fraction, proposer, seed, jobs);
}

SlotScores refine_sample(const HdnetSample& sample, const Mlp& net) {
  const auto width = static_cast<Eigen::Index>(sample.features[0].size());
  check_net(net, width);
  Matrix x(kSlotCount, width);
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    x.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(sample.features[k].data(), width);
  }
  const Matrix residual = mlp_forward(net, x);
  SlotScores out{};
  for (std::size_t k = 0; k < kSlotCount; ++k) out[k] = residual(static_cast<Eigen::Index>(k), 0) + sample.base_scores[k];
  return out;
}

TrainResult train_hdnet(const std::vector<HdnetSample>& samples, const TrainConfig& cfg, int hidden,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) fail(ErrorKind::SamplingError, "HDNet training needs at least one sample");
  const auto width = static_cast<Eigen::Index>(samples.front().features[0].size());
  if (width % 2 != 0 || width == 0) fail(ErrorKind::InvalidDimensions, "HDNet feature width must be 2C");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, 0x5A11));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(samples.size())));
  if (samples.size() > 1) n_val = std::clamp<std::size_t>(n_val, 1, samples.size() - 1);
  else n_val = 0;
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  auto stack = [&](std::span<const std::size_t> ids, Matrix& x, Vector& target, Vector& base) {
    const auto rows = static_cast<Eigen::Index>(ids.size() * kSlotCount);
    x.resize(rows, width);
    target.resize(rows);
    base.resize(rows);
    Eigen::Index r = 0;
    for (std::size_t id : ids) {
      const HdnetSample& s = samples[id];
      for (std::size_t k = 0; k < kSlotCount; ++k, ++r) {
        x.row(r) = Eigen::Map<const Eigen::RowVectorXd>(s.features[k].data(), width);
        target(r) = s.targets[k];
        base(r) = s.base_scores[k];
      }
    }
  };

  const BatchLossFn batch_loss = [&](const Mlp& net, std::span<const std::size_t> batch, MlpGradients& grads) {
    std::vector<std::size_t> ids(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ids[i] = train[batch[i]];
    Matrix x;
    Vector target, base;
    stack(ids, x, target, base);
    const MlpTrace trace = mlp_forward_trace(net, x);
    const Vector err = trace.inputs.back().col(0) + base - target;
    const double scale = 1.0 / static_cast<double>(x.rows());
    const Matrix upstream = (2.0 * scale) * err;
    grads = mlp_backward(net, trace, upstream);
    return err.squaredNorm() * scale;
  };

  const std::vector<std::size_t>& eval_ids = val.empty() ? train : val;
  Matrix val_x;
  Vector val_target, val_base;
  stack(eval_ids, val_x, val_target, val_base);
  const ValidationLossFn validation = [&](const Mlp& net) {
    const Vector err = mlp_forward(net, val_x).col(0) + val_base - val_target;
    return err.squaredNorm() / static_cast<double>(val_x.rows());
  };

  Mlp init = Mlp::glorot(hdnet_widths(static_cast<int>(width / 2), hidden), derive_seed(cfg.seed, 0x1417));
  return fit(std::move(init), train.size(), cfg, batch_loss, validation, on_epoch);
}

int argmax_slot(const SlotScores& scores) {
  int best = 0;
  for (int k = 1; k < kSlotCount; ++k) {
    if (scores[static_cast<std::size_t>(k)] > scores[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

SlotAccuracy slot_accuracy(const std::vector<HdnetSample>& samples, const Mlp& net) {
  SlotAccuracy acc;
  std::size_t base_hits = 0, refined_hits = 0;
  for (const HdnetSample& s : samples) {
    if (s.background) continue;
    const double best = *std::max_element(s.targets.begin(), s.targets.end());
    ++acc.prompts;
    if (s.targets[static_cast<std::size_t>(argmax_slot(s.base_scores))] == best) ++base_hits;
    if (s.targets[static_cast<std::size_t>(argmax_slot(refine_sample(s, net)))] == best) ++refined_hits;
  }
  if (acc.prompts > 0) {
    acc.baseline = static_cast<double>(base_hits) / static_cast<double>(acc.prompts);
    acc.refined = static_cast<double>(refined_hits) / static_cast<double>(acc.prompts);
  }
  return acc;
}

}  // namespace uoiskit
