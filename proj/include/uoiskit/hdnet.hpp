#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "uoiskit/proposer.hpp"
#include "uoiskit/synthgen.hpp"
#include "uoiskit/tinynn.hpp"

namespace uoiskit {

using SlotScores = std::array<double, kSlotCount>;

struct RefinedProposal {
  MaskProposal proposal;
  SlotScores refined_scores{};
};

/// One prompt's training record: the fused features of each slot, the IoU
/// targets, and the segmenter's own scores.
struct HdnetSample {
  std::array<std::vector<double>, kSlotCount> features;
  SlotScores targets{};
  SlotScores base_scores{};
  bool background = false;
};

/// Default HDNet widths for token width C: 2C -> 256 -> 256 -> 1.
std::vector<int> hdnet_widths(int channels, int hidden = 256);

/// Row k is concat(iou_token, mask_tokens[k]); width 2C.
Matrix hdnet_features(const MaskProposal& proposal);

/// Residual refinement: refined_k = net(concat(iou_token, mask_token_k)) + base_k.
RefinedProposal refine_scores(const MaskProposal& proposal, const Mlp& net);

/// IoU of `generated` with the instance under the prompt; 0 on background.
double iou_target(PixelPoint prompt, const BinaryMask& generated, const Scene& scene);

/// Mean over prompts of the per-prompt mean squared slot error.
double hdnet_loss(const std::vector<SlotScores>& pred, const std::vector<SlotScores>& target);

HdnetSample make_sample(const MaskProposal& proposal, const Scene& scene);

/// Draws `prompts_per_scene` prompts per scene: round(M * bg_fraction) uniform
/// over the background, the rest cycling through instances with a uniform
/// pixel inside each visible mask.
std::vector<HdnetSample> build_training_set(const std::vector<Scene>& scenes, int prompts_per_scene,
                                            double bg_fraction, const MaskProposer& proposer, std::uint64_t seed,
                                            int jobs = 1);
std::vector<HdnetSample> build_training_set(const std::vector<Scene>& scenes, int prompts_per_scene,
                                            double bg_fraction, const OracleConfig& cfg, std::uint64_t seed,
                                            int jobs = 1);

/// Trains the residual head with AdamW and the step schedule; a seeded
/// cfg.validation_fraction of samples is held out for checkpoint selection.
TrainResult train_hdnet(const std::vector<HdnetSample>& samples, const TrainConfig& cfg, int hidden = 256,
                        const EpochCallback& on_epoch = {});

SlotScores refine_sample(const HdnetSample& sample, const Mlp& net);

/// Index of the maximum, lowest index on ties.
int argmax_slot(const SlotScores& scores);

/// Fraction of object prompts whose chosen slot attains the best target IoU,
/// for the raw scores and for the refined scores.
struct SlotAccuracy {
  double baseline = 0.0;
  double refined = 0.0;
  std::size_t prompts = 0;
};
SlotAccuracy slot_accuracy(const std::vector<HdnetSample>& samples, const Mlp& net);

}  // namespace uoiskit
