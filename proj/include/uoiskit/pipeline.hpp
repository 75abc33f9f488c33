#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uoiskit/hdnet.hpp"
#include "uoiskit/hpg.hpp"
#include "uoiskit/proposer.hpp"
#include "uoiskit/synthgen.hpp"
#include "uoiskit/tinynn.hpp"

namespace uoiskit {

/// Pipeline variants, one per component row of the ablation table.
enum class Ablation {
  None,          // heatmap prompts + refined scores
  NoHdnet,       // heatmap prompts + the segmenter's own scores
  NoHeatmap,     // foreground-gated grid prompts + own scores
  NoForeground,  // plain grid prompts + own scores
};

std::string_view to_string(Ablation a) noexcept;
Ablation ablation_from_string(std::string_view s);

struct PipelineConfig {
  double fg_threshold = 0.85;
  double heat_threshold = 0.007;
  int k = 30;
  double score_threshold = 0.48;
  double nms_iou = 0.3;
  std::size_t max_area = 40000;
  double sigma = 8.0;
  std::string proposer = "oracle";
  std::filesystem::path hpg_checkpoint;
  std::filesystem::path hdnet_checkpoint;
  std::filesystem::path replay_path;
  Ablation ablation = Ablation::None;
  /// Prompts per side of the uniform grid used by the grid variants.
  int grid_per_side = 32;
  /// Apply the area filter before NMS instead of after.
  bool area_filter_first = false;

  void validate() const;
  bool uses_hdnet() const noexcept { return ablation == Ablation::None; }
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct Detection {
  BinaryMask mask;
  double score = 0.0;
  PixelPoint prompt;
  int slot = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Highest refined score among the four slots (lowest slot on ties); nothing
/// when that score is below the threshold.
std::optional<Detection> select_best(const RefinedProposal& refined, double score_threshold);

/// Greedy suppression by descending score, equal scores kept in input order.
/// A detection is dropped when its IoU with a kept one exceeds iou_threshold.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

/// Keeps detections with mask area <= max_area.
std::vector<Detection> area_filter(std::vector<Detection> detections, std::size_t max_area);

/// Prompts for the configured variant: heatmap peaks inside the binarized
/// foreground, or grid points (optionally foreground-gated).
std::vector<PixelPoint> generate_prompts(const FgPrediction& fg, const Heatmap& heat, const PipelineConfig& cfg);

/// Seed of the proposal for a prompt; depends on the prompt position only, so
/// variants sharing a prompt share its proposal.
std::uint64_t prompt_seed(std::uint64_t seed, PixelPoint prompt, ImageSize size);

/// Proposal, scoring and post-processing for a fixed prompt list. `hdnet` may
/// be null, in which case the segmenter's scores are used unchanged.
std::vector<Detection> detect(const Scene& scene, std::size_t scene_index, const std::vector<PixelPoint>& prompts,
                              const Mlp* hdnet, const MaskProposer& proposer, const PipelineConfig& cfg,
                              std::uint64_t seed);

/// Post-processing only: selection, NMS and the area filter in the configured order.
std::vector<Detection> post_process(const std::vector<RefinedProposal>& refined, const PipelineConfig& cfg);

/// End-to-end inference on one scene. The image drives the prompt generator;
/// the scene is handed to the proposer, which may consult its annotations.
std::vector<Detection> infer_scene(const Scene& scene, std::size_t scene_index, const Mlp& hpg, const Mlp* hdnet,
                                   const MaskProposer& proposer, const PipelineConfig& cfg, std::uint64_t seed);

struct PipelineModels {
  Mlp hpg;
  std::optional<Mlp> hdnet;
};

/// Loads the checkpoints named in cfg; the HDNet checkpoint is only required
/// when the variant uses it. A missing file raises ConfigError.
PipelineModels load_models(const PipelineConfig& cfg);

nlohmann::json detections_to_json(const std::vector<Detection>& detections);
std::vector<Detection> detections_from_json(const nlohmann::json& j);

}  // namespace uoiskit
