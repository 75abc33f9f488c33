#include "uoiskit/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "uoiskit/dataset.hpp"
#include "uoiskit/error.hpp"
#include "uoiskit/hpghead.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

namespace {

constexpr std::pair<Ablation, std::string_view> kAblationNames[] = {
    {Ablation::None, "none"},
    {Ablation::NoHdnet, "no-hdnet"},
    {Ablation::NoHeatmap, "no-heatmap"},
    {Ablation::NoForeground, "no-foreground"},
};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

std::string_view to_string(Ablation a) noexcept {
  for (const auto& [value, name] : kAblationNames) {
    if (value == a) return name;
  }
  return "none";
}

Ablation ablation_from_string(std::string_view s) {
  for (const auto& [value, name] : kAblationNames) {
    if (name == s) return value;
  }
  fail(ErrorKind::ConfigError, "unknown ablation '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
  if (!in_unit(fg_threshold)) fail(ErrorKind::ConfigError, "fg_threshold must lie in [0, 1]");
  if (!in_unit(heat_threshold)) fail(ErrorKind::ConfigError, "heat_threshold must lie in [0, 1]");
  if (k < 1) fail(ErrorKind::ConfigError, "k must be at least 1");
  if (!std::isfinite(score_threshold)) fail(ErrorKind::ConfigError, "score_threshold must be finite");
  if (!in_unit(nms_iou)) fail(ErrorKind::ConfigError, "nms_iou must lie in [0, 1]");
  if (!(sigma > 0.0)) fail(ErrorKind::ConfigError, "sigma must be positive");
  if (grid_per_side < 1) fail(ErrorKind::ConfigError, "grid_per_side must be at least 1");
  if (proposer != "oracle" && proposer != "replay") {
    fail(ErrorKind::ConfigError, "proposer must be 'oracle' or 'replay', got '" + proposer + "'");
  }
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"fg_threshold", c.fg_threshold},
          {"heat_threshold", c.heat_threshold},
          {"k", c.k},
          {"score_threshold", c.score_threshold},
          {"nms_iou", c.nms_iou},
          {"max_area", c.max_area},
          {"sigma", c.sigma},
          {"proposer", c.proposer},
          {"hpg_checkpoint", c.hpg_checkpoint.generic_string()},
          {"hdnet_checkpoint", c.hdnet_checkpoint.generic_string()},
          {"replay_path", c.replay_path.generic_string()},
          {"ablation", std::string(to_string(c.ablation))},
          {"grid_per_side", c.grid_per_side},
          {"area_filter_first", c.area_filter_first}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.fg_threshold = j.value("fg_threshold", c.fg_threshold);
    c.heat_threshold = j.value("heat_threshold", c.heat_threshold);
    c.k = j.value("k", c.k);
    c.score_threshold = j.value("score_threshold", c.score_threshold);
    c.nms_iou = j.value("nms_iou", c.nms_iou);
    c.max_area = j.value("max_area", c.max_area);
    c.sigma = j.value("sigma", c.sigma);
    c.proposer = j.value("proposer", c.proposer);
    c.hpg_checkpoint = j.value("hpg_checkpoint", std::string());
    c.hdnet_checkpoint = j.value("hdnet_checkpoint", std::string());
    c.replay_path = j.value("replay_path", std::string());
    c.ablation = ablation_from_string(j.value("ablation", std::string("none")));
    c.grid_per_side = j.value("grid_per_side", c.grid_per_side);
    c.area_filter_first = j.value("area_filter_first", c.area_filter_first);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

std::optional<Detection> select_best(const RefinedProposal& refined, double score_threshold) {
  const int slot = argmax_slot(refined.refined_scores);
  const double score = refined.refined_scores[static_cast<std::size_t>(slot)];
  if (score < score_threshold) return std::nullopt;
  return Detection{refined.proposal.masks[static_cast<std::size_t>(slot)], score, refined.proposal.prompt, slot};
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (Detection& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return mask_iou(k.mask, d.mask) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<Detection> area_filter(std::vector<Detection> detections, std::size_t max_area) {
  std::erase_if(detections, [&](const Detection& d) { return mask_area(d.mask) > max_area; });
  return detections;
}

std::vector<PixelPoint> generate_prompts(const FgPrediction& fg, const Heatmap& heat, const PipelineConfig& cfg) {
  const ImageSize size = fg.size;
  if (cfg.ablation == Ablation::None || cfg.ablation == Ablation::NoHdnet) {
    const BinaryMask mask = binarize_foreground(fg, cfg.fg_threshold);
    std::vector<PixelPoint> prompts;
    for (const Keypoint& kp : select_peaks(heat, mask, cfg.k, cfg.heat_threshold)) prompts.push_back(kp.point);
    return prompts;
  }
  const bool gated = cfg.ablation == Ablation::NoHeatmap;
  const int n = cfg.grid_per_side;
  std::vector<PixelPoint> prompts;
  for (int j = 0; j < n; ++j) {
    const int y = std::min(size.h - 1, static_cast<int>((j + 0.5) * size.h / n));
    for (int i = 0; i < n; ++i) {
      const int x = std::min(size.w - 1, static_cast<int>((i + 0.5) * size.w / n));
      const std::size_t p = static_cast<std::size_t>(y) * size.w + x;
      if (gated && !(fg.foreground_probability(p) > cfg.fg_threshold)) continue;
      if (!prompts.empty() && prompts.back() == PixelPoint{x, y}) continue;
      prompts.push_back({x, y});
    }
  }
  return prompts;
}

std::uint64_t prompt_seed(std::uint64_t seed, PixelPoint prompt, ImageSize size) {
  return derive_seed(seed, static_cast<std::uint64_t>(prompt.y) * size.w + static_cast<std::uint64_t>(prompt.x));
}

std::vector<Detection> post_process(const std::vector<RefinedProposal>& refined, const PipelineConfig& cfg) {
  std::vector<Detection> dets;
  for (const RefinedProposal& r : refined) {
    if (auto d = select_best(r, cfg.score_threshold)) dets.push_back(std::move(*d));
  }
  if (cfg.area_filter_first) return nms(area_filter(std::move(dets), cfg.max_area), cfg.nms_iou);
  return area_filter(nms(std::move(dets), cfg.nms_iou), cfg.max_area);
}

std::vector<Detection> detect(const Scene& scene, std::size_t scene_index, const std::vector<PixelPoint>& prompts,
                              const Mlp* hdnet, const MaskProposer& proposer, const PipelineConfig& cfg,
                              std::uint64_t seed) {
  std::vector<RefinedProposal> refined;
  refined.reserve(prompts.size());
  for (const PixelPoint& p : prompts) {
    MaskProposal proposal = proposer.propose(scene, scene_index, p, prompt_seed(seed, p, scene.size()));
    if (hdnet) {
      refined.push_back(refine_scores(proposal, *hdnet));
    } else {
      const SlotScores base = proposal.base_scores;
      refined.push_back({std::move(proposal), base});
    }
  }
  return post_process(refined, cfg);
}

std::vector<Detection> infer_scene(const Scene& scene, std::size_t scene_index, const Mlp& hpg, const Mlp* hdnet,
                                   const MaskProposer& proposer, const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.uses_hdnet() && !hdnet) fail(ErrorKind::ConfigError, "this pipeline variant needs an HDNet checkpoint");
  const auto [fg, heat] = predict_hpg(hpg, scene.image);
  const std::vector<PixelPoint> prompts = generate_prompts(fg, heat, cfg);
  return detect(scene, scene_index, prompts, cfg.uses_hdnet() ? hdnet : nullptr, proposer, cfg, seed);
}

PipelineModels load_models(const PipelineConfig& cfg) {
  if (cfg.hpg_checkpoint.empty()) fail(ErrorKind::ConfigError, "no HPG checkpoint configured");
  PipelineModels models{load_checkpoint(cfg.hpg_checkpoint), std::nullopt};
  if (cfg.uses_hdnet()) {
    if (cfg.hdnet_checkpoint.empty()) fail(ErrorKind::ConfigError, "no HDNet checkpoint configured");
    models.hdnet = load_checkpoint(cfg.hdnet_checkpoint);
  }
  return models;
}

nlohmann::json detections_to_json(const std::vector<Detection>& detections) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : detections) {
    arr.push_back({{"mask", mask_to_json(d.mask)},
                   {"score", d.score},
                   {"prompt", {d.prompt.x, d.prompt.y}},
                   {"slot", d.slot}});
  }
  return arr;
}

std::vector<Detection> detections_from_json(const nlohmann::json& j) {
  std::vector<Detection> out;
  try {
    for (const auto& d : j) {
      out.push_back({mask_from_json(d.at("mask")), d.at("score").get<double>(),
                     PixelPoint{d.at("prompt").at(0).get<int>(), d.at("prompt").at(1).get<int>()},
                     d.at("slot").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::DatasetError, std::string("detection record: ") + e.what());
  }
  return out;
}

}  // namespace uoiskit
