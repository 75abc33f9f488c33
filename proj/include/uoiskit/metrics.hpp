#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uoiskit/dataset.hpp"
#include "uoiskit/mask.hpp"

namespace uoiskit {

/// Row-major score matrix, rows = predictions, cols = ground truths.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

/// Entry (i, j) = 2|c_i ∩ g_j| / (|c_i| + |g_j|), 0 when the intersection is empty.
ScoreMatrix pairwise_f(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts);

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred, gt), sorted by pred
  std::vector<double> scores;                               // score of each pair
  double total = 0.0;
};

/// Maximum-weight assignment; min(rows, cols) pairs, extras left unmatched.
MatchResult hungarian_match(const ScoreMatrix& scores);

struct Prf {
  double precision = 1.0;
  double recall = 1.0;
  double f = 1.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

/// Sums backing a precision/recall pair, kept for pixel-pooled aggregation.
struct PrfCounts {
  double tp_pred = 0.0;  // matched predicted pixels
  double tp_gt = 0.0;    // matched ground-truth pixels
  double pred_total = 0.0;
  double gt_total = 0.0;

  Prf prf() const;
};

PrfCounts overlap_counts(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                         const MatchResult& match);
Prf overlap_prf(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match);

/// Boundary variant: precision counts predicted boundary pixels within
/// `tolerance` of the matched gt boundary, recall the converse.
PrfCounts boundary_counts(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                          const MatchResult& match, int tolerance = 2);
Prf boundary_prf(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match,
                 int tolerance = 2);

/// Percentage of gts whose matched pairwise F is at least 0.75; 100 when there are no gts.
double f75(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match);

struct SceneMetrics {
  Prf overlap;
  Prf boundary;
  double f75 = 100.0;
  PrfCounts overlap_counts;
  PrfCounts boundary_counts;
  std::size_t gt_count = 0;
  std::size_t f75_hits = 0;
};

SceneMetrics evaluate_scene(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                            int tolerance = 2);

struct MetricsReport {
  Prf overlap;
  Prf boundary;
  double f75 = 100.0;
  std::vector<SceneMetrics> scenes;
};

struct EvalOptions {
  int tolerance = 2;
  /// Sum pixel counts over all scenes instead of averaging per-scene values.
  bool pixel_pooled = false;
  int jobs = 1;
};

/// Per-scene metrics and their aggregate. Throws DatasetError on a scene-count
/// or image-size mismatch.
MetricsReport evaluate_dataset(const std::vector<InstanceSet>& preds, const std::vector<InstanceSet>& gts,
                               const EvalOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);

/// Plain-text table: Overlap P/R/F, Boundary P/R/F, %75, one row per label.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace uoiskit
