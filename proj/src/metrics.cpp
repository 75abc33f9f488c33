#include "uoiskit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "uoiskit/error.hpp"
#include "uoiskit/parallel.hpp"

namespace uoiskit {

namespace {

std::vector<PixelPoint> boundary_list(const BinaryMask& mask) {
  const DenseMask b = boundary_pixels(to_dense(mask));
  std::vector<PixelPoint> out;
  for (int y = 0; y < b.size.h; ++y) {
    for (int x = 0; x < b.size.w; ++x) {
      if (b.at(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

// Points of `a` lying within `tol` (Euclidean) of some point of `b`; the same
// count as intersecting `a` with `b` dilated by a disk of radius tol.
std::size_t within_tolerance(const std::vector<PixelPoint>& a, const std::vector<PixelPoint>& b, int tol) {
  const long long r2 = static_cast<long long>(tol) * tol;
  std::size_t hits = 0;
  for (const PixelPoint& p : a) {
    for (const PixelPoint& q : b) {
      const long long dx = p.x - q.x, dy = p.y - q.y;
      if (dx * dx + dy * dy <= r2) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 1.0; }

void check_common_grid(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts) {
  const BinaryMask* ref = !preds.empty() ? &preds.front() : (!gts.empty() ? &gts.front() : nullptr);
  if (!ref) return;
  auto same = [&](const BinaryMask& m) { return m.size() == ref->size(); };
  if (!std::all_of(preds.begin(), preds.end(), same) || !std::all_of(gts.begin(), gts.end(), same)) {
    fail(ErrorKind::InvalidDimensions, "masks are not on a common grid");
  }
}

}  // namespace

ScoreMatrix pairwise_f(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts) {
  check_common_grid(preds, gts);
  ScoreMatrix m{preds.size(), gts.size(), std::vector<double>(preds.size() * gts.size(), 0.0)};
  std::vector<std::size_t> gt_area(gts.size());
  for (std::size_t j = 0; j < gts.size(); ++j) gt_area[j] = mask_area(gts[j]);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t pa = mask_area(preds[i]);
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const std::size_t inter = intersection_area(preds[i], gts[j]);
      if (inter > 0) m.at(i, j) = 2.0 * static_cast<double>(inter) / static_cast<double>(pa + gt_area[j]);
    }
  }
  return m;
}

MatchResult hungarian_match(const ScoreMatrix& scores) {
  MatchResult result;
  if (scores.rows == 0 || scores.cols == 0) return result;
  // Shortest augmenting path with potentials on an n x m cost matrix, n <= m.
  const bool transposed = scores.rows > scores.cols;
  const std::size_t n = transposed ? scores.cols : scores.rows;
  const std::size_t m = transposed ? scores.rows : scores.cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    return -(transposed ? scores.at(j - 1, i - 1) : scores.at(i - 1, j - 1));
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t row = transposed ? j - 1 : p[j] - 1;
    const std::size_t col = transposed ? p[j] - 1 : j - 1;
    result.pairs.emplace_back(row, col);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [r, c] : result.pairs) {
    result.scores.push_back(scores.at(r, c));
    result.total += scores.at(r, c);
  }
  return result;
}

Prf PrfCounts::prf() const {
  Prf out;
  out.precision = safe_ratio(tp_pred, pred_total);
  out.recall = safe_ratio(tp_gt, gt_total);
  const double s = out.precision + out.recall;
  out.f = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

PrfCounts overlap_counts(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                         const MatchResult& match) {
  check_common_grid(preds, gts);
  PrfCounts c;
  for (const BinaryMask& m : preds) c.pred_total += static_cast<double>(mask_area(m));
  for (const BinaryMask& m : gts) c.gt_total += static_cast<double>(mask_area(m));
  for (const auto& [i, j] : match.pairs) {
    const double inter = static_cast<double>(intersection_area(preds.at(i), gts.at(j)));
    c.tp_pred += inter;
    c.tp_gt += inter;
  }
  return c;
}

Prf overlap_prf(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match) {
  return overlap_counts(preds, gts, match).prf();
}

PrfCounts boundary_counts(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                          const MatchResult& match, int tolerance) {
  if (tolerance < 0) fail(ErrorKind::ConfigError, "boundary tolerance must be non-negative");
  check_common_grid(preds, gts);
  std::vector<std::vector<PixelPoint>> pb(preds.size()), gb(gts.size());
  PrfCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pb[i] = boundary_list(preds[i]);
    c.pred_total += static_cast<double>(pb[i].size());
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    gb[j] = boundary_list(gts[j]);
    c.gt_total += static_cast<double>(gb[j].size());
  }
  for (const auto& [i, j] : match.pairs) {
    c.tp_pred += static_cast<double>(within_tolerance(pb.at(i), gb.at(j), tolerance));
    c.tp_gt += static_cast<double>(within_tolerance(gb.at(j), pb.at(i), tolerance));
  }
  return c;
}

Prf boundary_prf(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match,
                 int tolerance) {
  return boundary_counts(preds, gts, match, tolerance).prf();
}

namespace {

std::size_t f75_hits(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                     const MatchResult& match) {
  std::size_t hits = 0;
  for (const auto& [i, j] : match.pairs) {
    const double inter = static_cast<double>(intersection_area(preds.at(i), gts.at(j)));
    const double sum = static_cast<double>(mask_area(preds[i]) + mask_area(gts[j]));
    // 2|c∩g| >= 0.75 (|c|+|g|) in exact integer-valued arithmetic
    if (inter > 0.0 && 8.0 * inter >= 3.0 * sum) ++hits;
  }
  return hits;
}

}  // namespace

double f75(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts, const MatchResult& match) {
  if (gts.empty()) return 100.0;
  return 100.0 * static_cast<double>(f75_hits(preds, gts, match)) / static_cast<double>(gts.size());
}

SceneMetrics evaluate_scene(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                            int tolerance) {
  const MatchResult match = hungarian_match(pairwise_f(preds, gts));
  SceneMetrics s;
  s.overlap_counts = overlap_counts(preds, gts, match);
  s.boundary_counts = boundary_counts(preds, gts, match, tolerance);
  s.overlap = s.overlap_counts.prf();
  s.boundary = s.boundary_counts.prf();
  s.gt_count = gts.size();
  s.f75_hits = f75_hits(preds, gts, match);
  s.f75 = gts.empty() ? 100.0 : 100.0 * static_cast<double>(s.f75_hits) / static_cast<double>(gts.size());
  return s;
}

MetricsReport evaluate_dataset(const std::vector<InstanceSet>& preds, const std::vector<InstanceSet>& gts,
                               const EvalOptions& options) {
  if (preds.size() != gts.size()) {
    const std::size_t missing = std::min(preds.size(), gts.size());
    fail(ErrorKind::DatasetError, "scene " + std::to_string(missing) + " is missing from the " +
                                      (preds.size() < gts.size() ? "predictions" : "ground truth") + " (" +
                                      std::to_string(preds.size()) + " vs " + std::to_string(gts.size()) +
                                      " scenes)");
  }
  for (std::size_t s = 0; s < preds.size(); ++s) {
    if (preds[s].size != gts[s].size) {
      fail(ErrorKind::DatasetError, "scene " + std::to_string(s) + " differs in image size between manifests");
    }
  }
  MetricsReport report;
  report.scenes.resize(preds.size());
  parallel_for(preds.size(), options.jobs, [&](std::size_t s) {
    report.scenes[s] = evaluate_scene(preds[s].masks, gts[s].masks, options.tolerance);
  });
  if (report.scenes.empty()) return report;

  if (options.pixel_pooled) {
    PrfCounts o, b;
    std::size_t hits = 0, count = 0;
    for (const SceneMetrics& s : report.scenes) {
      o.tp_pred += s.overlap_counts.tp_pred;
      o.tp_gt += s.overlap_counts.tp_gt;
      o.pred_total += s.overlap_counts.pred_total;
      o.gt_total += s.overlap_counts.gt_total;
      b.tp_pred += s.boundary_counts.tp_pred;
      b.tp_gt += s.boundary_counts.tp_gt;
      b.pred_total += s.boundary_counts.pred_total;
      b.gt_total += s.boundary_counts.gt_total;
      hits += s.f75_hits;
      count += s.gt_count;
    }
    report.overlap = o.prf();
    report.boundary = b.prf();
    report.f75 = count == 0 ? 100.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(count);
    return report;
  }

  const double n = static_cast<double>(report.scenes.size());
  report.overlap = {0.0, 0.0, 0.0};
  report.boundary = {0.0, 0.0, 0.0};
  report.f75 = 0.0;
  for (const SceneMetrics& s : report.scenes) {
    report.overlap.precision += s.overlap.precision / n;
    report.overlap.recall += s.overlap.recall / n;
    report.overlap.f += s.overlap.f / n;
    report.boundary.precision += s.boundary.precision / n;
    report.boundary.recall += s.boundary.recall / n;
    report.boundary.f += s.boundary.f / n;
    report.f75 += s.f75 / n;
  }
  return report;
}

namespace {

nlohmann::json prf_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f", p.f}}; }

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json scenes = nlohmann::json::array();
  for (std::size_t i = 0; i < report.scenes.size(); ++i) {
    const SceneMetrics& s = report.scenes[i];
    scenes.push_back({{"index", i},
                      {"overlap", prf_json(s.overlap)},
                      {"boundary", prf_json(s.boundary)},
                      {"f75", s.f75},
                      {"gt_count", s.gt_count}});
  }
  return {{"overlap", prf_json(report.overlap)},
          {"boundary", prf_json(report.boundary)},
          {"f75", report.f75},
          {"scenes", scenes}};
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t label_width = 7;
  for (const auto& [label, r] : rows) label_width = std::max(label_width, label.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s | %-20s | %-20s | %5s\n", static_cast<int>(label_width), "Variant",
                "Overlap", "Boundary", "");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s | %6s %6s %6s | %6s %6s %6s | %5s\n", static_cast<int>(label_width), "", "P",
                "R", "F", "P", "R", "F", "%75");
  out << buf;
  for (const auto& [label, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s | %6.1f %6.1f %6.1f | %6.1f %6.1f %6.1f | %5.1f\n",
                  static_cast<int>(label_width), label.c_str(), 100.0 * r.overlap.precision,
                  100.0 * r.overlap.recall, 100.0 * r.overlap.f, 100.0 * r.boundary.precision,
                  100.0 * r.boundary.recall, 100.0 * r.boundary.f, r.f75);
    out << buf;
  }
  return out.str();
}

}  // namespace uoiskit
