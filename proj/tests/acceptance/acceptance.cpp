#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/support.hpp"
#include "uoiskit/dataset.hpp"
#include "uoiskit/hdnet.hpp"
#include "uoiskit/hpghead.hpp"
#include "uoiskit/metrics.hpp"
#include "uoiskit/pipeline.hpp"

using namespace uoiskit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome outcome(bool pass, const std::string& detail) { return {pass, detail}; }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Centroid from raw pixel moments.
Centroid moments(const BinaryMask& m) {
  const auto bits = rle_decode(m);
  double sx = 0, sy = 0, n = 0;
  for (int y = 0; y < m.size().h; ++y) {
    for (int x = 0; x < m.size().w; ++x) {
      if (bits[static_cast<std::size_t>(y) * m.size().w + x]) {
        sx += x;
        sy += y;
        n += 1;
      }
    }
  }
  return {sx / n, sy / n};
}

Outcome heatmap_closed_form() {
  SceneConfig sc;
  sc.size = {60, 80};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(sc, 100 + seed);
    const double sigma = 2.0 + static_cast<double>(seed % 7);
    std::vector<Centroid> c;
    for (const BinaryMask& m : s.instances) c.push_back(moments(m));
    const Heatmap h = build_gt_heatmap(s.instances, s.size(), {sigma});
    for (int y = 0; y < sc.size.h; ++y) {
      for (int x = 0; x < sc.size.w; ++x) {
        double v = 0.0;
        for (const Centroid& k : c) {
          v = std::max(v, std::exp(-((x - k.x) * (x - k.x) + (y - k.y) * (y - k.y)) / (2 * sigma * sigma)));
        }
        worst = std::max(worst, std::abs(v - h.at(x, y)));
      }
    }
  }
  return outcome(worst < 1e-12, fmt("max |error| %.3g over 50 scenes", worst));
}

// Disk rasterised over its bounding box only.
BinaryMask small_disk(ImageSize size, double cx, double cy, double r) {
  std::vector<std::uint8_t> bits(size.pixels(), 0);
  for (int y = static_cast<int>(cy - r) - 1; y <= static_cast<int>(cy + r) + 1; ++y) {
    for (int x = static_cast<int>(cx - r) - 1; x <= static_cast<int>(cx + r) + 1; ++x) {
      if (size.contains(x, y) && (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
        bits[static_cast<std::size_t>(y) * size.w + x] = 1;
      }
    }
  }
  return rle_encode(bits, size);
}

Outcome peak_recovery() {
  const ImageSize size{360, 480};
  const double sigma = 8.0;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> count(1, 30);
  std::uniform_real_distribution<double> ux(14.0, size.w - 15.0), uy(14.0, size.h - 15.0), ur(4.0, 11.0);
  int misses = 0, extras = 0, placed = 0;
  for (int scene = 0; scene < 100; ++scene) {
    const int s = count(rng);
    std::vector<Centroid> centres;
    while (static_cast<int>(centres.size()) < s) {
      const Centroid c{ux(rng), uy(rng)};
      bool far = true;
      for (const Centroid& o : centres) far = far && std::hypot(c.x - o.x, c.y - o.y) > 6 * sigma;
      if (far) centres.push_back(c);
    }
    std::vector<BinaryMask> inst;
    BinaryMask fg = BinaryMask::empty(size);
    std::vector<PixelPoint> expected;
    for (const Centroid& c : centres) {
      // a centroid on a half pixel has two equal nearest pixels; redraw the radius
      const auto half = [](double v) { return v - std::floor(v) == 0.5; };
      BinaryMask m;
      Centroid k;
      do {
        m = small_disk(size, c.x, c.y, ur(rng));
        k = moments(m);
      } while (half(k.x) || half(k.y));
      fg = mask_union(fg, m);
      expected.push_back({static_cast<int>(std::lround(k.x)), static_cast<int>(std::lround(k.y))});
      inst.push_back(std::move(m));
    }
    placed += s;
    std::vector<PixelPoint> got;
    for (const Keypoint& k : select_peaks(build_gt_heatmap(inst, size, {sigma}), fg, 30, 0.007)) got.push_back(k.point);
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    std::vector<PixelPoint> diff;
    std::set_difference(expected.begin(), expected.end(), got.begin(), got.end(), std::back_inserter(diff));
    misses += static_cast<int>(diff.size());
    diff.clear();
    std::set_difference(got.begin(), got.end(), expected.begin(), expected.end(), std::back_inserter(diff));
    extras += static_cast<int>(diff.size());
  }
  return outcome(misses == 0 && extras == 0, std::to_string(placed) + " instances, " + std::to_string(misses) +
                                                  " misses, " + std::to_string(extras) + " extras");
}

double brute_force_total(const ScoreMatrix& s) {
  const bool tall = s.rows > s.cols;
  const std::size_t small = tall ? s.cols : s.rows, large = tall ? s.rows : s.cols;
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double t = 0.0;
    for (std::size_t i = 0; i < small; ++i) t += tall ? s.at(perm[i], i) : s.at(i, perm[i]);
    best = std::max(best, t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome hungarian_equivalence() {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    ScoreMatrix s;
    s.rows = dim(rng);
    s.cols = dim(rng);
    for (std::size_t i = 0; i < s.rows * s.cols; ++i) s.values.push_back(trial % 5 == 0 ? std::round(u(rng) * 4) / 4 : u(rng));
    const MatchResult m = hungarian_match(s);
    double sum = 0.0;
    for (const auto& [r, c] : m.pairs) sum += s.at(r, c);
    worst = std::max({worst, std::abs(m.total - brute_force_total(s)), std::abs(sum - m.total)});
  }
  return outcome(worst <= 1e-12, fmt("max |hungarian - brute force| %.3g over 500 trials", worst));
}

Outcome gradient_fidelity() {
  const std::vector<std::vector<int>> shapes{{8, 256, 256, 3}, {512, 256, 256, 1}};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(500 + trial);
    std::normal_distribution<double> n(0.0, 1.0);
    Mlp net = Mlp::glorot(shapes[trial % 2], 900 + trial);
    for (DenseLayer& l : net.layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.1 * n(rng);
    }
    const Matrix x = Matrix::NullaryExpr(3, net.input_dim(), [&] { return n(rng); });
    const Matrix up = Matrix::NullaryExpr(3, net.output_dim(), [&] { return n(rng); });
    const auto loss = [&](const Mlp& m, const Matrix& in) { return (mlp_forward(m, in).array() * up.array()).sum(); };
    const MlpGradients g = mlp_backward(net, x, up);
    const double h = 1e-5;

    std::vector<double> analytic, numeric;
    std::uniform_int_distribution<Eigen::Index> pick(0, 1 << 30);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (int s = 0; s < 60; ++s) {
        Matrix& w = net.layers[l].weight;
        const Eigen::Index i = pick(rng) % w.size();
        const double keep = w.data()[i];
        w.data()[i] = keep + h;
        const double lp = loss(net, x);
        w.data()[i] = keep - h;
        const double lm = loss(net, x);
        w.data()[i] = keep;
        analytic.push_back(g.layers[l].weight.data()[i]);
        numeric.push_back((lp - lm) / (2 * h));
      }
      for (int s = 0; s < 20; ++s) {
        Vector& b = net.layers[l].bias;
        const Eigen::Index i = pick(rng) % b.size();
        const double keep = b[i];
        b[i] = keep + h;
        const double lp = loss(net, x);
        b[i] = keep - h;
        const double lm = loss(net, x);
        b[i] = keep;
        analytic.push_back(g.layers[l].bias[i]);
        numeric.push_back((lp - lm) / (2 * h));
      }
    }
    for (int s = 0; s < 20; ++s) {
      Matrix xp = x, xm = x;
      const Eigen::Index i = pick(rng) % x.size();
      xp.data()[i] += h;
      xm.data()[i] -= h;
      analytic.push_back(g.input.data()[i]);
      numeric.push_back((loss(net, xp) - loss(net, xm)) / (2 * h));
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300}));
  }
  return outcome(worst < 1e-4, fmt("max relative error %.3g over 20 trials", worst));
}

std::vector<PixelPoint> gt_prompts(const Scene& s, double sigma) {
  std::vector<PixelPoint> out;
  for (const Keypoint& k : select_peaks(build_gt_heatmap(s.instances, s.size(), {sigma}), s.foreground)) {
    out.push_back(k.point);
  }
  return out;
}

Outcome residual_identity() {
  SceneConfig sc;
  sc.size = {96, 128};
  const auto scenes = generate_scenes(sc, 404, 20);
  OracleConfig oc;
  const OracleProposer oracle(oc);
  const Mlp zero = Mlp::zeros(hdnet_widths(oc.channels));
  bool refine_exact = true, pipeline_equal = true;
  std::size_t detections = 0;
  PipelineConfig full, raw;
  raw.ablation = Ablation::NoHdnet;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::vector<PixelPoint> prompts = gt_prompts(scenes[i], full.sigma);
    for (int y = 8; y < sc.size.h; y += 16) {
      for (int x = 8; x < sc.size.w; x += 16) prompts.push_back({x, y});
    }
    for (const PixelPoint& p : prompts) {
      const MaskProposal prop = oracle.propose(scenes[i], i, p, 9 + i);
      const RefinedProposal r = refine_scores(prop, zero);
      for (int k = 0; k < kSlotCount; ++k) refine_exact = refine_exact && r.refined_scores[k] == prop.base_scores[k];
    }
    const auto a = detect(scenes[i], i, prompts, &zero, oracle, full, 31 + i);
    const auto b = detect(scenes[i], i, prompts, nullptr, oracle, raw, 31 + i);
    pipeline_equal = pipeline_equal && a == b;
    detections += a.size();
  }
  return outcome(refine_exact && pipeline_equal && detections > 0,
                 std::string("refine ") + (refine_exact ? "exact" : "differs") + ", pipeline " +
                     (pipeline_equal ? "identical" : "differs") + " on 20 scenes, " + std::to_string(detections) +
                     " detections");
}

Outcome iou_targets() {
  SceneConfig sc;
  sc.size = {96, 128};
  const auto scenes = generate_scenes(sc, 606, 50);
  OracleConfig oc;
  oc.boundary_noise = 0;
  oc.channels = 32;
  std::mt19937_64 rng(6);
  int bg = 0, fg = 0, bad = 0;
  for (int n = 0; n < 1000; ++n) {
    const Scene& s = scenes[n % scenes.size()];
    PixelPoint p;
    if (n % 3 == 0) {
      do {
        p = {std::uniform_int_distribution<int>(0, sc.size.w - 1)(rng), std::uniform_int_distribution<int>(0, sc.size.h - 1)(rng)};
      } while (s.foreground.contains(p));
    } else {
      const BinaryMask& inst = s.instances[std::uniform_int_distribution<std::size_t>(0, s.instances.size() - 1)(rng)];
      do {
        p = {std::uniform_int_distribution<int>(0, sc.size.w - 1)(rng), std::uniform_int_distribution<int>(0, sc.size.h - 1)(rng)};
      } while (!inst.contains(p));
    }
    const HdnetSample sample = make_sample(propose(s, p, oc, 1000 + n), s);
    const BinaryMask* owner = nullptr;
    for (const BinaryMask& m : s.instances) {
      if (m.contains(p)) owner = &m;
    }
    if (!owner) {
      ++bg;
      bad += !sample.background || std::any_of(sample.targets.begin(), sample.targets.end(), [](double t) { return t != 0.0; });
    } else {
      ++fg;
      bad += sample.background || sample.targets[static_cast<int>(Slot::Part)] != 1.0;
    }
  }
  return outcome(bad == 0 && bg > 0 && fg > 0, std::to_string(bg) + " background and " + std::to_string(fg) +
                                                   " object prompts, " + std::to_string(bad) + " violations");
}

std::vector<InstanceSet> as_sets(const std::vector<Scene>& scenes, const std::vector<std::vector<Detection>>& dets) {
  std::vector<InstanceSet> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    InstanceSet s{scenes[i].size(), {}};
    for (const Detection& d : dets[i]) s.masks.push_back(d.mask);
    out.push_back(std::move(s));
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Outcome ablation_analogue() {
  SceneConfig sc;
  sc.size = {144, 192};
  sc.min_radius_frac = 0.07;
  sc.max_radius_frac = 0.15;
  const auto scenes = generate_scenes(sc, 2024, 500);
  const std::vector<Scene> hpg_train(scenes.begin(), scenes.begin() + 100);
  const std::vector<Scene> hdnet_train(scenes.begin(), scenes.begin() + 400);
  const std::vector<Scene> test(scenes.begin() + 400, scenes.end());
  const OracleConfig oc;
  const OracleProposer oracle(oc);

  auto t = std::chrono::steady_clock::now();
  TrainConfig hc;
  hc.batch_size = 4;
  hc.seed = 1;
  HpgTrainOptions ho;
  ho.hidden = {64, 64};
  ho.pixels_per_image = 2048;
  const Mlp hpg = train_hpg_head(hpg_train, hc, ho).best;
  std::printf("  hpg head trained in %.0f s\n", seconds_since(t));

  t = std::chrono::steady_clock::now();
  TrainConfig dc;
  dc.seed = 2;
  const Mlp hdnet = train_hdnet(build_training_set(hdnet_train, 30, 1.0 / 3.0, oc, 3), dc).best;
  const SlotAccuracy acc = slot_accuracy(build_training_set(test, 30, 1.0 / 3.0, oc, 4), hdnet);
  std::printf("  hdnet trained in %.0f s; held-out argmax accuracy %.3f (raw scores %.3f, %zu prompts)\n",
              seconds_since(t), acc.refined, acc.baseline, acc.prompts);

  PipelineConfig full, raw;
  raw.ablation = Ablation::NoHdnet;
  std::vector<std::vector<Detection>> a(test.size()), b(test.size()), ga(test.size()), gb(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    a[i] = infer_scene(test[i], 400 + i, hpg, &hdnet, oracle, full, 50 + i);
    b[i] = infer_scene(test[i], 400 + i, hpg, nullptr, oracle, raw, 50 + i);
    const auto prompts = gt_prompts(test[i], full.sigma);
    ga[i] = detect(test[i], 400 + i, prompts, &hdnet, oracle, full, 50 + i);
    gb[i] = detect(test[i], 400 + i, prompts, nullptr, oracle, raw, 50 + i);
  }
  std::vector<InstanceSet> gt;
  for (const Scene& s : test) gt.push_back({s.size(), s.instances});
  const MetricsReport ra = evaluate_dataset(as_sets(test, a), gt), rb = evaluate_dataset(as_sets(test, b), gt);
  const MetricsReport rga = evaluate_dataset(as_sets(test, ga), gt), rgb = evaluate_dataset(as_sets(test, gb), gt);
  std::printf("%s", format_table({{"hpg + hdnet", ra}, {"hpg only", rb}, {"gt prompts + hdnet", rga},
                                  {"gt prompts only", rgb}})
                        .c_str());
  const double gain = 100.0 * (ra.overlap.f - rb.overlap.f);
  const double gt_gain = 100.0 * (rga.overlap.f - rgb.overlap.f);
  const bool pass = gain >= 10.0 && acc.refined > 0.9 && acc.baseline < 0.6;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "overlap F gain %+.1f points (%.1f vs %.1f), with ground-truth prompts %+.1f; argmax accuracy %.3f vs "
                "%.3f",
                gain, 100.0 * ra.overlap.f, 100.0 * rb.overlap.f, gt_gain, acc.refined, acc.baseline);
  return outcome(pass, buf);
}

Outcome metrics_conventions() {
  SceneConfig sc;
  sc.size = {96, 128};
  bool self_ok = true;
  for (const Scene& s : generate_scenes(sc, 808, 10)) {
    const SceneMetrics m = evaluate_scene(s.instances, s.instances);
    self_ok = self_ok && m.overlap.f == 1.0 && m.boundary.f == 1.0 && m.f75 == 100.0;
  }
  const ImageSize size{40, 60};
  const std::vector<BinaryMask> two{fixture::disk(size, 12, 20, 8), fixture::rect(size, 35, 5, 55, 30)};
  const SceneMetrics half = evaluate_scene({two[1]}, two);
  return outcome(self_ok && half.f75 == 50.0,
                 std::string("self evaluation ") + (self_ok ? "perfect" : "imperfect") + ", one of two found F75 " +
                     fmt("%.17g", half.f75));
}

Outcome threshold_fidelity() {
  const ImageSize size{8, 8};
  const auto proposal = [&](double score) {
    RefinedProposal r;
    for (int k = 0; k < kSlotCount; ++k) r.proposal.masks[k] = fixture::rect(size, k, 0, k, 0);
    r.refined_scores = {score - 0.2, score, score - 0.1, 0.0};
    return r;
  };
  const bool score_ok = select_best(proposal(0.48), 0.48).has_value() &&
                        !select_best(proposal(std::nextafter(0.48, 0.0)), 0.48).has_value();

  // 100-px runs overlapping by 48 (IoU 0.316) and by 46 (IoU 0.299)
  const ImageSize line{1, 400};
  const auto run = [&](int x0) { return fixture::rect(line, x0, 0, x0 + 99, 0); };
  const Detection base{run(0), 0.9, {0, 0}, 0};
  const bool nms_ok = nms({base, {run(52), 0.8, {0, 0}, 0}}, 0.3).size() == 1 &&
                      nms({base, {run(54), 0.8, {0, 0}, 0}}, 0.3).size() == 2 &&
                      std::abs(mask_iou(run(0), run(52)) - 48.0 / 152.0) < 1e-15;

  const ImageSize big{250, 250};
  const BinaryMask exact = fixture::rect(big, 0, 0, 199, 199);
  const BinaryMask over = mask_union(exact, fixture::rect(big, 200, 0, 200, 0));
  const bool area_ok = area_filter({{exact, 0.9, {0, 0}, 0}}, 40000).size() == 1 &&
                       area_filter({{over, 0.9, {0, 0}, 0}}, 40000).empty() && mask_area(over) == 40001;

  // all three rules through post_process with the default configuration
  RefinedProposal keep = proposal(0.9), drop = proposal(0.47);
  const auto out = post_process({keep, drop}, PipelineConfig{});
  const bool combined = out.size() == 1 && out[0].score == 0.9;

  return outcome(score_ok && nms_ok && area_ok && combined,
                 std::string("score ") + (score_ok ? "ok" : "wrong") + ", nms " + (nms_ok ? "ok" : "wrong") +
                     ", area " + (area_ok ? "ok" : "wrong") + ", post-process " + (combined ? "ok" : "wrong"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_in(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" UOISKIT_CLI_PATH "' " + args + " > /dev/null 2>> cli.err";
  return std::system(cmd.c_str());
}

Outcome cli_determinism() {
  const std::string config =
      "[run]\nseed = 21\ncount = 12\n\n[scene]\nh = 96\nw = 128\n\n"
      "[pipeline]\nhpg_checkpoint = \"hpg.ckpt\"\nhdnet_checkpoint = \"hdnet.ckpt\"\n\n"
      "[hpg]\nhidden = [32, 32]\npixels_per_image = 1024\nbatch_size = 4\nmax_epochs = 4\ndecay_period = 2\n\n"
      "[hdnet]\nhidden = 64\nprompts_per_scene = 12\nmax_epochs = 4\ndecay_period = 2\n";
  const std::vector<std::string> steps{
      "gen --config run.toml --out train",
      "gen --config run.toml --seed 22 --count 6 --out test",
      "train-hpg --config run.toml --data train --out hpg.ckpt",
      "train-hdnet --config run.toml --data train --out hdnet.ckpt",
      "infer --config run.toml --data test --out pred.json",
      "eval --config run.toml --pred pred.json --gt test --out report.json",
  };
  const fs::path root = fs::absolute("acceptance_cli");
  fs::remove_all(root);
  std::vector<fs::path> dirs{root / "a", root / "b"};
  for (const fs::path& d : dirs) {
    fs::create_directories(d);
    std::ofstream(d / "run.toml") << config;
    for (const std::string& step : steps) {
      if (run_in(d, step) != 0) return outcome(false, "`uoiskit " + step + "` failed in " + d.string());
    }
  }
  bool same = true;
  std::string differing;
  for (const char* f : {"train/manifest.json", "hpg.ckpt", "hdnet.ckpt", "pred.json", "report.json"}) {
    if (slurp(dirs[0] / f) != slurp(dirs[1] / f)) {
      same = false;
      differing += std::string(" ") + f;
    }
  }
  const std::string report = slurp(dirs[0] / "report.json");
  return outcome(same && !report.empty(), same ? "report reproduced byte for byte (" + std::to_string(report.size()) +
                                                     " bytes)"
                                               : "outputs differ:" + differing);
}

}  // namespace

// Runs every criterion, or only the numbers given as arguments.
int main(int argc, char** argv) {
  setenv("UOISKIT_LOG", "warn", 1);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"closed-form heatmap", heatmap_closed_form},
      {"peak recovery", peak_recovery},
      {"hungarian equals brute force", hungarian_equivalence},
      {"gradient fidelity", gradient_fidelity},
      {"residual identity", residual_identity},
      {"iou targets", iou_targets},
      {"ablation analogue", ablation_analogue},
      {"metrics conventions", metrics_conventions},
      {"threshold fidelity", threshold_fidelity},
      {"cli determinism", cli_determinism},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int n = std::atoi(argv[a]);
    if (n >= 1 && n <= static_cast<int>(criteria.size())) selected[n - 1] = true;
  }
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    const auto t = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = outcome(false, std::string("threw ") + e.what());
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s, %.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), seconds_since(t));
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
