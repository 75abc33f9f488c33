#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "uoiskit/hpg.hpp"

using namespace uoiskit;

namespace {

// Direct Gaussian keypoint heatmap with max merging, from per-pixel moments.
double oracle_heat(const std::vector<BinaryMask>& instances, int x, int y, double sigma) {
  double best = 0.0;
  for (const BinaryMask& m : instances) {
    const auto bits = rle_decode(m);
    double sx = 0, sy = 0, n = 0;
    for (int yy = 0; yy < m.size().h; ++yy) {
      for (int xx = 0; xx < m.size().w; ++xx) {
        if (bits[static_cast<std::size_t>(yy) * m.size().w + xx]) {
          sx += xx;
          sy += yy;
          n += 1;
        }
      }
    }
    const double cx = sx / n, cy = sy / n;
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    best = std::max(best, std::exp(-d2 / (2.0 * sigma * sigma)));
  }
  return best;
}

FgPrediction logits_with_probability(ImageSize size, const std::vector<double>& p_fg) {
  FgPrediction pred(size);
  for (std::size_t i = 0; i < size.pixels(); ++i) {
    pred.logits[2 * i] = 0.0;
    pred.logits[2 * i + 1] = std::log(p_fg[i] / (1.0 - p_fg[i]));
  }
  return pred;
}

}  // namespace

TEST_CASE("ground-truth heatmap matches the closed form") {
  const ImageSize size{24, 30};
  const std::vector<BinaryMask> inst{fixture::disk(size, 7.3, 8.1, 4.0), fixture::rect(size, 15, 10, 25, 20)};
  const Heatmap h = build_gt_heatmap(inst, size, {3.0});
  for (int y = 0; y < size.h; ++y) {
    for (int x = 0; x < size.w; ++x) CHECK(std::abs(h.at(x, y) - oracle_heat(inst, x, y, 3.0)) < 1e-12);
  }
}

TEST_CASE("heatmap peaks at 1 on an integer centroid and stays in [0, 1]") {
  const ImageSize size{21, 21};
  const Heatmap h = build_gt_heatmap({fixture::rect(size, 8, 8, 12, 12)}, size, {2.0});
  CHECK(h.at(10, 10) == 1.0);
  for (double v : h.values) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(h.at(10 + 2, 10) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(fixture::error_kind([&] { build_gt_heatmap({BinaryMask::empty(size)}, size, {2.0}); }) ==
        ErrorKind::EmptyMask);
}

TEST_CASE("heatmap of no instances is zero") {
  const Heatmap h = build_gt_heatmap({}, {4, 4}, {8.0});
  for (double v : h.values) CHECK(v == 0.0);
}

TEST_CASE("heatmap mse") {
  Heatmap a({2, 2}), b({2, 2});
  CHECK(heatmap_mse(a, b) == 0.0);
  b.values = {0.1, 0.1, 0.1, 0.1};
  CHECK(heatmap_mse(a, b) == doctest::Approx(0.01));
  a.values = {0.2, 0.0, 0.5, 1.0};
  CHECK(heatmap_mse(a, b) == doctest::Approx(heatmap_mse(b, a)));
  CHECK(fixture::error_kind([&] { heatmap_mse(a, Heatmap({2, 3})); }) == ErrorKind::InvalidDimensions);
}

TEST_CASE("class-balanced weights sum to one") {
  const ClassWeights w = class_balanced_weights(3, 97);
  CHECK(3 * w.foreground + 97 * w.background == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.foreground == doctest::Approx(1.0 / 6.0));
  CHECK(w.background == doctest::Approx(1.0 / 194.0));
  const ClassWeights only_bg = class_balanced_weights(0, 10);
  CHECK(only_bg.foreground == 0.0);
  CHECK(10 * only_bg.background == doctest::Approx(1.0));
}

TEST_CASE("weighted cross-entropy matches a direct sum") {
  const ImageSize size{3, 4};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  FgPrediction pred(size);
  for (double& z : pred.logits) z = u(rng);
  const BinaryMask gt = fixture::rect(size, 0, 0, 1, 0);  // 2 fg, 10 bg
  const auto bits = rle_decode(gt);
  double expected = 0.0;
  for (std::size_t p = 0; p < size.pixels(); ++p) {
    const double z0 = pred.logits[2 * p], z1 = pred.logits[2 * p + 1];
    const double lse = std::log(std::exp(z0) + std::exp(z1));
    const double w = bits[p] ? 1.0 / (2 * 2) : 1.0 / (10 * 2);
    expected += w * (lse - (bits[p] ? z1 : z0));
  }
  CHECK(weighted_ce(pred, gt) == doctest::Approx(expected).epsilon(1e-12));

  const LossWithGrad lg = weighted_ce_with_grad(pred, gt);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < pred.logits.size(); ++i) {
    FgPrediction plus = pred, minus = pred;
    plus.logits[i] += eps;
    minus.logits[i] -= eps;
    const double fd = (weighted_ce(plus, gt) - weighted_ce(minus, gt)) / (2 * eps);
    CHECK(lg.grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("hpg loss weighting") {
  CHECK(hpg_loss(1.0, 0.0) == doctest::Approx(0.1));
  CHECK(hpg_loss(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(hpg_loss(2.0, 0.5) == doctest::Approx(0.7));
  CHECK(hpg_loss(2.0, 0.5, {0.0, 1.0}) == doctest::Approx(0.5));
}

TEST_CASE("foreground binarization is a strict threshold") {
  const ImageSize size{1, 4};
  const FgPrediction half = logits_with_probability(size, {0.5, 0.5, 0.5, 0.5});
  CHECK(mask_area(binarize_foreground(half, 0.85)) == 0);
  const FgPrediction high = logits_with_probability(size, {0.9, 0.9, 0.9, 0.9});
  CHECK(binarize_foreground(high, 0.85) == BinaryMask::full(size));
  const FgPrediction mixed = logits_with_probability(size, {0.2, 0.86, 0.84, 0.99});
  CHECK(rle_decode(binarize_foreground(mixed, 0.85)) == std::vector<std::uint8_t>{0, 1, 0, 1});
}

TEST_CASE("peak selection") {
  const ImageSize size{15, 15};
  const BinaryMask all = BinaryMask::full(size);

  SUBCASE("isolated gaussian gives its centre") {
    const Heatmap h = build_gt_heatmap({fixture::rect(size, 5, 6, 7, 8)}, size, {2.0});
    const auto peaks = select_peaks(h, all);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].point == PixelPoint{6, 7});
  }
  SUBCASE("values at or below the threshold are excluded") {
    Heatmap h(size);
    h.at(4, 4) = 0.005;
    CHECK(select_peaks(h, all).empty());
    h.at(4, 4) = 0.008;
    CHECK(select_peaks(h, all).size() == 1);
  }
  SUBCASE("plateau pixels all qualify in row-major order") {
    Heatmap h(size);
    for (int y = 3; y <= 5; ++y) {
      for (int x = 3; x <= 5; ++x) h.at(x, y) = 0.5;
    }
    const auto peaks = select_peaks(h, all, 30);
    REQUIRE(peaks.size() == 9);
    CHECK(peaks[0].point == PixelPoint{3, 3});
    CHECK(peaks[1].point == PixelPoint{4, 3});
    CHECK(peaks[8].point == PixelPoint{5, 5});
    const auto top = select_peaks(h, all, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[1].point == PixelPoint{4, 3});
  }
  SUBCASE("peaks outside the foreground are dropped") {
    const Heatmap h = build_gt_heatmap({fixture::rect(size, 1, 1, 3, 3), fixture::rect(size, 10, 10, 12, 12)}, size,
                                       {1.5});
    const BinaryMask fg = fixture::rect(size, 0, 0, 7, 7);
    const auto peaks = select_peaks(h, fg);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].point == PixelPoint{2, 2});
  }
  SUBCASE("border windows are clipped") {
    Heatmap h(size);
    h.at(0, 0) = 0.9;
    h.at(14, 14) = 0.3;
    const auto peaks = select_peaks(h, all);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0].point == PixelPoint{0, 0});
    CHECK(peaks[1].point == PixelPoint{14, 14});
  }
}

TEST_CASE("peak rule agrees with an exhaustive neighbourhood oracle") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const ImageSize size{9, 11};
    Heatmap h(size);
    for (double& v : h.values) v = level(rng) / 4.0;
    const auto fgbits = fixture::random_bits(size.pixels(), 0.7, rng);
    const BinaryMask fg = rle_encode(fgbits, size);
    std::vector<Keypoint> expected;
    for (int y = 0; y < size.h; ++y) {
      for (int x = 0; x < size.w; ++x) {
        double m = -1.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (size.contains(x + dx, y + dy)) m = std::max(m, h.at(x + dx, y + dy));
          }
        }
        if (h.at(x, y) == m && h.at(x, y) > 0.007 && fgbits[static_cast<std::size_t>(y) * size.w + x]) {
          expected.push_back({{x, y}, h.at(x, y)});
        }
      }
    }
    std::stable_sort(expected.begin(), expected.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
    if (expected.size() > 30) expected.resize(30);
    const auto got = select_peaks(h, fg);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].point == expected[i].point);
      CHECK(got[i].score == expected[i].score);
    }
  }
}

TEST_CASE("pgm export writes a 16-bit header") {
  Heatmap h({2, 3});
  h.values = {0.0, 0.5, 1.0, 0.25, 0.75, 1.0};
  const auto path = std::filesystem::temp_directory_path() / "uoiskit_test_heat.pgm";
  write_heatmap_pgm(h, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, hh = 0, maxv = 0;
  in >> magic >> w >> hh >> maxv;
  CHECK(magic == "P5");
  CHECK(w == 3);
  CHECK(hh == 2);
  CHECK(maxv == 65535);
  std::filesystem::remove(path);
}
