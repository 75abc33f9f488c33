#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "support.hpp"
#include "uoiskit/proposer.hpp"
#include "uoiskit/rng.hpp"

using namespace uoiskit;

namespace {

OracleConfig noise_free() {
  OracleConfig c;
  c.whole_bias = 0.0;
  c.boundary_noise = 0;
  c.score_noise = 0.0;
  c.token_noise = 0.0;
  return c;
}

// Two rectangles sharing an edge: a large target and a thinner neighbour.
Scene touching_pair(ImageSize size, int w_target, int w_neighbor, int height) {
  const int x0 = 10, y0 = 10;
  return fixture::scene_from(size, {fixture::rect(size, x0, y0, x0 + w_target - 1, y0 + height - 1),
                                    fixture::rect(size, x0 + w_target, y0, x0 + w_target + w_neighbor - 1,
                                                  y0 + height - 1)});
}

int argmax(const std::array<double, kSlotCount>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("noise-free proposal on an isolated instance") {
  const ImageSize size{64, 64};
  const BinaryMask gt = fixture::disk(size, 30.0, 28.0, 12.0);
  const Scene scene = fixture::scene_from(size, {gt});
  const MaskProposal p = propose(scene, {30, 28}, noise_free(), 5);
  CHECK(p.masks[static_cast<int>(Slot::Part)] == gt);
  CHECK(p.base_scores[static_cast<int>(Slot::Part)] == 1.0);
  const auto ious = true_ious(p, scene);
  for (int k = 0; k < kSlotCount; ++k) CHECK(p.base_scores[k] == ious[k]);
  CHECK(argmax(p.base_scores) == argmax(ious));
}

TEST_CASE("proposals are a pure function of their inputs") {
  const Scene scene = generate_scene(SceneConfig{}, 4);
  const OracleConfig cfg;
  const PixelPoint prompt{100, 60};
  CHECK(propose(scene, prompt, cfg, 77) == propose(scene, prompt, cfg, 77));
  CHECK_FALSE(propose(scene, prompt, cfg, 77) == propose(scene, prompt, cfg, 78));
  const OracleProposer oracle(cfg);
  CHECK(oracle.propose(scene, 0, prompt, 77) == propose(scene, prompt, cfg, 77));
}

TEST_CASE("out-of-bounds prompts and bad configs are rejected") {
  const Scene scene = fixture::scene_from({16, 16}, {fixture::rect({16, 16}, 2, 2, 8, 8)});
  CHECK(fixture::error_kind([&] { propose(scene, {16, 3}, OracleConfig{}, 1); }) == ErrorKind::InvalidPrompt);
  CHECK(fixture::error_kind([&] { propose(scene, {-1, 3}, OracleConfig{}, 1); }) == ErrorKind::InvalidPrompt);
  OracleConfig narrow;
  narrow.channels = 10;
  CHECK(fixture::error_kind([&] { narrow.validate(); }) == ErrorKind::ConfigError);
  OracleConfig negative;
  negative.score_noise = -0.1;
  CHECK(fixture::error_kind([&] { OracleProposer{negative}; }) == ErrorKind::ConfigError);
}

TEST_CASE("touching neighbour: whole wins on score, part wins on true IoU") {
  const ImageSize size{60, 80};
  const Scene scene = touching_pair(size, 30, 10, 30);
  const MaskProposal p = propose(scene, {22, 24}, OracleConfig{}, 3);
  const auto ious = true_ious(p, scene);
  CHECK(argmax(p.base_scores) == static_cast<int>(Slot::Whole));
  CHECK(argmax(ious) == static_cast<int>(Slot::Part));
  // whole = target plus neighbour, so its IoU is 900 / 1200
  CHECK(ious[static_cast<int>(Slot::Whole)] == doctest::Approx(0.75));
  CHECK(p.masks[static_cast<int>(Slot::Whole)] == mask_union(scene.instances[0], scene.instances[1]));
}

TEST_CASE("baseline argmax disagrees with the true IoU on most touching fixtures") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> width(20, 36), thin(6, 14), height(20, 36);
  const OracleConfig cfg;
  int disagree = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const int wt = width(rng), h = height(rng);
    const Scene scene = touching_pair({64, 80}, wt, thin(rng), h);
    std::uniform_int_distribution<int> px(10, 10 + wt - 1), py(10, 10 + h - 1);
    const MaskProposal p = propose(scene, {px(rng), py(rng)}, cfg, rng());
    if (argmax(p.base_scores) != argmax(true_ious(p, scene))) ++disagree;
  }
  MESSAGE("disagreement " << disagree << "/" << n);
  CHECK(disagree * 2 >= n);
}

TEST_CASE("subpart contains the prompt and stays inside the instance") {
  OracleConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = generate_scene(SceneConfig{}, seed);
    Rng rng(seed);
    for (std::size_t i = 0; i < scene.instances.size(); ++i) {
      const auto spans = scene.instances[i].spans();
      const std::size_t pix = spans[spans.size() / 2].begin;
      const PixelPoint prompt{static_cast<int>(pix % scene.size().w), static_cast<int>(pix / scene.size().w)};
      const MaskProposal p = propose(scene, prompt, cfg, rng());
      const BinaryMask& sub = p.masks[static_cast<int>(Slot::Subpart)];
      CHECK(sub.contains(prompt));
      CHECK(intersection_area(sub, scene.instances[i]) == mask_area(sub));
    }
  }
}

TEST_CASE("background prompts return non-empty blobs with zero true IoU") {
  const ImageSize size{64, 64};
  const Scene scene = fixture::scene_from(size, {fixture::rect(size, 40, 40, 55, 55)});
  const MaskProposal p = propose(scene, {10, 10}, OracleConfig{}, 9);
  for (int k = 0; k < kSlotCount; ++k) {
    CHECK(mask_area(p.masks[k]) > 0);
    CHECK(p.base_scores[k] >= 0.0);
    CHECK(p.base_scores[k] <= 1.0);
  }
  CHECK(std::max(p.base_scores[0], std::max(p.base_scores[2], p.base_scores[3])) > 0.25);
  for (double v : true_ious(p, scene)) CHECK(v == 0.0);
}

TEST_CASE("token statistics") {
  const ImageSize size{10, 10};
  OracleConfig cfg;
  cfg.channels = 16;
  cfg.token_noise = 0.0;

  const auto empty = synth_tokens(BinaryMask::empty(size), {3, 3}, 0.4, 1, cfg, 1);
  REQUIRE(empty.size() == 16);
  CHECK(empty[0] == 0.0);
  CHECK(empty[11] == 0.0);

  const auto full = synth_tokens(BinaryMask::full(size), {3, 3}, 0.4, 1, cfg, 1);
  CHECK(full[0] == 1.0);
  CHECK(full[1] == 1.0);
  CHECK(full[11] == 1.0);

  // 4 wide, 5 tall block at x 2..5, y 1..5: perimeter 14 of area 20, centroid (3.5, 3)
  const auto t = synth_tokens(fixture::rect(size, 2, 1, 5, 5), {1, 1}, 0.7, 3, cfg, 1);
  CHECK(t[0] == doctest::Approx(0.2));
  CHECK(t[1] == doctest::Approx(std::sqrt(0.2)));
  CHECK(t[2] == doctest::Approx(0.7));
  CHECK(t[3] == doctest::Approx(0.25));
  CHECK(t[4] == doctest::Approx(0.2));
  for (int k = 0; k <= kIouTokenSlot; ++k) CHECK(t[5 + k] == (k == 3 ? 1.0 : 0.0));
  CHECK(t[10] == 0.7);
  CHECK(t[11] == 0.0);
  for (std::size_t i = kTokenStatCount; i < t.size(); ++i) CHECK(t[i] == 0.0);

  cfg.token_noise = 0.5;
  const auto a = synth_tokens(BinaryMask::full(size), {3, 3}, 0.4, 1, cfg, 1);
  const auto b = synth_tokens(BinaryMask::full(size), {3, 3}, 0.4, 1, cfg, 1);
  CHECK(a == b);
  CHECK(a[12] != 0.0);
}

TEST_CASE("recorded proposals replay bit-exactly") {
  const Scene scene = generate_scene(SceneConfig{}, 12);
  const OracleProposer oracle{OracleConfig{}};
  const RecordingProposer recorder(oracle);
  const std::vector<PixelPoint> prompts{{5, 5}, {120, 80}, {200, 150}};
  std::vector<MaskProposal> first;
  for (std::size_t i = 0; i < prompts.size(); ++i) first.push_back(recorder.propose(scene, 2, prompts[i], 40 + i));
  const auto path = std::filesystem::temp_directory_path() / "uoiskit_test_proposals.json";
  recorder.write(path);

  const ReplayProposer replay(path);
  CHECK(replay.size() == prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(replay.propose(scene, 2, prompts[i], 0) == first[i]);
  CHECK(fixture::error_kind([&] { replay.propose(scene, 3, prompts[0], 0); }) == ErrorKind::DatasetError);
  std::filesystem::remove(path);

  CHECK(proposal_from_json(proposal_to_json(first[0])) == first[0]);
  CHECK(fixture::error_kind([] { proposal_from_json(nlohmann::json{{"prompt", {1, 2}}}); }) ==
        ErrorKind::DatasetError);
}

TEST_CASE("oracle config json round trip") {
  OracleConfig c;
  c.whole_bias = 0.45;
  c.channels = 64;
  const OracleConfig back = oracle_config_from_json(to_json(c));
  CHECK(back.whole_bias == 0.45);
  CHECK(back.channels == 64);
  CHECK(back.score_noise == c.score_noise);
}
