#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uoiskit/mask.hpp"

namespace uoiskit {

/// 8-bit interleaved RGB image, row-major.
struct RgbImage {
  ImageSize size;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  explicit RgbImage(ImageSize s) : size(s), data(s.pixels() * 3, 0) {}

  std::uint8_t* px(int x, int y) { return &data[(static_cast<std::size_t>(y) * size.w + x) * 3]; }
  const std::uint8_t* px(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * size.w + x) * 3];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// A generated tabletop scene. Instances are the visible (modal) masks, pairwise
/// disjoint; the foreground is their union.
struct Scene {
  RgbImage image;
  std::vector<BinaryMask> instances;
  BinaryMask foreground;

  ImageSize size() const noexcept { return image.size; }

  /// Index of the instance covering p, if any.
  std::optional<std::size_t> instance_at(PixelPoint p) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Builds a scene from an image and instance masks, deriving the foreground.
Scene make_scene(RgbImage image, std::vector<BinaryMask> instances);

struct ShapePalette {
  bool ellipse = true;
  bool rectangle = true;
  bool polygon = true;
};

struct SceneConfig {
  ImageSize size{336, 448};
  int min_objects = 4;
  int max_objects = 11;
  ShapePalette shapes;
  /// Object radius range as a fraction of min(h, w).
  double min_radius_frac = 0.06;
  double max_radius_frac = 0.13;
  /// Peak intensity amplitude of stripe/speckle texture on objects, in 8-bit levels.
  double texture_amplitude = 24.0;
  /// Fraction of objects that carry texture.
  double texture_probability = 0.5;
  /// Probability that an object is placed to overlap an existing one.
  double occlusion_probability = 0.35;
  /// Per-pixel background noise amplitude, in 8-bit levels.
  double clutter_amplitude = 10.0;
  /// Minimum visible pixels an instance must keep after occlusion.
  int min_visible_pixels = 12;

  void validate() const;
};

Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Scene i of a dataset is generated from derive_seed(global_seed, i).
std::vector<Scene> generate_scenes(const SceneConfig& config, std::uint64_t global_seed,
                                   int count, int jobs = 1);

}  // namespace uoiskit
