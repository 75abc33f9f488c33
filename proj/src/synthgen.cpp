#include "uoiskit/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "uoiskit/error.hpp"
#include "uoiskit/parallel.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

namespace {

enum class ShapeKind { Ellipse, Rectangle, Polygon };

enum class TextureKind { None, Stripes, Speckle };

struct ObjectStyle {
  std::array<double, 3> color{};
  TextureKind texture = TextureKind::None;
  double stripe_period = 6.0;
  double stripe_angle = 0.0;
};

std::array<double, 3> hsv_to_rgb(double hue, double sat, double val) {
  const double c = val * sat;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = val - c;
  for (double& v : rgb) v = (v + m) * 255.0;
  return rgb;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Pixel indices covered by one shape, clipped to the image.
std::vector<std::size_t> rasterize(ShapeKind kind, double cx, double cy, double r, Rng& rng,
                                   ImageSize size) {
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double minor = r * uniform(rng, 0.5, 1.0);
  std::vector<std::pair<double, double>> poly;
  if (kind == ShapeKind::Polygon) {
    const int n = uniform_int(rng, 5, 8);
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (double& a : angles) a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) poly.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
  }

  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
  const int x1 = std::min(size.w - 1, static_cast<int>(std::ceil(cx + r + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
  const int y1 = std::min(size.h - 1, static_cast<int>(std::ceil(cy + r + 1)));

  std::vector<std::size_t> pixels;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = dx * ca + dy * sa;
      const double v = -dx * sa + dy * ca;
      bool inside = false;
      switch (kind) {
        case ShapeKind::Ellipse:
          inside = (u * u) / (r * r) + (v * v) / (minor * minor) <= 1.0;
          break;
        case ShapeKind::Rectangle:
          inside = std::abs(u) <= r * 0.85 && std::abs(v) <= minor * 0.85;
          break;
        case ShapeKind::Polygon: {
          inside = poly.size() >= 3;
          for (std::size_t i = 0; i < poly.size() && inside; ++i) {
            const auto& [ax, ay] = poly[i];
            const auto& [bx, by] = poly[(i + 1) % poly.size()];
            if ((bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0.0) inside = false;
          }
          break;
        }
      }
      if (inside) pixels.push_back(static_cast<std::size_t>(y) * size.w + x);
    }
  }
  return pixels;
}

}  // namespace

std::optional<std::size_t> Scene::instance_at(PixelPoint p) const {
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].contains(p)) return i;
  }
  return std::nullopt;
}

Scene make_scene(RgbImage image, std::vector<BinaryMask> instances) {
  BinaryMask fg = BinaryMask::empty(image.size);
  for (const BinaryMask& m : instances) {
    if (m.size() != image.size) fail(ErrorKind::InvalidDimensions, "instance mask size differs from image");
    fg = mask_union(fg, m);
  }
  return Scene{std::move(image), std::move(instances), std::move(fg)};
}

void SceneConfig::validate() const {
  size.validate();
  if (min_objects < 1 || max_objects < min_objects) {
    fail(ErrorKind::ConfigError, "object count range must satisfy 1 <= min <= max, got [" +
                                     std::to_string(min_objects) + "," + std::to_string(max_objects) + "]");
  }
  if (!(shapes.ellipse || shapes.rectangle || shapes.polygon)) {
    fail(ErrorKind::ConfigError, "shape palette is empty");
  }
  if (!(min_radius_frac > 0.0) || max_radius_frac < min_radius_frac) {
    fail(ErrorKind::ConfigError, "radius fractions must satisfy 0 < min <= max");
  }
  if (texture_amplitude < 0.0 || clutter_amplitude < 0.0) {
    fail(ErrorKind::ConfigError, "texture and clutter amplitudes must be non-negative");
  }
  if (occlusion_probability < 0.0 || occlusion_probability > 1.0 || texture_probability < 0.0 ||
      texture_probability > 1.0) {
    fail(ErrorKind::ConfigError, "probabilities must lie in [0, 1]");
  }
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const ImageSize size = config.size;
  const int h = size.h, w = size.w;

  // Low-saturation tabletop colour.
  const double bg_level = uniform(rng, 110.0, 170.0);
  std::array<double, 3> bg_color{};
  for (double& c : bg_color) c = bg_level + uniform(rng, -12.0, 12.0);
  const double grain_period = uniform(rng, 20.0, 40.0);

  std::vector<ShapeKind> kinds;
  if (config.shapes.ellipse) kinds.push_back(ShapeKind::Ellipse);
  if (config.shapes.rectangle) kinds.push_back(ShapeKind::Rectangle);
  if (config.shapes.polygon) kinds.push_back(ShapeKind::Polygon);

  const int target = uniform_int(rng, config.min_objects, config.max_objects);
  const double min_side = std::min(h, w);

  std::vector<int> label(size.pixels(), -1);
  std::vector<int> visible;
  std::vector<std::array<double, 3>> placed_at;  // cx, cy, r
  std::vector<ObjectStyle> styles;

  const int max_attempts = 60 * target;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(visible.size()) < target; ++attempt) {
    const ShapeKind kind = kinds[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(kinds.size()) - 1))];
    const double r = uniform(rng, config.min_radius_frac, config.max_radius_frac) * min_side;
    const bool occlude = !visible.empty() && uniform(rng, 0.0, 1.0) < config.occlusion_probability;
    double cx = 0.0, cy = 0.0;
    if (occlude) {
      const auto& other = placed_at[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(placed_at.size()) - 1))];
      const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double dist = uniform(rng, 0.6, 1.0) * (r + other[2]);
      cx = other[0] + dist * std::cos(theta);
      cy = other[1] + dist * std::sin(theta);
    } else {
      cx = uniform(rng, 0.5 * r, w - 1 - 0.5 * r);
      cy = uniform(rng, 0.5 * r, h - 1 - 0.5 * r);
    }
    const std::vector<std::size_t> pixels = rasterize(kind, cx, cy, r, rng, size);
    if (static_cast<int>(pixels.size()) < config.min_visible_pixels) continue;

    std::vector<int> lost(visible.size(), 0);
    bool overlaps = false;
    for (std::size_t p : pixels) {
      if (label[p] >= 0) {
        overlaps = true;
        ++lost[static_cast<std::size_t>(label[p])];
      }
    }
    if (overlaps && !occlude) continue;
    bool acceptable = true;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      const int remaining = visible[i] - lost[i];
      if (lost[i] > 0 && (remaining < config.min_visible_pixels || remaining * 5 < visible[i] * 2)) {
        acceptable = false;
        break;
      }
    }
    if (!acceptable) continue;

    const int id = static_cast<int>(visible.size());
    for (std::size_t i = 0; i < visible.size(); ++i) visible[i] -= lost[i];
    for (std::size_t p : pixels) label[p] = id;
    visible.push_back(static_cast<int>(pixels.size()));
    placed_at.push_back({cx, cy, r});

    ObjectStyle style;
    style.color = hsv_to_rgb(uniform(rng, 0.0, 360.0), uniform(rng, 0.55, 1.0), uniform(rng, 0.5, 1.0));
    if (uniform(rng, 0.0, 1.0) < config.texture_probability) {
      style.texture = uniform(rng, 0.0, 1.0) < 0.5 ? TextureKind::Stripes : TextureKind::Speckle;
      style.stripe_period = uniform(rng, 4.0, 10.0);
      style.stripe_angle = uniform(rng, 0.0, std::numbers::pi);
    }
    styles.push_back(style);
  }

  if (static_cast<int>(visible.size()) < config.min_objects) {
    fail(ErrorKind::PlacementFailure, "placed " + std::to_string(visible.size()) + " of at least " +
                                          std::to_string(config.min_objects) + " objects on a " +
                                          std::to_string(h) + "x" + std::to_string(w) + " image");
  }

  RgbImage image(size);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      std::uint8_t* out = image.px(x, y);
      const int l = label[p];
      if (l < 0) {
        const double grain = 0.5 * config.clutter_amplitude * std::sin(2.0 * std::numbers::pi * (x + 0.3 * y) / grain_period);
        for (int c = 0; c < 3; ++c) {
          out[c] = to_u8(bg_color[static_cast<std::size_t>(c)] + grain +
                         uniform(rng, -config.clutter_amplitude, config.clutter_amplitude));
        }
        continue;
      }
      const ObjectStyle& s = styles[static_cast<std::size_t>(l)];
      double tex = 0.0;
      if (s.texture == TextureKind::Stripes) {
        const double t = x * std::cos(s.stripe_angle) + y * std::sin(s.stripe_angle);
        tex = config.texture_amplitude * std::sin(2.0 * std::numbers::pi * t / s.stripe_period);
      } else if (s.texture == TextureKind::Speckle) {
        tex = uniform(rng, -config.texture_amplitude, config.texture_amplitude);
      }
      for (int c = 0; c < 3; ++c) out[c] = to_u8(s.color[static_cast<std::size_t>(c)] + tex);
    }
  }

  std::vector<BinaryMask> instances;
  instances.reserve(visible.size());
  for (std::size_t i = 0; i < visible.size(); ++i) {
    std::vector<std::uint8_t> bits(size.pixels(), 0);
    for (std::size_t p = 0; p < label.size(); ++p) bits[p] = label[p] == static_cast<int>(i);
    instances.push_back(rle_encode(bits, size));
  }
  return make_scene(std::move(image), std::move(instances));
}

std::vector<Scene> generate_scenes(const SceneConfig& config, std::uint64_t global_seed, int count,
                                   int jobs) {
  std::vector<Scene> scenes(static_cast<std::size_t>(std::max(count, 0)));
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    scenes[i] = generate_scene(config, derive_seed(global_seed, i));
  });
  return scenes;
}

}  // namespace uoiskit
