#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "uoiskit/error.hpp"
#include "uoiskit/mask.hpp"
#include "uoiskit/synthgen.hpp"

namespace fixture {

using uoiskit::BinaryMask;
using uoiskit::ImageSize;

inline BinaryMask from_predicate(ImageSize size, const std::function<bool(int, int)>& inside) {
  std::vector<std::uint8_t> bits(size.pixels(), 0);
  for (int y = 0; y < size.h; ++y) {
    for (int x = 0; x < size.w; ++x) bits[static_cast<std::size_t>(y) * size.w + x] = inside(x, y) ? 1 : 0;
  }
  return uoiskit::rle_encode(bits, size);
}

inline BinaryMask disk(ImageSize size, double cx, double cy, double r) {
  return from_predicate(size, [=](int x, int y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; });
}

/// Inclusive rectangle [x0, x1] x [y0, y1].
inline BinaryMask rect(ImageSize size, int x0, int y0, int x1, int y1) {
  return from_predicate(size, [=](int x, int y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; });
}

inline std::vector<std::uint8_t> random_bits(std::size_t n, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return bits;
}

inline std::size_t count(const std::vector<std::uint8_t>& bits) {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

/// Solid-colour scene from instance masks (grey background).
inline uoiskit::Scene scene_from(ImageSize size, std::vector<BinaryMask> instances) {
  uoiskit::RgbImage image(size);
  for (std::size_t p = 0; p < size.pixels(); ++p) {
    image.data[3 * p] = image.data[3 * p + 1] = image.data[3 * p + 2] = 128;
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (const auto& s : instances[i].spans()) {
      for (std::size_t p = s.begin; p < s.end; ++p) {
        image.data[3 * p] = static_cast<std::uint8_t>(40 + 50 * (i % 4));
        image.data[3 * p + 1] = static_cast<std::uint8_t>(220 - 30 * (i % 5));
        image.data[3 * p + 2] = 30;
      }
    }
  }
  return uoiskit::make_scene(std::move(image), std::move(instances));
}

template <typename Fn>
uoiskit::ErrorKind error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const uoiskit::Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected a uoiskit::Error");
}

}  // namespace fixture
