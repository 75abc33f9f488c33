#include "uoiskit/mask.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "uoiskit/error.hpp"

namespace uoiskit {

namespace {

std::vector<std::uint32_t> canonical_runs(const std::vector<std::uint32_t>& runs) {
  std::vector<std::uint32_t> out;
  out.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::uint32_t r = runs[i];
    if (out.empty()) {
      out.push_back(r);
      continue;
    }
    // Parity of the input run relative to the last emitted run decides whether
    // it extends that run or starts a new one.
    const bool same_parity = (i % 2) == ((out.size() - 1) % 2);
    if (same_parity) {
      out.back() += r;
    } else if (r != 0) {
      out.push_back(r);
    }
  }
  if (out.empty()) out.push_back(0);
  return out;
}

template <typename Fn>
void for_each_row_segment(const BinaryMask& mask, Fn&& fn) {
  const auto w = static_cast<std::size_t>(mask.size().w);
  for (const PixelSpan& s : mask.spans()) {
    std::size_t i = s.begin;
    while (i < s.end) {
      const std::size_t y = i / w;
      const std::size_t row_end = std::min(s.end, (y + 1) * w);
      fn(static_cast<int>(y), static_cast<int>(i - y * w), static_cast<int>(row_end - 1 - y * w));
      i = row_end;
    }
  }
}

BinaryMask from_spans(ImageSize size, const std::vector<PixelSpan>& spans) {
  std::vector<std::uint32_t> runs;
  std::size_t cursor = 0;
  for (const PixelSpan& s : spans) {
    if (s.end <= s.begin) continue;
    if (!runs.empty() && runs.size() % 2 == 0 && s.begin == cursor) {
      runs.back() += static_cast<std::uint32_t>(s.end - s.begin);
    } else {
      runs.push_back(static_cast<std::uint32_t>(s.begin - cursor));
      runs.push_back(static_cast<std::uint32_t>(s.end - s.begin));
    }
    cursor = s.end;
  }
  if (cursor < size.pixels() || runs.empty()) runs.push_back(static_cast<std::uint32_t>(size.pixels() - cursor));
  return BinaryMask::from_runs(size, std::move(runs));
}

void require_same_size(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.size() != b.size()) {
    fail(ErrorKind::InvalidDimensions,
         std::string(what) + ": mask sizes differ (" + std::to_string(a.size().h) + "x" +
             std::to_string(a.size().w) + " vs " + std::to_string(b.size().h) + "x" +
             std::to_string(b.size().w) + ")");
  }
}

}  // namespace

void ImageSize::validate() const {
  if (h < 1 || w < 1) {
    fail(ErrorKind::InvalidDimensions,
         "image size must be at least 1x1, got " + std::to_string(h) + "x" + std::to_string(w));
  }
}

BinaryMask::BinaryMask() : size_{1, 1}, runs_{1} {}

BinaryMask::BinaryMask(ImageSize size, std::vector<std::uint32_t> runs)
    : size_(size), runs_(std::move(runs)) {}

BinaryMask BinaryMask::empty(ImageSize size) {
  size.validate();
  return BinaryMask(size, {static_cast<std::uint32_t>(size.pixels())});
}

BinaryMask BinaryMask::full(ImageSize size) {
  size.validate();
  return BinaryMask(size, {0, static_cast<std::uint32_t>(size.pixels())});
}

BinaryMask BinaryMask::from_runs(ImageSize size, std::vector<std::uint32_t> runs) {
  size.validate();
  const std::uint64_t total = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
  if (total != size.pixels()) {
    fail(ErrorKind::CorruptMask, "runs sum to " + std::to_string(total) + " but grid has " +
                                     std::to_string(size.pixels()) + " pixels");
  }
  return BinaryMask(size, canonical_runs(runs));
}

bool BinaryMask::contains(PixelPoint p) const noexcept {
  if (!size_.contains(p.x, p.y)) return false;
  const std::size_t idx = static_cast<std::size_t>(p.y) * size_.w + p.x;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    cursor += runs_[i];
    if (idx < cursor) return i % 2 == 1;
  }
  return false;
}

std::vector<PixelSpan> BinaryMask::spans() const {
  std::vector<PixelSpan> out;
  out.reserve(runs_.size() / 2);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    if (i % 2 == 1) out.push_back({cursor, cursor + runs_[i]});
    cursor += runs_[i];
  }
  return out;
}

BinaryMask rle_encode(std::span<const std::uint8_t> dense, ImageSize size) {
  size.validate();
  if (dense.size() != size.pixels()) {
    fail(ErrorKind::InvalidDimensions, "dense length " + std::to_string(dense.size()) +
                                           " does not match " + std::to_string(size.pixels()) +
                                           " pixels");
  }
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t count = 0;
  for (std::uint8_t v : dense) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit != current) {
      runs.push_back(count);
      current = bit;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return BinaryMask::from_runs(size, std::move(runs));
}

BinaryMask rle_encode(const DenseMask& dense) { return rle_encode(dense.bits, dense.size); }

std::vector<std::uint8_t> rle_decode(const BinaryMask& mask) {
  std::vector<std::uint8_t> out(mask.size().pixels(), 0);
  for (const PixelSpan& s : mask.spans()) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(s.begin),
              out.begin() + static_cast<std::ptrdiff_t>(s.end), std::uint8_t{1});
  }
  return out;
}

DenseMask to_dense(const BinaryMask& mask) {
  DenseMask d;
  d.size = mask.size();
  d.bits = rle_decode(mask);
  return d;
}

std::size_t mask_area(const BinaryMask& mask) {
  std::size_t area = 0;
  const auto& runs = mask.runs();
  for (std::size_t i = 1; i < runs.size(); i += 2) area += runs[i];
  return area;
}

std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "intersection_area");
  const auto sa = a.spans();
  const auto sb = b.spans();
  std::size_t i = 0, j = 0, total = 0;
  while (i < sa.size() && j < sb.size()) {
    const std::size_t lo = std::max(sa[i].begin, sb[j].begin);
    const std::size_t hi = std::min(sa[i].end, sb[j].end);
    if (hi > lo) total += hi - lo;
    if (sa[i].end < sb[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "mask_iou");
  const std::size_t inter = intersection_area(a, b);
  const std::size_t uni = mask_area(a) + mask_area(b) - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Centroid mask_centroid(const BinaryMask& mask) {
  double m00 = 0.0, m10 = 0.0, m01 = 0.0;
  for_each_row_segment(mask, [&](int y, int x0, int x1) {
    const double n = static_cast<double>(x1 - x0 + 1);
    m00 += n;
    m10 += n * (static_cast<double>(x0) + static_cast<double>(x1)) / 2.0;
    m01 += n * static_cast<double>(y);
  });
  if (m00 == 0.0) fail(ErrorKind::EmptyMask, "centroid of an empty mask is undefined");
  return {m10 / m00, m01 / m00};
}

std::optional<BoundingBox> mask_bbox(const BinaryMask& mask) {
  std::optional<BoundingBox> box;
  for_each_row_segment(mask, [&](int y, int x0, int x1) {
    if (!box) {
      box = BoundingBox{x0, y, x1, y};
      return;
    }
    box->x0 = std::min(box->x0, x0);
    box->x1 = std::max(box->x1, x1);
    box->y0 = std::min(box->y0, y);
    box->y1 = std::max(box->y1, y);
  });
  return box;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "mask_union");
  auto sa = a.spans();
  const auto sb = b.spans();
  sa.insert(sa.end(), sb.begin(), sb.end());
  std::sort(sa.begin(), sa.end(), [](const PixelSpan& l, const PixelSpan& r) { return l.begin < r.begin; });
  std::vector<PixelSpan> merged;
  for (const PixelSpan& s : sa) {
    if (!merged.empty() && s.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return from_spans(a.size(), merged);
}

BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "mask_intersection");
  const auto sa = a.spans();
  const auto sb = b.spans();
  std::vector<PixelSpan> out;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const std::size_t lo = std::max(sa[i].begin, sb[j].begin);
    const std::size_t hi = std::min(sa[i].end, sb[j].end);
    if (hi > lo) out.push_back({lo, hi});
    if (sa[i].end < sb[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return from_spans(a.size(), out);
}

BinaryMask mask_complement(const BinaryMask& mask) {
  std::vector<std::uint32_t> runs = mask.runs();
  if (runs.front() == 0) {
    runs.erase(runs.begin());
  } else {
    runs.insert(runs.begin(), 0);
  }
  return BinaryMask::from_runs(mask.size(), std::move(runs));
}

DenseMask boundary_pixels(const DenseMask& mask) {
  DenseMask out(mask.size);
  const int h = mask.size.h, w = mask.size.w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask.at(x - 1, y) ||
                        !mask.at(x + 1, y) || !mask.at(x, y - 1) || !mask.at(x, y + 1);
      if (edge) out.at(x, y) = 1;
    }
  }
  return out;
}

DenseMask dilate_disk(const DenseMask& mask, int radius) {
  if (radius <= 0) return mask;
  std::vector<PixelPoint> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
    }
  }
  DenseMask out(mask.size);
  const int h = mask.size.h, w = mask.size.w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      for (const PixelPoint& o : offsets) {
        const int nx = x + o.x, ny = y + o.y;
        if (nx >= 0 && ny >= 0 && nx < w && ny < h) out.at(nx, ny) = 1;
      }
    }
  }
  return out;
}

}  // namespace uoiskit
