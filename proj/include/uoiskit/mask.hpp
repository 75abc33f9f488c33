#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace uoiskit {

/// Image grid dimensions. Both dimensions must be at least one pixel.
struct ImageSize {
  int h = 1;
  int w = 1;

  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < w && y < h; }
  void validate() const;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Integer pixel coordinate; x is the column and y the row, origin top-left.
struct PixelPoint {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const PixelPoint&, const PixelPoint&) = default;
};

/// Sub-pixel location (x = column, y = row).
struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

/// Inclusive pixel bounding box.
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
};

/// Half-open range [begin, end) of row-major pixel indices that are set.
struct PixelSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Run-length encoded binary mask.
///
/// Runs follow a row-major scan and alternate zeros-run, ones-run, ...; the
/// first run always counts zeros and may be 0. Stored runs are canonical: no
/// zero-length run appears except the leading one, so two masks compare equal
/// exactly when their pixels do.
class BinaryMask {
 public:
  /// 1x1 empty mask.
  BinaryMask();

  static BinaryMask empty(ImageSize size);
  static BinaryMask full(ImageSize size);
  /// Throws CorruptMask when the runs do not sum to h*w.
  static BinaryMask from_runs(ImageSize size, std::vector<std::uint32_t> runs);

  ImageSize size() const noexcept { return size_; }
  const std::vector<std::uint32_t>& runs() const noexcept { return runs_; }

  bool contains(PixelPoint p) const noexcept;
  std::vector<PixelSpan> spans() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  BinaryMask(ImageSize size, std::vector<std::uint32_t> runs);

  ImageSize size_;
  std::vector<std::uint32_t> runs_;
};

/// Uncompressed row-major mask, convenient for per-pixel construction.
struct DenseMask {
  ImageSize size;
  std::vector<std::uint8_t> bits;

  DenseMask() = default;
  explicit DenseMask(ImageSize s) : size(s), bits(s.pixels(), 0) {}

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * size.w + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * size.w + x]; }
};

BinaryMask rle_encode(std::span<const std::uint8_t> dense, ImageSize size);
BinaryMask rle_encode(const DenseMask& dense);
std::vector<std::uint8_t> rle_decode(const BinaryMask& mask);
DenseMask to_dense(const BinaryMask& mask);

std::size_t mask_area(const BinaryMask& mask);
std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

/// |a ∩ b| / |a ∪ b|. Two empty masks have IoU 1; empty vs nonempty has IoU 0.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// First-order image moments (m10/m00, m01/m00). Throws EmptyMask.
Centroid mask_centroid(const BinaryMask& mask);

std::optional<BoundingBox> mask_bbox(const BinaryMask& mask);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_complement(const BinaryMask& mask);

/// Pixels of the mask with at least one 4-neighbour outside it; the image
/// border counts as outside.
DenseMask boundary_pixels(const DenseMask& mask);

/// Dilation by a Euclidean disk of the given radius (dx²+dy² <= r²).
DenseMask dilate_disk(const DenseMask& mask, int radius);

}  // namespace uoiskit
