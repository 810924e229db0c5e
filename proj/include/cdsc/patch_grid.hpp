#pragma once

#include <cdsc/common.hpp>

#include <filesystem>
#include <vector>

namespace cdsc {

/// Grayscale image, intensities nominally in [0, 255], stored as doubles.
/// Pixel (row, col) lives at pixels()(row, col).
class Image {
 public:
  Image() = default;
  Image(Index width, Index height, double fill = 0.0);
  explicit Image(Matrix pixels);

  Index width() const { return pixels_.cols(); }
  Index height() const { return pixels_.rows(); }
  bool empty() const { return pixels_.size() == 0; }

  double operator()(Index row, Index col) const { return pixels_(row, col); }
  double& operator()(Index row, Index col) { return pixels_(row, col); }

  const Matrix& pixels() const { return pixels_; }
  Matrix& pixels() { return pixels_; }

  bool operator==(const Image& other) const;

 private:
  Matrix pixels_;
};

struct PatchAnchor {
  Index row = 0;
  Index col = 0;
  bool operator==(const PatchAnchor&) const = default;
};

/// Square patches cut from an image on a regular anchor grid.
/// Column k of `patches` is the patch at `positions[k]`, columnized row-major
/// within the patch: entry r * side + c holds pixel (row + r, col + c).
struct PatchDecomposition {
  Matrix patches;
  std::vector<PatchAnchor> positions;
  Index side = 5;
  Index stride = 1;
  Index width = 0;
  Index height = 0;

  Index size() const { return static_cast<Index>(positions.size()); }
  Index dim() const { return side * side; }
};

/// Number of anchors along one axis: floor((extent - side) / stride) + 1.
Index patch_count_along(Index extent, Index side, Index stride);

/// Cuts every side x side patch whose anchor lies on the stride grid.
/// Anchors are emitted in row-major scan order.
PatchDecomposition extract_patches(const Image& image, Index side = 5, Index stride = 1);

/// Copies one patch (row-major columnized) out of an image.
Vector patch_at(const Image& image, Index row, Index col, Index side);

/// Averages overlapping patch estimates back into an image. Pixels covered
/// by identical values keep that value exactly. Every pixel must be covered.
Image reconstruct_overlap(const PatchDecomposition& layout, const Matrix& patches);

/// Adds i.i.d. N(0, sigma^2) noise. No clipping.
Image add_gaussian_noise(const Image& image, double sigma, std::uint64_t seed);

/// 10 log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const Image& reference, const Image& test);

double mean_squared_error(const Image& reference, const Image& test);

// --- I/O -------------------------------------------------------------------

/// Reads 8-bit PGM (P2/P5) or PNG. Color PNGs are converted to Rec. 601 luma.
Image read_image(const std::filesystem::path& path);

/// Writes 8-bit PGM or PNG, chosen by extension. Values are rounded and
/// clipped to [0, 255] at this point only.
void write_image(const Image& image, const std::filesystem::path& path);

/// Rounds and clips to the 8-bit range, the same quantization write_image uses.
Image quantize_8bit(const Image& image);

}  // namespace cdsc
