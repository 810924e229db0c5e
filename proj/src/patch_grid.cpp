#include <cdsc/patch_grid.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cdsc {

Image::Image(Index width, Index height, double fill) : pixels_(Matrix::Constant(height, width, fill)) {
  if (width < 0 || height < 0) throw DimensionError("negative image dimensions");
}

Image::Image(Matrix pixels) : pixels_(std::move(pixels)) {
  if (!pixels_.allFinite()) throw InvalidArgument("image contains non-finite pixels");
}

bool Image::operator==(const Image& other) const {
  return pixels_.rows() == other.pixels_.rows() && pixels_.cols() == other.pixels_.cols() &&
         pixels_ == other.pixels_;
}

Index patch_count_along(Index extent, Index side, Index stride) {
  if (side < 1 || stride < 1) throw InvalidArgument("patch side and stride must be >= 1");
  if (extent < side) return 0;
  return (extent - side) / stride + 1;
}

Vector patch_at(const Image& image, Index row, Index col, Index side) {
  Vector v(side * side);
  for (Index r = 0; r < side; ++r)
    for (Index c = 0; c < side; ++c) v(r * side + c) = image(row + r, col + c);
  return v;
}

PatchDecomposition extract_patches(const Image& image, Index side, Index stride) {
  if (side < 1 || stride < 1) throw InvalidArgument("patch side and stride must be >= 1");
  if (image.width() < side || image.height() < side)
    throw DimensionError("image " + std::to_string(image.width()) + "x" +
                         std::to_string(image.height()) + " is smaller than patch side " +
                         std::to_string(side));
  const Index rows = patch_count_along(image.height(), side, stride);
  const Index cols = patch_count_along(image.width(), side, stride);

  PatchDecomposition dec;
  dec.side = side;
  dec.stride = stride;
  dec.width = image.width();
  dec.height = image.height();
  dec.patches.resize(side * side, rows * cols);
  dec.positions.reserve(static_cast<std::size_t>(rows * cols));
  Index k = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j, ++k) {
      const PatchAnchor a{i * stride, j * stride};
      dec.positions.push_back(a);
      dec.patches.col(k) = patch_at(image, a.row, a.col, side);
    }
  }
  return dec;
}

Image reconstruct_overlap(const PatchDecomposition& layout, const Matrix& patches) {
  const Index side = layout.side;
  if (patches.cols() != layout.size())
    throw DimensionError("patch count " + std::to_string(patches.cols()) +
                         " does not match layout size " + std::to_string(layout.size()));
  if (patches.rows() != side * side) throw DimensionError("patch dimension does not match layout side");

  Matrix sum = Matrix::Zero(layout.height, layout.width);
  Matrix lo = Matrix::Constant(layout.height, layout.width, std::numeric_limits<double>::infinity());
  Matrix hi = Matrix::Constant(layout.height, layout.width, -std::numeric_limits<double>::infinity());
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(layout.height, layout.width);

  for (Index k = 0; k < layout.size(); ++k) {
    const PatchAnchor a = layout.positions[static_cast<std::size_t>(k)];
    if (a.row < 0 || a.col < 0 || a.row + side > layout.height || a.col + side > layout.width)
      throw DimensionError("patch anchor outside the image");
    for (Index r = 0; r < side; ++r) {
      for (Index c = 0; c < side; ++c) {
        const double v = patches(r * side + c, k);
        const Index y = a.row + r, x = a.col + c;
        sum(y, x) += v;
        lo(y, x) = std::min(lo(y, x), v);
        hi(y, x) = std::max(hi(y, x), v);
        ++count(y, x);
      }
    }
  }

  Matrix out(layout.height, layout.width);
  for (Index x = 0; x < layout.width; ++x) {
    for (Index y = 0; y < layout.height; ++y) {
      if (count(y, x) == 0)
        throw DimensionError("patch grid leaves pixel (" + std::to_string(y) + ", " +
                             std::to_string(x) + ") uncovered");
      // Agreeing estimates are returned exactly; summing then dividing can round.
      out(y, x) = lo(y, x) == hi(y, x) ? lo(y, x) : sum(y, x) / count(y, x);
    }
  }
  return Image(std::move(out));
}

Image add_gaussian_noise(const Image& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
  Image out = image;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  // Row-major draw order so the noise field does not depend on storage order.
  for (Index y = 0; y < out.height(); ++y)
    for (Index x = 0; x < out.width(); ++x) out(y, x) += noise(rng);
  return out;
}

double mean_squared_error(const Image& reference, const Image& test) {
  if (reference.width() != test.width() || reference.height() != test.height())
    throw DimensionError("image dimensions differ");
  if (reference.empty()) throw DimensionError("empty image");
  return (reference.pixels() - test.pixels()).squaredNorm() /
         static_cast<double>(reference.pixels().size());
}

double psnr(const Image& reference, const Image& test) {
  const double mse = mean_squared_error(reference, test);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Image quantize_8bit(const Image& image) {
  Matrix q = image.pixels().unaryExpr([](double v) { return std::clamp(std::round(v), 0.0, 255.0); });
  return Image(std::move(q));
}

}  // namespace cdsc
