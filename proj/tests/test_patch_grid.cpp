#include "oracles.hpp"

#include <cdsc/patch_grid.hpp>

#include <doctest.h>

#include <filesystem>

using namespace cdsc;

namespace {

Image random_image(std::mt19937_64& rng, Index w, Index h) {
  Image img(w, h);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) img(r, c) = oracle::uniform(rng, 0.0, 255.0);
  return img;
}

}  // namespace

TEST_CASE("extract_patches: counts and anchors") {
  const Image five(5, 5, 1.0);
  const auto one = extract_patches(five, 5, 1);
  CHECK(one.size() == 1);
  CHECK(one.positions[0] == PatchAnchor{0, 0});

  const auto four = extract_patches(Image(6, 6), 5, 1);
  REQUIRE(four.size() == 4);
  CHECK(four.positions[0] == PatchAnchor{0, 0});
  CHECK(four.positions[1] == PatchAnchor{0, 1});
  CHECK(four.positions[2] == PatchAnchor{1, 0});
  CHECK(four.positions[3] == PatchAnchor{1, 1});

  Index counted = 0;
  for (Index r = 0; r + 5 <= 256; ++r)
    for (Index c = 0; c + 5 <= 256; ++c) ++counted;
  CHECK(extract_patches(Image(256, 256), 5, 1).size() == counted);
  CHECK(counted == 63504);
}

TEST_CASE("extract_patches: count formula over a sweep") {
  for (Index h = 3; h <= 11; ++h)
    for (Index w = 3; w <= 11; ++w)
      for (Index side = 1; side <= 3; ++side)
        for (Index stride = 1; stride <= 4; ++stride) {
          Index counted = 0;
          for (Index r = 0; r + side <= h; r += stride)
            for (Index c = 0; c + side <= w; c += stride) ++counted;
          CHECK(extract_patches(Image(w, h), side, stride).size() == counted);
        }
}

TEST_CASE("extract_patches: row-major columnization") {
  Image img(7, 6);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 7; ++c) img(r, c) = 100.0 * r + c;
  const auto dec = extract_patches(img, 3, 2);
  for (Index k = 0; k < dec.size(); ++k) {
    const auto a = dec.positions[static_cast<std::size_t>(k)];
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c) CHECK(dec.patches(r * 3 + c, k) == img(a.row + r, a.col + c));
  }
  CHECK_THROWS_AS(extract_patches(Image(4, 4), 5, 1), DimensionError);
}

TEST_CASE("reconstruct_overlap: identity and averaging") {
  std::mt19937_64 rng(1);
  const Image img = random_image(rng, 32, 32);
  const auto dec = extract_patches(img, 5, 1);
  CHECK(reconstruct_overlap(dec, dec.patches) == img);

  const auto single = extract_patches(random_image(rng, 5, 5), 5, 1);
  CHECK(reconstruct_overlap(single, single.patches).pixels() == single.patches.reshaped(5, 5).transpose());

  // Two 2x2 patches overlapping in a column of a 2x3 image.
  const auto two = extract_patches(Image(3, 2), 2, 1);
  Matrix vals(4, 2);
  vals.col(0) << 1, 10, 1, 1;
  vals.col(1) << 20, 2, 2, 2;
  const Image out = reconstruct_overlap(two, vals);
  CHECK(out(0, 1) == 15.0);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 2) == 2.0);

  CHECK_THROWS(reconstruct_overlap(dec, Matrix(25, 3)));
  const auto strided = extract_patches(Image(8, 8), 5, 2);
  CHECK_THROWS(reconstruct_overlap(strided, strided.patches));
}

TEST_CASE("reconstruct_overlap: round trip for covering strides") {
  std::mt19937_64 rng(2);
  const Image img = random_image(rng, 13, 13);
  for (Index stride : {1, 2, 4}) {
    const auto dec = extract_patches(img, 5, stride);
    CHECK(reconstruct_overlap(dec, dec.patches) == img);
  }
}

TEST_CASE("add_gaussian_noise statistics and determinism") {
  const Image flat(1000, 1000, 128.0);
  CHECK(add_gaussian_noise(flat, 0.0, 5) == flat);
  const Image noisy = add_gaussian_noise(flat, 10.0, 5);
  const Matrix diff = noisy.pixels() - flat.pixels();
  const double mean = diff.mean();
  const double sd = std::sqrt((diff.array() - mean).square().sum() / double(diff.size() - 1));
  CHECK(std::abs(sd - 10.0) < 0.1);
  CHECK(add_gaussian_noise(flat, 10.0, 5) == noisy);
  CHECK(!(add_gaussian_noise(flat, 10.0, 6) == noisy));
  CHECK(noisy.pixels().maxCoeff() > 170.0);
  CHECK_THROWS_AS(add_gaussian_noise(flat, -1.0, 5), InvalidArgument);
}

TEST_CASE("psnr closed forms") {
  std::mt19937_64 rng(3);
  const Image a = random_image(rng, 64, 64);
  CHECK(std::isinf(psnr(a, a)));
  Image b = a;
  b.pixels().array() += 1.0;
  CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-3 / 48.0));
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));

  const Image big(512, 512, 100.0);
  CHECK(std::abs(psnr(big, add_gaussian_noise(big, 10.0, 9)) - 28.13) < 0.1);
  CHECK_THROWS_AS(psnr(a, Image(63, 64)), DimensionError);
}

TEST_CASE("psnr is symmetric and decreasing in the error") {
  std::mt19937_64 rng(4);
  const Image a = random_image(rng, 20, 20);
  double previous = std::numeric_limits<double>::infinity();
  for (double s : {1.0, 2.0, 5.0, 10.0}) {
    const Image b = add_gaussian_noise(a, s, 1);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(psnr(a, b) < previous);
    previous = psnr(a, b);
  }
}

TEST_CASE("image files round trip through 8-bit quantization") {
  std::mt19937_64 rng(5);
  const Image img = random_image(rng, 17, 11);
  const auto dir = std::filesystem::temp_directory_path() / "cdsc_io_test";
  std::filesystem::create_directories(dir);
  for (const char* name : {"a.pgm", "a.png"}) {
    write_image(img, dir / name);
    const Image back = read_image(dir / name);
    CHECK(back == quantize_8bit(img));
  }
  Image out_of_range(2, 1);
  out_of_range(0, 0) = -20.0;
  out_of_range(0, 1) = 300.4;
  CHECK(quantize_8bit(out_of_range)(0, 0) == 0.0);
  CHECK(quantize_8bit(out_of_range)(0, 1) == 255.0);
  CHECK_THROWS_AS(read_image(dir / "missing.pgm"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundled assets load") {
  const Image cam = read_image(std::filesystem::path(CDSC_DATA_DIR) / "test" / "camera.pgm");
  CHECK(cam.width() == 128);
  CHECK(cam.height() == 128);
}
