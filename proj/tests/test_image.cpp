#include <png.h>

#include <cmath>
#include <random>

#include "fusemetrics/image.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fusemetrics;
using testing::check_error;
using testing::from_fn;

namespace {

void write_pgm_bytes(const std::filesystem::path& p, int w, int h, const std::vector<unsigned char>& px) {
  std::string text = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  text.append(px.begin(), px.end());
  testing::spit(p, text);
}

double energy(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST_SUITE("image_core") {

TEST_CASE("GrayImage rejects out-of-range and NaN values") {
  check_error(ErrorCode::RangeError, [] { GrayImage(1, 1, {1.5}); });
  check_error(ErrorCode::RangeError, [] { GrayImage(1, 1, {-0.1}); });
  check_error(ErrorCode::RangeError, [] { GrayImage(1, 1, {std::nan("")}); });
  check_error(ErrorCode::InvalidArgument, [] { GrayImage(2, 2, {0.0}); });
  const GrayImage c = GrayImage::from_raster_clamped(Raster(2, 1, 3.0));
  CHECK(c(0, 0) == 1.0);
}

TEST_CASE("load_gray maps 8-bit values onto [0, 1]") {
  testing::TempDir dir;
  write_pgm_bytes(dir / "zero.pgm", 2, 2, {0, 0, 0, 0});
  const GrayImage z = load_gray(dir / "zero.pgm");
  CHECK(z.width() == 2);
  CHECK(z.height() == 2);
  for (double v : z.pixels()) CHECK(v == 0.0);

  write_pgm_bytes(dir / "levels.pgm", 2, 1, {255, 128});
  const GrayImage l = load_gray(dir / "levels.pgm");
  CHECK(l(0, 0) == 1.0);
  CHECK(l(1, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  CHECK(l(1, 0) == doctest::Approx(0.50196).epsilon(1e-5));
}

TEST_CASE("load_gray errors") {
  testing::TempDir dir;
  check_error(ErrorCode::IoError, [&] { load_gray(dir / "missing.pgm"); });
  testing::spit(dir / "ascii.pgm", "P2\n1 1\n255\n0\n");
  check_error(ErrorCode::FormatError, [&] { load_gray(dir / "ascii.pgm"); });
  testing::spit(dir / "junk.bin", "not an image");
  check_error(ErrorCode::FormatError, [&] { load_gray(dir / "junk.bin"); });
  testing::spit(dir / "short.pgm", "P5\n4 4\n255\nab");
  check_error(ErrorCode::FormatError, [&] { load_gray(dir / "short.pgm"); });
}

TEST_CASE("color PNG is reduced with luma weights") {
  testing::TempDir dir;
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 2;
  img.height = 1;
  img.format = PNG_FORMAT_RGB;
  const unsigned char px[6] = {255, 0, 0, 10, 200, 30};
  REQUIRE(png_image_write_to_file(&img, (dir / "c.png").c_str(), 0, px, 0, nullptr));
  const GrayImage g = load_gray(dir / "c.png");
  CHECK(g(0, 0) == doctest::Approx(0.299).epsilon(1e-2));
  CHECK(g(1, 0) == doctest::Approx((0.299 * 10 + 0.587 * 200 + 0.114 * 30) / 255).epsilon(1e-2));
}

TEST_CASE("PGM round trip preserves 8-bit values") {
  testing::TempDir dir;
  const GrayImage a = from_fn(5, 3, [](int x, int y) { return (x * 3 + y * 40) / 255.0; });
  save_pgm(a, dir / "a.pgm");
  const GrayImage b = load_gray(dir / "a.pgm");
  CHECK(a == b);
}

TEST_CASE("sobel examples") {
  const GradientField flat = sobel(GrayImage::filled(6, 5, 0.4));
  for (double v : flat.gx.data) CHECK(v == 0.0);
  for (double v : flat.gy.data) CHECK(v == 0.0);

  const int c = 5;
  const GradientField step = sobel(from_fn(10, 8, [&](int x, int) { return x >= c ? 1.0 : 0.0; }));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      if (x < c - 1 || x > c) CHECK(step.gx(x, y) == 0.0);
      CHECK(step.gy(x, y) == 0.0);
    }

  const GrayImage ramp = from_fn(5, 5, [](int x, int) { return x / 4.0; });
  const GradientField r = sobel(ramp);
  const oracle::Grid ox = oracle::correlate(oracle::Grid(ramp), oracle::kSobelX);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 4; ++x) {
      CHECK(r.gx(x, y) == doctest::Approx(ox.at(x, y)).epsilon(1e-12));
      CHECK(r.gx(x, y) == doctest::Approx(2.0).epsilon(1e-12));
    }
  check_error(ErrorCode::TooSmall, [] { sobel(GrayImage::filled(2, 5, 0.0)); });
}

TEST_CASE("sobel magnitude and orientation conventions") {
  std::mt19937_64 rng(11);
  const GrayImage img = oracle::random_image(rng, 9, 7);
  const GradientField g = sobel(img);
  for (std::size_t p = 0; p < g.gx.size(); ++p) {
    CHECK(g.magnitude.data[p] == doctest::Approx(std::hypot(g.gx.data[p], g.gy.data[p])).epsilon(1e-9));
    CHECK(g.orientation.data[p] > -std::numbers::pi / 2 - 1e-12);
    CHECK(g.orientation.data[p] <= std::numbers::pi / 2 + 1e-12);
  }
  // A horizontal edge has gx = 0 and maps to pi/2.
  const GradientField h = sobel(from_fn(5, 6, [](int, int y) { return y >= 3 ? 1.0 : 0.0; }));
  CHECK(h.orientation(2, 3) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("sobel magnitude is invariant under transposition") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage a = oracle::random_image(rng, 7, 11);
    const GrayImage t = from_fn(11, 7, [&](int x, int y) { return a(y, x); });
    const GradientField ga = sobel(a), gt = sobel(t);
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 7; ++x) {
        CHECK(ga.magnitude(x, y) == doctest::Approx(gt.magnitude(y, x)).epsilon(1e-12));
        CHECK(ga.gx(x, y) == doctest::Approx(gt.gy(y, x)).epsilon(1e-12));
      }
  }
}

TEST_CASE("block_dct8 examples") {
  DctBlock flat;
  flat.fill(0.3);
  const DctBlock c = dct8(flat);
  CHECK(c[0] == doctest::Approx(8 * 0.3).epsilon(1e-12));
  for (int i = 1; i < 64; ++i) CHECK(std::abs(c[i]) < 1e-12);

  DctBlock impulse{};
  impulse[0] = 1.0;
  const DctBlock ci = dct8(impulse);
  const auto ref = oracle::dct8(impulse);
  for (int i = 0; i < 64; ++i) CHECK(ci[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  DctBlock r;
  for (double& v : r) v = u(rng);
  const DctBlock back = idct8(dct8(r));
  const auto naive = oracle::dct8(r);
  const DctBlock fast = dct8(r);
  for (int i = 0; i < 64; ++i) {
    CHECK(std::abs(back[i] - r[i]) < 1e-6);
    CHECK(std::abs(fast[i] - naive[i]) < 1e-12);
  }
}

TEST_CASE("block_dct8 zero-pads partial blocks") {
  const GrayImage img = GrayImage::filled(10, 9, 1.0);
  const BlockDct b = block_dct8(img);
  CHECK(b.blocks_x == 2);
  CHECK(b.blocks_y == 2);
  CHECK(b.blocks[0][0] == doctest::Approx(8.0));
  // Right block holds a 2x8 strip of ones: DC = 16 / 8.
  CHECK(b.blocks[1][0] == doctest::Approx(2.0));
  CHECK(b.blocks[3][0] == doctest::Approx(2.0 / 8.0));
}

TEST_CASE("haar_dwt1 examples") {
  const HaarBands c = haar_dwt1(GrayImage::filled(6, 4, 0.25));
  for (double v : c.ll.data) CHECK(v == doctest::Approx(0.5));
  for (const Raster* r : {&c.lh, &c.hl, &c.hh})
    for (double v : r->data) CHECK(v == 0.0);

  std::mt19937_64 rng(4);
  const GrayImage r = oracle::random_image(rng, 8, 6);
  const Raster back = haar_idwt1(haar_dwt1(r));
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(back.data[i] - r.pixels()[i]) < 1e-6);

  const GrayImage checker = from_fn(4, 4, [](int x, int y) { return (x + y) % 2 ? 1.0 : 0.0; });
  const HaarBands hb = haar_dwt1(checker);
  const oracle::HaarOut ho = oracle::haar(oracle::Grid(checker));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(hb.ll.data[i] == doctest::Approx(ho.ll.v[i]));
    CHECK(hb.lh.data[i] == doctest::Approx(ho.lh.v[i]));
    CHECK(hb.hl.data[i] == doctest::Approx(ho.hl.v[i]));
    CHECK(hb.hh.data[i] == doctest::Approx(ho.hh.v[i]));
    CHECK(hb.lh.data[i] == 0.0);
    CHECK(hb.hl.data[i] == 0.0);
    CHECK(std::abs(hb.hh.data[i]) == doctest::Approx(1.0));
  }
  const double total = energy(hb.ll.data) + energy(hb.hh.data);
  CHECK(energy(hb.hh.data) / total > 0.49);
  CHECK(energy(hb.hh.data) == doctest::Approx(energy(checker.pixels()) - energy(hb.ll.data)));

  const HaarBands odd = haar_dwt1(GrayImage::filled(5, 3, 0.1));
  CHECK(odd.ll.width == 3);
  CHECK(odd.ll.height == 2);
}

TEST_CASE("transforms preserve energy") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const GrayImage img = oracle::random_image(rng, 16, 24);
    const BlockDct d = block_dct8(img);
    double e = 0;
    for (const DctBlock& b : d.blocks) e += energy(b);
    CHECK(std::abs(e - energy(img.pixels())) / energy(img.pixels()) < 1e-6);
    const HaarBands h = haar_dwt1(img);
    const double eh = energy(h.ll.data) + energy(h.lh.data) + energy(h.hl.data) + energy(h.hh.data);
    CHECK(std::abs(eh - energy(img.pixels())) / energy(img.pixels()) < 1e-6);
  }
}

TEST_CASE("gaussian_pyramid examples") {
  std::mt19937_64 rng(6);
  const GrayImage img = oracle::random_image(rng, 16, 16);
  const auto one = gaussian_pyramid(img, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == img);

  for (const GrayImage& level : gaussian_pyramid(GrayImage::filled(32, 32, 0.6), 3)) {
    for (double v : level.pixels()) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
  }

  const GrayImage impulse = from_fn(16, 16, [](int x, int y) { return x == 7 && y == 9 ? 1.0 : 0.0; });
  const auto pyr = gaussian_pyramid(impulse, 2);
  const oracle::Grid naive = oracle::blur_decimate(oracle::Grid(impulse));
  REQUIRE(pyr[1].width() == naive.w);
  for (int y = 0; y < naive.h; ++y)
    for (int x = 0; x < naive.w; ++x) CHECK(pyr[1](x, y) == doctest::Approx(naive.at(x, y)).epsilon(1e-12));

  check_error(ErrorCode::TooSmall, [] { gaussian_pyramid(GrayImage::filled(16, 16, 0), 3); });
  check_error(ErrorCode::InvalidArgument, [] { gaussian_pyramid(GrayImage::filled(16, 16, 0), 0); });
}

TEST_CASE("histogram256 examples") {
  const Histogram256 z = histogram256(GrayImage::filled(10, 10, 0.0));
  CHECK(z.counts[0] == 100);
  CHECK(z.total == 100);
  const Histogram256 one = histogram256(GrayImage::filled(1, 1, 1.0));
  CHECK(one.counts[255] == 1);
  const Histogram256 all = histogram256(from_fn(16, 16, [](int x, int y) { return (y * 16 + x) / 256.0; }));
  for (auto c : all.counts) CHECK(c == 1);
}

TEST_CASE("histogram256 total equals pixel count") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 20);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = dim(rng), h = dim(rng);
    const Histogram256 hist = histogram256(oracle::random_image(rng, w, h));
    std::uint64_t sum = 0;
    for (auto c : hist.counts) sum += c;
    if (hist.total != static_cast<std::uint64_t>(w * h) || sum != hist.total) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("transforms are deterministic") {
  std::mt19937_64 rng(8);
  const GrayImage img = oracle::random_image(rng, 19, 13);
  CHECK(sobel(img).magnitude.data == sobel(img).magnitude.data);
  CHECK(haar_dwt1(img).hh.data == haar_dwt1(img).hh.data);
  CHECK(block_dct8(img).blocks == block_dct8(img).blocks);
}

TEST_CASE("resize_area preserves the mean") {
  std::mt19937_64 rng(9);
  const GrayImage img = oracle::random_image(rng, 50, 30);
  const GrayImage small = resize_area(img, 16, 16);
  double a = 0, b = 0;
  for (double v : img.pixels()) a += v;
  for (double v : small.pixels()) b += v;
  CHECK(a / img.size() == doctest::Approx(b / small.size()).epsilon(1e-9));
}

}  // TEST_SUITE
