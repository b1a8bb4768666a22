#pragma once

// Image representation and the shared transforms consumed by every metric
// kernel. Intensities live in [0, 1]; borders are handled by edge
// replication unless a function says otherwise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fusemetrics {

/// Unbounded real-valued raster, row-major. Used for intermediate maps
/// (gradients, filter responses, transform coefficients).
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  /// Edge-replicated read.
  double clamped(int x, int y) const;
};

/// Normalized single-channel image. Construction validates that every value
/// is finite and inside [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::vector<double> data);

  static GrayImage filled(int width, int height, double value);
  /// Clamps every value into [0, 1]; NaN is rejected.
  static GrayImage from_raster_clamped(Raster raster);

  int width() const { return raster_.width; }
  int height() const { return raster_.height; }
  std::size_t size() const { return raster_.size(); }
  bool empty() const { return raster_.data.empty(); }
  std::span<const double> pixels() const { return raster_.data; }
  double operator()(int x, int y) const { return raster_(x, y); }
  const Raster& raster() const { return raster_; }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.raster_.width == b.raster_.width && a.raster_.height == b.raster_.height &&
           a.raster_.data == b.raster_.data;
  }

 private:
  Raster raster_;
};

bool same_dims(const GrayImage& a, const GrayImage& b);
void require_same_dims(const GrayImage& a, const GrayImage& b, const char* what);
void require_min_dims(const GrayImage& img, int min_w, int min_h, const char* what);

struct GradientField {
  Raster gx;
  Raster gy;
  Raster magnitude;
  Raster orientation;  // radians in (-pi/2, pi/2]
};

struct Histogram256 {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;
};

using DctBlock = std::array<double, 64>;  // row-major 8x8, index = v * 8 + u

struct BlockDct {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<DctBlock> blocks;  // row-major over blocks
};

struct HaarBands {
  Raster ll;
  Raster lh;  // vertical differences (horizontal edges)
  Raster hl;  // horizontal differences (vertical edges)
  Raster hh;
};

// --- I/O ---------------------------------------------------------------

/// Reads an 8-bit binary PGM (P5) or a PNG. Color PNGs are reduced with
/// 0.299R + 0.587G + 0.114B; pixel k becomes k / 255.
GrayImage load_gray(const std::filesystem::path& path);
/// Writes an 8-bit P5 PGM, value v stored as round(v * 255).
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// --- transforms ----------------------------------------------------------

/// 3x3 Sobel, edge replication. Requires width, height >= 3.
GradientField sobel(const GrayImage& img);
GradientField sobel(const Raster& img);

/// Orthonormal type-II 2-D DCT of each 8x8 block; partial blocks are
/// zero-padded.
BlockDct block_dct8(const GrayImage& img);
BlockDct block_dct8(const Raster& img);
DctBlock dct8(const DctBlock& block);
DctBlock idct8(const DctBlock& coeffs);

/// Single-level orthonormal Haar analysis. Odd dimensions are extended by
/// replicating the last row/column. With this scaling a constant image v
/// yields LL = 2v.
HaarBands haar_dwt1(const GrayImage& img);
HaarBands haar_dwt1(const Raster& img);
/// Synthesis; output has dims 2 * band dims.
Raster haar_idwt1(const HaarBands& bands);

/// Binomial [1 4 6 4 1]/16 blur followed by keeping even rows and columns.
Raster pyramid_reduce(const Raster& img);
/// levels >= 1 and min(dim) >= 8 * 2^(levels - 1).
std::vector<GrayImage> gaussian_pyramid(const GrayImage& img, int levels);

Histogram256 histogram256(const GrayImage& img);

// --- filtering helpers ---------------------------------------------------

/// Same-size separable correlation with edge replication. Kernels have odd
/// length and are centered.
Raster filter_separable(const Raster& img, std::span<const double> kx, std::span<const double> ky);
/// The horizontal and vertical passes of filter_separable.
Raster filter_rows(const Raster& img, std::span<const double> kx);
Raster filter_cols(const Raster& img, std::span<const double> ky);
/// Valid-region separable correlation: output is (w - kx + 1) x (h - ky + 1).
Raster filter_separable_valid(const Raster& img, std::span<const double> kx,
                              std::span<const double> ky);
/// Normalized 1-D Gaussian with the given odd length.
std::vector<double> gaussian_kernel(int length, double sigma);

/// Area-weighted resampling to an arbitrary size.
Raster resize_area(const Raster& img, int width, int height);
GrayImage resize_area(const GrayImage& img, int width, int height);

}  // namespace fusemetrics
