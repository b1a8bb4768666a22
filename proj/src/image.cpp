#include "fusemetrics/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>

#include "fusemetrics/error.hpp"

namespace fusemetrics {

double Raster::clamped(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return (*this)(x, y);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "pixel count does not match dimensions");
  }
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::RangeError, "pixel value outside [0, 1]: " + std::to_string(v));
    }
  }
  raster_.width = width;
  raster_.height = height;
  raster_.data = std::move(data);
}

GrayImage GrayImage::filled(int width, int height, double value) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(width) * height, value));
}

GrayImage GrayImage::from_raster_clamped(Raster raster) {
  for (double& v : raster.data) {
    if (std::isnan(v)) throw Error(ErrorCode::RangeError, "NaN pixel");
    v = std::clamp(v, 0.0, 1.0);
  }
  return GrayImage(raster.width, raster.height, std::move(raster.data));
}

bool same_dims(const GrayImage& a, const GrayImage& b) {
  return a.width() == b.width() && a.height() == b.height();
}

void require_same_dims(const GrayImage& a, const GrayImage& b, const char* what) {
  if (!same_dims(a, b)) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch " << a.width() << "x" << a.height() << " vs "
        << b.width() << "x" << b.height();
    throw Error(ErrorCode::DimMismatch, msg.str());
  }
}

void require_min_dims(const GrayImage& img, int min_w, int min_h, const char* what) {
  if (img.width() < min_w || img.height() < min_h) {
    std::ostringstream msg;
    msg << what << ": image " << img.width() << "x" << img.height() << " smaller than " << min_w
        << "x" << min_h;
    throw Error(ErrorCode::TooSmall, msg.str());
  }
}

// --- I/O -------------------------------------------------------------------

namespace {

GrayImage read_pgm(std::istream& in, const std::filesystem::path& path) {
  auto skip_ws_and_comments = [&in]() {
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        return;
      }
    }
  };
  std::string magic;
  in >> magic;
  if (magic != "P5") {
    throw Error(ErrorCode::FormatError, path.string() + ": only binary P5 PGM is supported");
  }
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments();
  in >> w;
  skip_ws_and_comments();
  in >> h;
  skip_ws_and_comments();
  in >> maxval;
  if (!in || w < 1 || h < 1) {
    throw Error(ErrorCode::FormatError, path.string() + ": malformed PGM header");
  }
  if (maxval < 1 || maxval > 255) {
    throw Error(ErrorCode::FormatError, path.string() + ": only 8-bit PGM is supported");
  }
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorCode::FormatError, path.string() + ": truncated PGM data");
  }
  std::vector<double> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    data[i] = std::min(1.0, bytes[i] / static_cast<double>(maxval));
  }
  return GrayImage(w, h, std::move(data));
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(ErrorCode::FormatError, path.string() + ": 16-bit PNG is not supported");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = PNG_FORMAT_RGBA;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::FormatError, path.string() + ": " + msg);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const png_byte* px = &buffer[i * 4];
    double v = color ? 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2] : px[0];
    data[i] = std::clamp(v / 255.0, 0.0, 1.0);
  }
  return GrayImage(w, h, std::move(data));
}

}  // namespace

GrayImage load_gray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') {
    in.clear();
    in.seekg(0);
    return read_pgm(in, path);
  }
  if (in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) {
    in.close();
    return read_png(path);
  }
  throw Error(ErrorCode::FormatError, path.string() + ": unsupported image encoding");
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  auto px = img.pixels();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(px[i] * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

// --- Sobel -----------------------------------------------------------------

GradientField sobel(const Raster& img) {
  if (img.width < 3 || img.height < 3) {
    throw Error(ErrorCode::TooSmall, "sobel: image must be at least 3x3");
  }
  const int w = img.width, h = img.height;
  GradientField g{Raster(w, h), Raster(w, h), Raster(w, h), Raster(w, h)};
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const double a = img(xm, ym), b = img(x, ym), c = img(xp, ym);
      const double d = img(xm, y), f = img(xp, y);
      const double p = img(xm, yp), q = img(x, yp), r = img(xp, yp);
      const double gx = (c + 2.0 * f + r) - (a + 2.0 * d + p);
      const double gy = (p + 2.0 * q + r) - (a + 2.0 * b + c);
      g.gx(x, y) = gx;
      g.gy(x, y) = gy;
      g.magnitude(x, y) = std::sqrt(gx * gx + gy * gy);
      g.orientation(x, y) = gx == 0.0 ? std::numbers::pi / 2.0 : std::atan(gy / gx);
    }
  }
  return g;
}

GradientField sobel(const GrayImage& img) { return sobel(img.raster()); }

// --- DCT -------------------------------------------------------------------

namespace {

const std::array<double, 64>& dct_matrix() {
  static const std::array<double, 64> m = [] {
    std::array<double, 64> c{};
    for (int k = 0; k < 8; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) {
        c[k * 8 + n] = scale * std::cos((2.0 * n + 1.0) * k * std::numbers::pi / 16.0);
      }
    }
    return c;
  }();
  return m;
}

}  // namespace

DctBlock dct8(const DctBlock& block) {
  const auto& c = dct_matrix();
  DctBlock tmp{}, out{};
  // rows: tmp[y][u] = sum_x c[u][x] block[y][x]
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += c[u * 8 + x] * block[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += c[v * 8 + y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  return out;
}

DctBlock idct8(const DctBlock& coeffs) {
  const auto& c = dct_matrix();
  DctBlock tmp{}, out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += c[u * 8 + x] * coeffs[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += c[v * 8 + y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
  return out;
}

BlockDct block_dct8(const Raster& img) {
  BlockDct out;
  out.blocks_x = (img.width + 7) / 8;
  out.blocks_y = (img.height + 7) / 8;
  out.blocks.resize(static_cast<std::size_t>(out.blocks_x) * out.blocks_y);
  for (int by = 0; by < out.blocks_y; ++by) {
    for (int bx = 0; bx < out.blocks_x; ++bx) {
      DctBlock block{};
      for (int y = 0; y < 8; ++y) {
        const int iy = by * 8 + y;
        if (iy >= img.height) break;
        for (int x = 0; x < 8; ++x) {
          const int ix = bx * 8 + x;
          if (ix >= img.width) break;
          block[y * 8 + x] = img(ix, iy);
        }
      }
      out.blocks[static_cast<std::size_t>(by) * out.blocks_x + bx] = dct8(block);
    }
  }
  return out;
}

BlockDct block_dct8(const GrayImage& img) { return block_dct8(img.raster()); }

// --- Haar ------------------------------------------------------------------

HaarBands haar_dwt1(const Raster& img) {
  const int bw = (img.width + 1) / 2, bh = (img.height + 1) / 2;
  HaarBands b{Raster(bw, bh), Raster(bw, bh), Raster(bw, bh), Raster(bw, bh)};
  for (int y = 0; y < bh; ++y) {
    for (int x = 0; x < bw; ++x) {
      const double a = img.clamped(2 * x, 2 * y);
      const double c = img.clamped(2 * x + 1, 2 * y);
      const double d = img.clamped(2 * x, 2 * y + 1);
      const double e = img.clamped(2 * x + 1, 2 * y + 1);
      b.ll(x, y) = 0.5 * (a + c + d + e);
      b.hl(x, y) = 0.5 * (a - c + d - e);
      b.lh(x, y) = 0.5 * (a + c - d - e);
      b.hh(x, y) = 0.5 * (a - c - d + e);
    }
  }
  return b;
}

HaarBands haar_dwt1(const GrayImage& img) { return haar_dwt1(img.raster()); }

Raster haar_idwt1(const HaarBands& bands) {
  const int bw = bands.ll.width, bh = bands.ll.height;
  Raster out(2 * bw, 2 * bh);
  for (int y = 0; y < bh; ++y) {
    for (int x = 0; x < bw; ++x) {
      const double ll = bands.ll(x, y), hl = bands.hl(x, y);
      const double lh = bands.lh(x, y), hh = bands.hh(x, y);
      out(2 * x, 2 * y) = 0.5 * (ll + hl + lh + hh);
      out(2 * x + 1, 2 * y) = 0.5 * (ll - hl + lh - hh);
      out(2 * x, 2 * y + 1) = 0.5 * (ll + hl - lh - hh);
      out(2 * x + 1, 2 * y + 1) = 0.5 * (ll - hl - lh + hh);
    }
  }
  return out;
}

// --- filtering ---------------------------------------------------------------

Raster filter_rows(const Raster& img, std::span<const double> kx) {
  const int w = img.width, h = img.height;
  const int rx = static_cast<int>(kx.size()) / 2;
  Raster out(w, h);
  std::vector<double> row(static_cast<std::size_t>(w + 2 * rx));
  for (int y = 0; y < h; ++y) {
    const double* src = &img.data[static_cast<std::size_t>(y) * w];
    for (int i = 0; i < w + 2 * rx; ++i) row[i] = src[std::clamp(i - rx, 0, w - 1)];
    double* dst = &out.data[static_cast<std::size_t>(y) * w];
    for (std::size_t k = 0; k < kx.size(); ++k) {
      const double wk = kx[k];
      const double* r = &row[k];
      for (int x = 0; x < w; ++x) dst[x] += wk * r[x];
    }
  }
  return out;
}

Raster filter_cols(const Raster& img, std::span<const double> ky) {
  const int w = img.width, h = img.height;
  const int ry = static_cast<int>(ky.size()) / 2;
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    double* dst = &out.data[static_cast<std::size_t>(y) * w];
    for (std::size_t k = 0; k < ky.size(); ++k) {
      const int sy = std::clamp(y + static_cast<int>(k) - ry, 0, h - 1);
      const double* src = &img.data[static_cast<std::size_t>(sy) * w];
      const double wk = ky[k];
      for (int x = 0; x < w; ++x) dst[x] += wk * src[x];
    }
  }
  return out;
}

Raster filter_separable(const Raster& img, std::span<const double> kx, std::span<const double> ky) {
  return filter_cols(filter_rows(img, kx), ky);
}

Raster filter_separable_valid(const Raster& img, std::span<const double> kx,
                              std::span<const double> ky) {
  const int ow = img.width - static_cast<int>(kx.size()) + 1;
  const int oh = img.height - static_cast<int>(ky.size()) + 1;
  if (ow < 1 || oh < 1) {
    throw Error(ErrorCode::TooSmall, "filter_separable_valid: kernel larger than image");
  }
  Raster tmp(ow, img.height), out(ow, oh);
  for (int y = 0; y < img.height; ++y) {
    const double* src = &img.data[static_cast<std::size_t>(y) * img.width];
    double* dst = &tmp.data[static_cast<std::size_t>(y) * ow];
    for (std::size_t k = 0; k < kx.size(); ++k) {
      const double wk = kx[k];
      for (int x = 0; x < ow; ++x) dst[x] += wk * src[x + k];
    }
  }
  for (int y = 0; y < oh; ++y) {
    double* dst = &out.data[static_cast<std::size_t>(y) * ow];
    for (std::size_t k = 0; k < ky.size(); ++k) {
      const double* src = &tmp.data[static_cast<std::size_t>(y + k) * ow];
      const double wk = ky[k];
      for (int x = 0; x < ow; ++x) dst[x] += wk * src[x];
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(int length, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(length));
  const int r = length / 2;
  double sum = 0.0;
  for (int i = 0; i < length; ++i) {
    const double d = i - r;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// --- pyramid -----------------------------------------------------------------

Raster pyramid_reduce(const Raster& img) {
  static constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                                                      1.0 / 16};
  const Raster blurred = filter_separable(img, kBinomial, kBinomial);
  const int w = (img.width + 1) / 2, h = (img.height + 1) / 2;
  Raster out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = blurred(2 * x, 2 * y);
  return out;
}

std::vector<GrayImage> gaussian_pyramid(const GrayImage& img, int levels) {
  if (levels < 1) {
    throw Error(ErrorCode::InvalidArgument, "gaussian_pyramid: levels must be >= 1");
  }
  const long long min_dim = std::min(img.width(), img.height());
  if (min_dim < 8LL << (levels - 1)) {
    throw Error(ErrorCode::TooSmall, "gaussian_pyramid: image too small for " +
                                         std::to_string(levels) + " levels");
  }
  std::vector<GrayImage> out{img};
  for (int l = 1; l < levels; ++l) {
    out.push_back(GrayImage::from_raster_clamped(pyramid_reduce(out.back().raster())));
  }
  return out;
}

// --- histogram -------------------------------------------------------------------

Histogram256 histogram256(const GrayImage& img) {
  Histogram256 h;
  for (double v : img.pixels()) {
    const int bin = std::min(static_cast<int>(std::floor(v * 256.0)), 255);
    ++h.counts[bin];
  }
  h.total = img.size();
  return h;
}

// --- resampling -----------------------------------------------------------------

namespace {

struct Tap {
  int index;
  double weight;
};

// For each output sample, the input samples it covers and their normalized
// overlap weights.
std::vector<std::vector<Tap>> area_taps(int in, int out) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (w > 0.0) {
        taps[o].push_back({i, w});
        total += w;
      }
    }
    for (Tap& t : taps[o]) t.weight /= total;
  }
  return taps;
}

}  // namespace

Raster resize_area(const Raster& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "resize_area: target dims must be positive");
  }
  if (width == img.width && height == img.height) return img;
  const auto tx = area_taps(img.width, width);
  const auto ty = area_taps(img.height, height);
  Raster tmp(width, img.height), out(width, height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (const Tap& t : tx[x]) s += t.weight * img(t.index, y);
      tmp(x, y) = s;
    }
  for (int y = 0; y < height; ++y)
    for (const Tap& t : ty[y]) {
      const double* src = &tmp.data[static_cast<std::size_t>(t.index) * width];
      double* dst = &out.data[static_cast<std::size_t>(y) * width];
      for (int x = 0; x < width; ++x) dst[x] += t.weight * src[x];
    }
  return out;
}

GrayImage resize_area(const GrayImage& img, int width, int height) {
  return GrayImage::from_raster_clamped(resize_area(img.raster(), width, height));
}

}  // namespace fusemetrics
