#include "fusemetrics/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fusemetrics/error.hpp"

namespace fusemetrics::nn {

Tensor from_raster(const Raster& r) {
  Tensor t(1, r.height, r.width);
  for (std::size_t i = 0; i < r.size(); ++i) t.data(0, static_cast<Eigen::Index>(i)) = r.data[i];
  return t;
}

Raster channel_raster(const Tensor& t, int channel) {
  Raster r(t.width, t.height);
  for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = t.data(channel, static_cast<Eigen::Index>(i));
  return r;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::DimMismatch, "concat_channels: spatial size mismatch");
  }
  Tensor out(a.channels + b.channels, a.height, a.width);
  out.data.topRows(a.channels) = a.data;
  out.data.bottomRows(b.channels) = b.data;
  return out;
}

// --- Rng ----------------------------------------------------------------------

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

// --- convolution ----------------------------------------------------------------

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int out_dim(int in, int stride) { return (in + stride - 1) / stride; }

// Stride-1 inference without im2col: on a replicate-padded copy, tap (ky, kx)
// of every output pixel is the same column offset, so each tap is one GEMM.
// Only cheaper than im2col when the layer has a single output channel.
Tensor conv_forward_direct(const ConvLayer& layer, std::span<const double> params, const Tensor& x) {
  const int w = x.width, h = x.height, pw = w + 2;
  Matrix pad(layer.in, static_cast<Eigen::Index>(pw) * (h + 2));
  for (int y = 0; y < h + 2; ++y) {
    const int sy = std::clamp(y - 1, 0, h - 1);
    for (int px = 0; px < pw; ++px) {
      const int sx = std::clamp(px - 1, 0, w - 1);
      pad.col(static_cast<Eigen::Index>(y) * pw + px) = x.data.col(static_cast<Eigen::Index>(sy) * w + sx);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(h - 1) * pw + w;
  Eigen::Map<const RowMajor> weights(params.data() + layer.offset, layer.out, layer.in * 9);
  Matrix acc = Matrix::Zero(layer.out, n);
  Matrix tap_w(layer.out, layer.in);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      for (int c = 0; c < layer.in; ++c) tap_w.col(c) = weights.col(c * 9 + ky * 3 + kx);
      acc.noalias() += tap_w * pad.middleCols(static_cast<Eigen::Index>(ky) * pw + kx, n);
    }
  }
  Tensor out(layer.out, h, w);
  for (int y = 0; y < h; ++y) {
    out.data.middleCols(static_cast<Eigen::Index>(y) * w, w) = acc.middleCols(static_cast<Eigen::Index>(y) * pw, w);
  }
  if (layer.bias) {
    out.data.colwise() +=
        Eigen::Map<const Vector>(params.data() + layer.offset + layer.weight_count(), layer.out);
  }
  return out;
}

}  // namespace

Tensor conv_forward(const ConvLayer& layer, std::span<const double> params, const Tensor& x,
                    ConvCache* cache) {
  if (x.channels != layer.in) {
    throw Error(ErrorCode::DimMismatch, "conv_forward: channel count mismatch");
  }
  if (!cache && layer.stride == 1 && layer.out == 1) return conv_forward_direct(layer, params, x);
  const int s = layer.stride;
  const int oh = out_dim(x.height, s), ow = out_dim(x.width, s);
  const int k = layer.in * 9;
  Matrix cols(k, static_cast<Eigen::Index>(oh) * ow);
  const double* in = x.data.data();
  const Eigen::Index ch = x.data.rows();
  std::array<Eigen::Index, 9> src{};
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = std::clamp(oy * s + ky - 1, 0, x.height - 1);
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = std::clamp(ox * s + kx - 1, 0, x.width - 1);
          src[static_cast<std::size_t>(ky * 3 + kx)] = (static_cast<Eigen::Index>(iy) * x.width + ix) * ch;
        }
      }
      double* dst = cols.col(static_cast<Eigen::Index>(oy) * ow + ox).data();
      for (int c = 0; c < layer.in; ++c)
        for (std::size_t tap = 0; tap < 9; ++tap) *dst++ = in[src[tap] + c];
    }
  }
  Eigen::Map<const RowMajor> w(params.data() + layer.offset, layer.out, k);
  Tensor y(layer.out, oh, ow);
  y.data.noalias() = w * cols;
  if (layer.bias) {
    y.data.colwise() +=
        Eigen::Map<const Vector>(params.data() + layer.offset + layer.weight_count(), layer.out);
  }
  if (cache) {
    cache->cols = std::move(cols);
    cache->in_height = x.height;
    cache->in_width = x.width;
  }
  return y;
}

Tensor conv_forward_cached(const ConvLayer& layer, std::span<const double> params,
                           const ConvCache& cache) {
  if (cache.cols.rows() != static_cast<Eigen::Index>(layer.in) * 9) {
    throw Error(ErrorCode::DimMismatch, "conv_forward_cached: channel count mismatch");
  }
  const int s = layer.stride;
  Eigen::Map<const RowMajor> w(params.data() + layer.offset, layer.out, layer.in * 9);
  Tensor y(layer.out, out_dim(cache.in_height, s), out_dim(cache.in_width, s));
  y.data.noalias() = w * cache.cols;
  if (layer.bias) {
    y.data.colwise() +=
        Eigen::Map<const Vector>(params.data() + layer.offset + layer.weight_count(), layer.out);
  }
  return y;
}

Tensor conv_backward(const ConvLayer& layer, std::span<const double> params,
                     const ConvCache& cache, const Tensor& grad_out, std::span<double> grad) {
  const int s = layer.stride;
  const int k = layer.in * 9;
  const int oh = grad_out.height, ow = grad_out.width;
  Eigen::Map<const RowMajor> w(params.data() + layer.offset, layer.out, k);
  Eigen::Map<RowMajor> gw(grad.data() + layer.offset, layer.out, k);
  gw.noalias() += grad_out.data * cache.cols.transpose();
  if (layer.bias) {
    Eigen::Map<Vector>(grad.data() + layer.offset + layer.weight_count(), layer.out) +=
        grad_out.data.rowwise().sum();
  }
  const Matrix dcols = w.transpose() * grad_out.data;
  Tensor dx(layer.in, cache.in_height, cache.in_width);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = std::clamp(oy * s + ky - 1, 0, cache.in_height - 1);
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = std::clamp(ox * s + kx - 1, 0, cache.in_width - 1);
          const Eigen::Index dst = static_cast<Eigen::Index>(iy) * cache.in_width + ix;
          const int tap = ky * 3 + kx;
          for (int c = 0; c < layer.in; ++c) dx.data(c, dst) += dcols(c * 9 + tap, col);
        }
      }
    }
  }
  return dx;
}

// --- dense ----------------------------------------------------------------------

Vector linear_forward(const LinearLayer& layer, std::span<const double> params, const Vector& x) {
  Eigen::Map<const RowMajor> w(params.data() + layer.offset, layer.out, layer.in);
  Eigen::Map<const Vector> b(params.data() + layer.offset + static_cast<std::size_t>(layer.out) * layer.in,
                             layer.out);
  return w * x + b;
}

Vector linear_backward(const LinearLayer& layer, std::span<const double> params, const Vector& x,
                       const Vector& grad_out, std::span<double> grad) {
  const std::size_t wc = static_cast<std::size_t>(layer.out) * layer.in;
  Eigen::Map<const RowMajor> w(params.data() + layer.offset, layer.out, layer.in);
  Eigen::Map<RowMajor> gw(grad.data() + layer.offset, layer.out, layer.in);
  Eigen::Map<Vector> gb(grad.data() + layer.offset + wc, layer.out);
  gw.noalias() += grad_out * x.transpose();
  gb += grad_out;
  return w.transpose() * grad_out;
}

// --- activations / pooling -------------------------------------------------------

void relu_inplace(Tensor& t) { t.data = t.data.cwiseMax(0.0); }

void relu_backward(const Tensor& activation, Tensor& grad) {
  grad.data = (activation.data.array() > 0.0).select(grad.data, 0.0);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Vector mean_std_pool(const Tensor& t) {
  const Eigen::Index c = t.channels;
  const double n = static_cast<double>(t.data.cols());
  Vector out(2 * c);
  for (Eigen::Index i = 0; i < c; ++i) {
    const double mean = t.data.row(i).sum() / n;
    const double var = (t.data.row(i).array() - mean).square().sum() / n;
    out(i) = mean;
    out(c + i) = std::sqrt(var + kPoolEps);
  }
  return out;
}

Tensor mean_std_pool_backward(const Tensor& t, const Vector& pooled, const Vector& grad_pooled) {
  const Eigen::Index c = t.channels;
  const double n = static_cast<double>(t.data.cols());
  Tensor dx(t.channels, t.height, t.width);
  for (Eigen::Index i = 0; i < c; ++i) {
    const double mean = pooled(i), sd = pooled(c + i);
    // d mean / dx = 1/n ; d sd / dx = (x - mean) / (n * sd)
    dx.data.row(i).array() =
        grad_pooled(i) / n + grad_pooled(c + i) * (t.data.row(i).array() - mean) / (n * sd);
  }
  return dx;
}

void init_uniform(std::span<double> params, std::size_t offset, std::size_t count, int fan_in,
                  Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (std::size_t i = 0; i < count; ++i) params[offset + i] = rng.uniform(-bound, bound);
}

// --- Adam --------------------------------------------------------------------------

Adam::Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {
  if (!(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be non-negative");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / c1, vhat = v_[i] / c2;
    params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and non-negative");
  }
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (cfg.epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0");
}

void round_to_float(std::span<double> params) {
  for (double& p : params) p = static_cast<double>(static_cast<float>(p));
}

}  // namespace fusemetrics::nn
