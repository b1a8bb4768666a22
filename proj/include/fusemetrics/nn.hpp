#pragma once

// Minimal building blocks for the two small networks in this project (the
// decomposition probe and the surrogate evaluator): 3x3 convolutions with
// edge-replicated borders, a dense layer, mean/std pooling and Adam.
//
// Parameters of a network live in one flat vector; layers only remember
// their offset into it. Gradients use the same layout, which keeps the
// optimizer, serialization and finite-difference checks trivial.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fusemetrics/image.hpp"

namespace fusemetrics::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// channels x (height * width); column p is pixel p in row-major order.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix data;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(Matrix::Zero(c, h * w)) {}
};

Tensor from_raster(const Raster& r);
Raster channel_raster(const Tensor& t, int channel);
/// Stacks tensors of equal spatial size along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Deterministic, platform-independent random source.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  std::size_t index(std::size_t n);       // [0, n)
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct ConvLayer {
  int in = 0;
  int out = 0;
  int stride = 1;
  std::size_t offset = 0;  // weights [out][in][3][3] then bias [out]
  bool bias = true;

  std::size_t weight_count() const { return static_cast<std::size_t>(out) * in * 9; }
  std::size_t param_count() const { return weight_count() + (bias ? out : 0); }
  int fan_in() const { return in * 9; }
};

struct ConvCache {
  Matrix cols;
  int in_height = 0;
  int in_width = 0;
};

/// Output spatial size is ceil(dim / stride); output pixel (x, y) is centred
/// on input pixel (x * stride, y * stride).
Tensor conv_forward(const ConvLayer& layer, std::span<const double> params, const Tensor& x,
                    ConvCache* cache = nullptr);
/// Same as conv_forward on the input that filled `cache`, skipping im2col.
/// The layer must match that call's input channels and stride.
Tensor conv_forward_cached(const ConvLayer& layer, std::span<const double> params,
                           const ConvCache& cache);
/// Accumulates parameter gradients into `grad` and returns dL/dx.
Tensor conv_backward(const ConvLayer& layer, std::span<const double> params,
                     const ConvCache& cache, const Tensor& grad_out, std::span<double> grad);

struct LinearLayer {
  int in = 0;
  int out = 0;
  std::size_t offset = 0;  // weights [out][in] then bias [out]

  std::size_t param_count() const { return static_cast<std::size_t>(out) * in + out; }
  int fan_in() const { return in; }
};

Vector linear_forward(const LinearLayer& layer, std::span<const double> params, const Vector& x);
Vector linear_backward(const LinearLayer& layer, std::span<const double> params, const Vector& x,
                       const Vector& grad_out, std::span<double> grad);

void relu_inplace(Tensor& t);
/// grad *= (activation > 0)
void relu_backward(const Tensor& activation, Tensor& grad);
double sigmoid(double v);

inline constexpr double kPoolEps = 1e-8;

/// Per-channel [mean_0..mean_{C-1}, std_0..std_{C-1}]; std = sqrt(var + eps).
Vector mean_std_pool(const Tensor& t);
Tensor mean_std_pool_backward(const Tensor& t, const Vector& pooled, const Vector& grad_pooled);

/// Uniform in +-sqrt(1 / fan_in) for weights and bias.
void init_uniform(std::span<double> params, std::size_t offset, std::size_t count, int fan_in,
                  Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t size, AdamConfig cfg);
  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

/// Minibatch training settings shared by the probe and the surrogate.
struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 30;
  std::uint64_t seed = 0;
  AdamConfig adam() const { return AdamConfig{learning_rate, 0.9, 0.999, 1e-8}; }
};

void validate(const TrainConfig& cfg);

/// Rounds every value to the nearest 32-bit float, the precision in which
/// parameters are stored on disk.
void round_to_float(std::span<double> params);

}  // namespace fusemetrics::nn
