#include "fusemetrics/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fusemetrics/batch.hpp"
#include "fusemetrics/csv.hpp"
#include "fusemetrics/error.hpp"
#include "fusemetrics/serialize.hpp"

namespace fusemetrics::surrogate {

namespace {

constexpr char kMagic[] = "EVNT";
constexpr int kBranchIn = 2 * kFeatureChannels;
constexpr int kBranchWidth = 16;
constexpr int kEnvWidth = 8;

// --- feature bank -------------------------------------------------------------

Raster upsample_nearest(const Raster& coarse, int width, int height) {
  Raster out(width, height);
  for (int y = 0; y < height; ++y) {
    const int cy = std::min(y / 2, coarse.height - 1);
    for (int x = 0; x < width; ++x) out(x, y) = coarse(std::min(x / 2, coarse.width - 1), cy);
  }
  return out;
}

Raster laplacian(const Raster& r) {
  Raster out(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      out(x, y) = r.clamped(x - 1, y) + r.clamped(x + 1, y) + r.clamped(x, y - 1) +
                  r.clamped(x, y + 1) - 4.0 * r(x, y);
    }
  return out;
}

struct GaborKernel {
  std::vector<double> xr, xi, yr, yi;
  std::complex<double> dc;  // response of the complex kernel to a unit constant
};

GaborKernel gabor_kernel(double theta) {
  const int radius = static_cast<int>(std::ceil(3.0 * kGaborSigma));
  const std::vector<double> g = gaussian_kernel(2 * radius + 1, kGaborSigma);
  const double k = 2.0 * std::numbers::pi / kGaborWavelength;
  GaborKernel out;
  std::complex<double> sx = 0.0, sy = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double gi = g[static_cast<std::size_t>(i + radius)];
    const std::complex<double> ex = gi * std::polar(1.0, k * i * std::cos(theta));
    const std::complex<double> ey = gi * std::polar(1.0, k * i * std::sin(theta));
    out.xr.push_back(ex.real());
    out.xi.push_back(ex.imag());
    out.yr.push_back(ey.real());
    out.yi.push_back(ey.imag());
    sx += ex;
    sy += ey;
  }
  out.dc = sx * sy;
  return out;
}

const std::array<GaborKernel, 4>& gabor_bank() {
  static const std::array<GaborKernel, 4> bank = {
      gabor_kernel(0.0), gabor_kernel(std::numbers::pi / 4), gabor_kernel(std::numbers::pi / 2),
      gabor_kernel(3 * std::numbers::pi / 4)};
  return bank;
}

// Magnitude of the zero-mean complex Gabor response.
Raster gabor_magnitude(const Raster& r, const GaborKernel& kern, const Raster& gauss_mean) {
  const Raster hr = filter_rows(r, kern.xr);
  const Raster hi = filter_rows(r, kern.xi);
  const Raster rr = filter_cols(hr, kern.yr);
  const Raster ii = filter_cols(hi, kern.yi);
  const Raster ri = filter_cols(hr, kern.yi);
  const Raster ir = filter_cols(hi, kern.yr);
  Raster out(r.width, r.height);
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double re = rr.data[p] - ii.data[p] - kern.dc.real() * gauss_mean.data[p];
    const double im = ri.data[p] + ir.data[p] - kern.dc.imag() * gauss_mean.data[p];
    out.data[p] = std::sqrt(re * re + im * im);
  }
  return out;
}

void set_channel(nn::Tensor& t, FeatureChannel c, const Raster& r, double scale = 1.0) {
  const auto row = static_cast<Eigen::Index>(c);
  for (std::size_t p = 0; p < r.size(); ++p) {
    t.data(row, static_cast<Eigen::Index>(p)) = scale * r.data[p];
  }
}

GrayImage at_analysis(const GrayImage& img) {
  if (img.width() == kAnalysisSize && img.height() == kAnalysisSize) return img;
  return resize_area(img, kAnalysisSize, kAnalysisSize);
}

// --- architecture --------------------------------------------------------------

SurrogateArchitecture build_architecture() {
  SurrogateArchitecture a;
  std::size_t offset = 0;
  auto conv = [&offset](int in, int out, int stride) {
    nn::ConvLayer l{in, out, stride, offset};
    offset += l.param_count();
    return l;
  };
  auto linear = [&offset](int in, int out) {
    nn::LinearLayer l{in, out, offset};
    offset += l.param_count();
    return l;
  };
  for (BranchLayers* b : {&a.ir, &a.vis}) {
    b->conv1 = conv(kBranchIn, kBranchWidth, 2);
    b->conv2 = conv(kBranchWidth, kBranchWidth, 2);
    b->head = linear(2 * kBranchWidth, kHeadCount);
  }
  a.env_conv = conv(kFeatureChannels, kEnvWidth, 2);
  a.env_head = linear(2 * kEnvWidth, 1);
  a.trainable_count = offset;
  a.norm_offset = offset;
  a.param_count = offset + 2 * kHeadCount;
  return a;
}

const BranchLayers& branch_of(Modality m) {
  const auto& a = surrogate_architecture();
  return m == Modality::Ir ? a.ir : a.vis;
}

struct BranchPass {
  nn::ConvCache c1, c2;
  nn::Tensor h1, h2;
  nn::Vector pooled;
  nn::Vector raw;
};

BranchPass branch_forward(const BranchLayers& l, std::span<const double> p, const nn::Tensor& x) {
  BranchPass f;
  f.h1 = nn::conv_forward(l.conv1, p, x, &f.c1);
  nn::relu_inplace(f.h1);
  f.h2 = nn::conv_forward(l.conv2, p, f.h1, &f.c2);
  nn::relu_inplace(f.h2);
  f.pooled = nn::mean_std_pool(f.h2);
  f.raw = nn::linear_forward(l.head, p, f.pooled);
  return f;
}

void branch_backward(const BranchLayers& l, std::span<const double> p, const BranchPass& f,
                     const nn::Vector& g_raw, std::span<double> grad) {
  const nn::Vector g_pool = nn::linear_backward(l.head, p, f.pooled, g_raw, grad);
  nn::Tensor g = nn::mean_std_pool_backward(f.h2, f.pooled, g_pool);
  nn::relu_backward(f.h2, g);
  g = nn::conv_backward(l.conv2, p, f.c2, g, grad);
  nn::relu_backward(f.h1, g);
  nn::conv_backward(l.conv1, p, f.c1, g, grad);
}

struct EnvPass {
  nn::ConvCache c;
  nn::Tensor h;
  nn::Vector pooled;
  double out = 0.0;
};

EnvPass env_forward(std::span<const double> p, const nn::Tensor& x) {
  const auto& a = surrogate_architecture();
  EnvPass f;
  f.h = nn::conv_forward(a.env_conv, p, x, &f.c);
  nn::relu_inplace(f.h);
  f.pooled = nn::mean_std_pool(f.h);
  f.out = nn::sigmoid(nn::linear_forward(a.env_head, p, f.pooled)(0));
  return f;
}

void env_backward(std::span<const double> p, const EnvPass& f, double g_out,
                  std::span<double> grad) {
  const auto& a = surrogate_architecture();
  nn::Vector g_logit(1);
  g_logit(0) = g_out * f.out * (1.0 - f.out);
  const nn::Vector g_pool = nn::linear_backward(a.env_head, p, f.pooled, g_logit, grad);
  nn::Tensor g = nn::mean_std_pool_backward(f.h, f.pooled, g_pool);
  nn::relu_backward(f.h, g);
  nn::conv_backward(a.env_conv, p, f.c, g, grad);
}

nn::Tensor branch_input(const GrayImage& anchor, const GrayImage& candidate) {
  require_same_dims(anchor, candidate, "surrogate branch");
  return nn::concat_channels(features(at_analysis(anchor)), features(at_analysis(candidate)));
}

void check_params(const SurrogateParams& p) {
  if (p.values.size() != surrogate_architecture().param_count) {
    throw Error(ErrorCode::InvalidArgument, "surrogate parameter count mismatch");
  }
}

}  // namespace

// --- features ----------------------------------------------------------------------

nn::Tensor features(const GrayImage& img) {
  require_min_dims(img, kFeatureMinDim, kFeatureMinDim, "features");
  const Raster& r = img.raster();
  nn::Tensor t(kFeatureChannels, r.height, r.width);
  set_channel(t, FeatureChannel::Input, r);
  set_channel(t, FeatureChannel::Coarse, upsample_nearest(pyramid_reduce(r), r.width, r.height));

  // Sobel responses reach 4 on a unit step; scale them to roughly [-1, 1].
  const GradientField g = sobel(r);
  set_channel(t, FeatureChannel::SobelX, g.gx, 0.25);
  set_channel(t, FeatureChannel::SobelY, g.gy, 0.25);
  set_channel(t, FeatureChannel::SobelMagnitude, g.magnitude, 0.25);
  set_channel(t, FeatureChannel::Laplacian, laplacian(r));

  const auto& bank = gabor_bank();
  const int radius = static_cast<int>(bank[0].xr.size() / 2);
  const std::vector<double> gk = gaussian_kernel(2 * radius + 1, kGaborSigma);
  const Raster gauss_mean = filter_separable(r, gk, gk);
  for (int o = 0; o < 4; ++o) {
    set_channel(t, static_cast<FeatureChannel>(static_cast<int>(FeatureChannel::Gabor0) + o),
                gabor_magnitude(r, bank[static_cast<std::size_t>(o)], gauss_mean));
  }

  const std::vector<double> box(5, 0.2);
  const Raster mean = filter_separable(r, box, box);
  Raster sq(r.width, r.height);
  for (std::size_t p = 0; p < r.size(); ++p) sq.data[p] = r.data[p] * r.data[p];
  const Raster mean_sq = filter_separable(sq, box, box);
  Raster stdev(r.width, r.height);
  for (std::size_t p = 0; p < r.size(); ++p) {
    stdev.data[p] = std::sqrt(std::max(0.0, mean_sq.data[p] - mean.data[p] * mean.data[p]));
  }
  set_channel(t, FeatureChannel::LocalMean, mean);
  set_channel(t, FeatureChannel::LocalStd, stdev);
  return t;
}

// --- parameters ----------------------------------------------------------------------

const SurrogateArchitecture& surrogate_architecture() {
  static const SurrogateArchitecture arch = build_architecture();
  return arch;
}

SurrogateParams SurrogateParams::initialize(std::uint64_t seed) {
  const auto& a = surrogate_architecture();
  SurrogateParams p;
  p.seed = seed;
  p.values.assign(a.param_count, 0.0);
  nn::Rng rng(seed);
  for (const BranchLayers* b : {&a.ir, &a.vis}) {
    nn::init_uniform(p.values, b->conv1.offset, b->conv1.param_count(), b->conv1.fan_in(), rng);
    nn::init_uniform(p.values, b->conv2.offset, b->conv2.param_count(), b->conv2.fan_in(), rng);
    nn::init_uniform(p.values, b->head.offset, b->head.param_count(), b->head.fan_in(), rng);
  }
  nn::init_uniform(p.values, a.env_conv.offset, a.env_conv.param_count(), a.env_conv.fan_in(), rng);
  nn::init_uniform(p.values, a.env_head.offset, a.env_head.param_count(), a.env_head.fan_in(), rng);
  Targets zero{}, one{};
  one.fill(1.0);
  p.set_target_normalization(zero, one);
  nn::round_to_float(p.values);
  return p;
}

Targets SurrogateParams::target_mean() const {
  Targets t{};
  std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(surrogate_architecture().norm_offset),
              kHeadCount, t.begin());
  return t;
}

Targets SurrogateParams::target_std() const {
  Targets t{};
  std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(surrogate_architecture().norm_offset +
                                                           kHeadCount),
              kHeadCount, t.begin());
  return t;
}

void SurrogateParams::set_target_normalization(const Targets& mean, const Targets& std) {
  const std::size_t off = surrogate_architecture().norm_offset;
  for (int k = 0; k < kHeadCount; ++k) {
    if (!(std[static_cast<std::size_t>(k)] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "target standard deviation must be positive");
    }
    values[off + static_cast<std::size_t>(k)] = mean[static_cast<std::size_t>(k)];
    values[off + kHeadCount + static_cast<std::size_t>(k)] = std[static_cast<std::size_t>(k)];
  }
}

std::size_t SurrogateParams::serialized_bytes() const {
  return kParamHeaderBytes + 4 * values.size();
}

// --- inference ---------------------------------------------------------------------------

Targets forward_branch(const SurrogateParams& p, Modality modality, const GrayImage& anchor,
                       const GrayImage& candidate) {
  check_params(p);
  const BranchPass f = branch_forward(branch_of(modality), p.values, branch_input(anchor, candidate));
  const Targets mean = p.target_mean(), sd = p.target_std();
  Targets out{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = mean[k] + sd[k] * f.raw(static_cast<Eigen::Index>(k));
  }
  return out;
}

double forward_env(const SurrogateParams& p, const GrayImage& vis) {
  check_params(p);
  require_min_dims(vis, kFeatureMinDim, kFeatureMinDim, "forward_env");
  return env_forward(p.values, features(at_analysis(vis))).out;
}

Targets oracle_targets(const GrayImage& anchor, const GrayImage& candidate) {
  Targets t{};
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k] = metrics::pairwise_or_zero(metrics::kFullReferenceMetrics[k], anchor, candidate).value;
  }
  return t;
}

// --- loss ------------------------------------------------------------------------------------

LossBreakdown loss_total(const SurrogateParams& p, const LossBatch& batch, std::span<double> grad) {
  check_params(p);
  if (batch.samples.empty() && batch.env.empty()) {
    throw Error(ErrorCode::EmptyDataset, "loss_total: empty batch");
  }
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != p.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_total: gradient buffer size mismatch");
  }
  const Targets mean = p.target_mean(), sd = p.target_std();

  // group sizes: [modality][kind]
  std::array<std::array<int, 2>, 2> count{};
  for (const TrainSample& s : batch.samples) {
    ++count[static_cast<int>(s.modality)][static_cast<int>(s.kind)];
  }

  LossBreakdown out;
  for (const TrainSample& s : batch.samples) {
    const BranchLayers& layers = branch_of(s.modality);
    const BranchPass f = branch_forward(layers, p.values, branch_input(s.anchor, s.candidate));
    const double denom =
        static_cast<double>(count[static_cast<int>(s.modality)][static_cast<int>(s.kind)]) *
        kHeadCount;
    nn::Vector g_raw(kHeadCount);
    double sq = 0.0;
    for (int k = 0; k < kHeadCount; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const double target = (s.targets[uk] - mean[uk]) / sd[uk];
      const double d = f.raw(k) - target;
      sq += d * d;
      g_raw(k) = 2.0 * d / denom;
    }
    (s.modality == Modality::Ir ? out.ir : out.vis) += sq / denom;
    if (want_grad) branch_backward(layers, p.values, f, g_raw, grad);
  }

  const double n_env = static_cast<double>(batch.env.size());
  for (const EnvSample& e : batch.env) {
    require_min_dims(e.vis, kFeatureMinDim, kFeatureMinDim, "loss_total env sample");
    const EnvPass f = env_forward(p.values, features(at_analysis(e.vis)));
    const double d = f.out - e.env;
    out.env += d * d / n_env;
    if (want_grad) env_backward(p.values, f, 2.0 * d / n_env, grad);
  }
  out.total = out.ir + out.vis + out.env;
  if (!std::isfinite(out.total)) throw Error(ErrorCode::NonFiniteLoss, "loss_total: non-finite loss");
  return out;
}

// --- training ----------------------------------------------------------------------------------

SurrogateScene make_scene(std::string scene_id, const GrayImage& ir, const GrayImage& vis,
                          std::span<const GrayImage> fused, const probe::ProbeParams& probe,
                          double env) {
  require_same_dims(ir, vis, "make_scene");
  SurrogateScene s;
  s.scene_id = std::move(scene_id);
  s.ir = at_analysis(ir);
  s.vis = at_analysis(vis);
  s.env = env;
  for (const GrayImage& f : fused) {
    require_same_dims(f, ir, "make_scene");
    s.components.push_back(probe::decompose(at_analysis(f), probe));
  }
  return s;
}

namespace {

struct PairTargets {
  Targets ir{};
  Targets vis{};
};

void check_scene(const SurrogateScene& s) {
  if (s.components.empty()) {
    throw Error(ErrorCode::InvalidArgument, "scene " + s.scene_id + " has no decomposed components");
  }
  require_same_dims(s.ir, s.vis, "training scene");
  require_min_dims(s.ir, kFeatureMinDim, kFeatureMinDim, "training scene");
  for (const auto& c : s.components) {
    require_same_dims(c.ir_hat, s.ir, "training scene");
    require_same_dims(c.vis_hat, s.vis, "training scene");
  }
  if (!(s.env >= 0.0 && s.env <= 1.0)) {
    throw Error(ErrorCode::EnvOutOfRange, "scene " + s.scene_id + ": env label outside [0, 1]");
  }
}

std::size_t draw_other(nn::Rng& rng, std::size_t u, std::size_t n) {
  std::size_t v = rng.index(n - 1);
  return v >= u ? v + 1 : v;
}

}  // namespace

SurrogateTrainResult train(std::span<const SurrogateScene> scenes, const nn::TrainConfig& cfg,
                           int workers) {
  nn::validate(cfg);
  if (scenes.empty()) throw Error(ErrorCode::EmptyDataset, "surrogate train: no scenes");
  if (scenes.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "surrogate train: negatives need at least two scenes");
  }
  for (const SurrogateScene& s : scenes) check_scene(s);
  const std::size_t n = scenes.size();

  // Positive targets for every (scene, method).
  std::vector<std::size_t> first(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) first[u + 1] = first[u] + scenes[u].components.size();
  std::vector<PairTargets> positive(first[n]);
  parallel_for(first[n], workers, [&](std::size_t i) {
    const std::size_t u = static_cast<std::size_t>(
        std::upper_bound(first.begin(), first.end(), i) - first.begin() - 1);
    const auto& c = scenes[u].components[i - first[u]];
    positive[i] = {oracle_targets(scenes[u].ir, c.ir_hat), oracle_targets(scenes[u].vis, c.vis_hat)};
  });

  std::map<std::pair<std::size_t, std::size_t>, PairTargets> negative;
  auto ensure_negatives = [&](const std::vector<std::size_t>& partner) {
    std::vector<std::pair<std::size_t, std::size_t>> missing;
    for (std::size_t u = 0; u < n; ++u) {
      if (!negative.count({u, partner[u]})) missing.emplace_back(u, partner[u]);
    }
    std::vector<PairTargets> computed(missing.size());
    parallel_for(missing.size(), workers, [&](std::size_t i) {
      const auto [u, v] = missing[i];
      computed[i] = {oracle_targets(scenes[u].ir, scenes[v].ir),
                     oracle_targets(scenes[u].vis, scenes[v].vis)};
    });
    for (std::size_t i = 0; i < missing.size(); ++i) negative[missing[i]] = computed[i];
  };

  // Target normalization from every positive pair and a fixed calibration
  // set of negatives (scene u against scene u + 1).
  std::vector<std::size_t> calibration(n);
  for (std::size_t u = 0; u < n; ++u) calibration[u] = (u + 1) % n;
  ensure_negatives(calibration);
  Targets sum{}, sum_sq{};
  double count = 0.0;
  auto accumulate = [&](const Targets& t) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      sum[k] += t[k];
      sum_sq[k] += t[k] * t[k];
    }
    count += 1.0;
  };
  for (const PairTargets& t : positive) {
    accumulate(t.ir);
    accumulate(t.vis);
  }
  for (std::size_t u = 0; u < n; ++u) {
    accumulate(negative.at({u, calibration[u]}).ir);
    accumulate(negative.at({u, calibration[u]}).vis);
  }
  Targets mean{}, sd{};
  for (std::size_t k = 0; k < mean.size(); ++k) {
    mean[k] = sum[k] / count;
    const double var = std::max(0.0, sum_sq[k] / count - mean[k] * mean[k]);
    sd[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  SurrogateTrainResult result;
  result.params = SurrogateParams::initialize(cfg.seed);
  result.params.set_target_normalization(mean, sd);
  nn::round_to_float(result.params.values);
  std::vector<double>& values = result.params.values;

  nn::Adam adam(values.size(), cfg.adam());
  nn::Rng rng(cfg.seed ^ 0xD1B54A32D192ED03ull);
  std::vector<double> grad(values.size());
  std::vector<std::size_t> method(n), partner(n), order(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t u = 0; u < n; ++u) {
      method[u] = rng.index(scenes[u].components.size());
      partner[u] = draw_other(rng, u, n);
    }
    ensure_negatives(partner);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    LossBreakdown epoch_loss;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      LossBatch batch;
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t u = order[i], v = partner[u];
        const SurrogateScene& s = scenes[u];
        const auto& comp = s.components[method[u]];
        const PairTargets& pos = positive[first[u] + method[u]];
        const PairTargets& neg = negative.at({u, v});
        batch.samples.push_back({Modality::Ir, s.ir, comp.ir_hat, pos.ir, SampleKind::Positive});
        batch.samples.push_back({Modality::Ir, s.ir, scenes[v].ir, neg.ir, SampleKind::Negative});
        batch.samples.push_back({Modality::Vis, s.vis, comp.vis_hat, pos.vis, SampleKind::Positive});
        batch.samples.push_back(
            {Modality::Vis, s.vis, scenes[v].vis, neg.vis, SampleKind::Negative});
        batch.env.push_back({s.vis, s.env});
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossBreakdown l = loss_total(result.params, batch, grad);
      adam.step(values, grad);
      epoch_loss.total += l.total;
      epoch_loss.ir += l.ir;
      epoch_loss.vis += l.vis;
      epoch_loss.env += l.env;
      ++batches;
    }
    const double b = static_cast<double>(batches);
    result.curve.push_back(
        {epoch, {epoch_loss.total / b, epoch_loss.ir / b, epoch_loss.vis / b, epoch_loss.env / b}});
  }
  nn::round_to_float(values);
  return result;
}

// --- one-pass evaluation ----------------------------------------------------------------------------

namespace {

// Feature stacks of one triple at the analysis size; the visible stack also
// feeds the env head.
struct AnalysisInputs {
  nn::Tensor ir, vis, ir_hat, vis_hat;
};

AnalysisInputs analysis_inputs(const metrics::FusionTriple& triple, const probe::ProbeParams& probe) {
  const probe::DecomposedPair pair = probe::decompose(at_analysis(triple.fused), probe);
  return {features(at_analysis(triple.ir)), features(at_analysis(triple.vis)), features(pair.ir_hat),
          features(pair.vis_hat)};
}

env::AdjustedMap adjusted_from(const SurrogateParams& p, const AnalysisInputs& in, double env) {
  const Targets mean = p.target_mean(), sd = p.target_std();
  const BranchPass fi = branch_forward(branch_of(Modality::Ir), p.values, nn::concat_channels(in.ir, in.ir_hat));
  const BranchPass fv =
      branch_forward(branch_of(Modality::Vis), p.values, nn::concat_channels(in.vis, in.vis_hat));
  env::AdjustedMap out;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out.emplace(metrics::kFullReferenceMetrics[k],
                env::adjusted_score(mean[k] + sd[k] * fi.raw(row), mean[k] + sd[k] * fv.raw(row), env,
                                    metrics::kFullReferenceMetrics[k]));
  }
  return out;
}

}  // namespace

env::AdjustedMap predict_adjusted(const metrics::FusionTriple& triple,
                                  const probe::ProbeParams& probe, const SurrogateParams& p,
                                  double env) {
  check_params(p);
  metrics::validate(triple);
  return adjusted_from(p, analysis_inputs(triple, probe), env);
}

env::AdjustedMap predict_adjusted(const metrics::FusionTriple& triple,
                                  const probe::ProbeParams& probe, const SurrogateParams& p) {
  check_params(p);
  metrics::validate(triple);
  require_min_dims(triple.vis, kFeatureMinDim, kFeatureMinDim, "predict_adjusted");
  const AnalysisInputs in = analysis_inputs(triple, probe);
  return adjusted_from(p, in, env_forward(p.values, in.vis).out);
}

// --- files -------------------------------------------------------------------------------------------

void save_surrogate(const SurrogateParams& p, const std::filesystem::path& path) {
  check_params(p);
  write_param_file(path, ParamFile{kMagic, kFormatVersion, SurrogateArchitecture::kLayerCount,
                                   p.values});
}

SurrogateParams load_surrogate(const std::filesystem::path& path) {
  ParamFile file = read_param_file(path, kMagic);
  if (file.version != kFormatVersion || file.layer_count != SurrogateArchitecture::kLayerCount ||
      file.values.size() != surrogate_architecture().param_count) {
    throw Error(ErrorCode::FormatError, path.string() + ": incompatible surrogate layout");
  }
  SurrogateParams p;
  p.values = std::move(file.values);
  const Targets sd = p.target_std();
  if (std::any_of(sd.begin(), sd.end(), [](double v) { return !(v > 0.0); })) {
    throw Error(ErrorCode::FormatError, path.string() + ": non-positive target scale");
  }
  return p;
}

std::string format_loss_curve(std::span<const LossRow> curve) {
  std::string out = csv::join_row(std::vector<std::string>{"epoch", "L_total", "L_ir", "L_vis", "L_env"});
  for (const LossRow& r : curve) {
    out += csv::join_row(std::vector<std::string>{
        std::to_string(r.epoch), csv::format_number(r.loss.total, 17),
        csv::format_number(r.loss.ir, 17), csv::format_number(r.loss.vis, 17),
        csv::format_number(r.loss.env, 17)});
  }
  return out;
}

}  // namespace fusemetrics::surrogate
