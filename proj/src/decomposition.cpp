#include "fusemetrics/decomposition.hpp"

#include <cmath>
#include <numeric>

#include "fusemetrics/error.hpp"
#include "fusemetrics/serialize.hpp"

namespace fusemetrics::probe {

namespace {

constexpr char kProbeMagic[] = "IPRB";

ProbeArchitecture build_architecture() {
  ProbeArchitecture a;
  std::size_t offset = 0;
  auto conv = [&offset](int in, int out, bool bias) {
    nn::ConvLayer l{in, out, 1, offset, bias};
    offset += l.param_count();
    return l;
  };
  // No layer has a bias and every activation maps 0 to 0, so a blank input
  // decodes to blank components.
  a.enc1 = conv(1, 8, false);
  a.enc2 = conv(8, 8, false);
  a.enc3 = conv(8, 8, false);
  a.ir1 = conv(8, 8, false);
  a.ir2 = conv(8, 1, false);
  a.vis1 = conv(8, 8, false);
  a.vis2 = conv(8, 1, false);
  a.param_count = offset;
  return a;
}

struct HeadPass {
  nn::ConvCache c1, c2;
  nn::Tensor h1;   // after ReLU
  nn::Tensor out;  // after tanh
};

struct ForwardPass {
  nn::ConvCache c1, c2, c3;
  nn::Tensor a1, a2, a3;
  HeadPass ir, vis;
};

void head_forward(const nn::ConvLayer& l1, const nn::ConvLayer& l2, std::span<const double> p,
                  const nn::Tensor& features, HeadPass& head) {
  head.h1 = nn::conv_forward(l1, p, features, &head.c1);
  nn::relu_inplace(head.h1);
  head.out = nn::conv_forward(l2, p, head.h1, &head.c2);
  head.out.data = head.out.data.array().tanh();
}

ForwardPass forward(const ProbeParams& params, const nn::Tensor& x) {
  const auto& arch = probe_architecture();
  std::span<const double> p = params.values;
  ForwardPass f;
  f.a1 = nn::conv_forward(arch.enc1, p, x, &f.c1);
  nn::relu_inplace(f.a1);
  f.a2 = nn::conv_forward(arch.enc2, p, f.a1, &f.c2);
  nn::relu_inplace(f.a2);
  f.a3 = nn::conv_forward(arch.enc3, p, f.a2, &f.c3);
  nn::relu_inplace(f.a3);
  head_forward(arch.ir1, arch.ir2, p, f.a3, f.ir);
  head_forward(arch.vis1, arch.vis2, p, f.a3, f.vis);
  return f;
}

// dL/d(features) for one head given dL/d(output).
nn::Tensor head_backward(const nn::ConvLayer& l1, const nn::ConvLayer& l2,
                         std::span<const double> p, const HeadPass& head, nn::Tensor grad_out,
                         std::span<double> grad) {
  grad_out.data.array() *= 1.0 - head.out.data.array().square();
  nn::Tensor g = nn::conv_backward(l2, p, head.c2, grad_out, grad);
  nn::relu_backward(head.h1, g);
  return nn::conv_backward(l1, p, head.c1, g, grad);
}

GrayImage tensor_to_image(const nn::Tensor& t) {
  return GrayImage::from_raster_clamped(nn::channel_raster(t, 0));
}

double sample_loss(const ForwardPass& f, const ProbeSample& s, nn::Tensor* g_ir, nn::Tensor* g_vis,
                   double scale) {
  const auto n = static_cast<Eigen::Index>(s.fused.size());
  Eigen::Map<const Eigen::RowVectorXd> ir(s.ir.pixels().data(), n);
  Eigen::Map<const Eigen::RowVectorXd> vis(s.vis.pixels().data(), n);
  const Eigen::RowVectorXd d_ir = f.ir.out.data.row(0) - ir;
  const Eigen::RowVectorXd d_vis = f.vis.out.data.row(0) - vis;
  const double loss = (d_ir.squaredNorm() + d_vis.squaredNorm()) / static_cast<double>(n);
  if (g_ir) {
    *g_ir = nn::Tensor(1, s.fused.height(), s.fused.width());
    g_ir->data.row(0) = d_ir * (2.0 * scale / static_cast<double>(n));
  }
  if (g_vis) {
    *g_vis = nn::Tensor(1, s.fused.height(), s.fused.width());
    g_vis->data.row(0) = d_vis * (2.0 * scale / static_cast<double>(n));
  }
  return loss;
}

void check_sample(const ProbeSample& s) {
  require_same_dims(s.ir, s.fused, "probe sample");
  require_same_dims(s.vis, s.fused, "probe sample");
  require_min_dims(s.fused, kProbeMinDim, kProbeMinDim, "probe sample");
}

}  // namespace

const ProbeArchitecture& probe_architecture() {
  static const ProbeArchitecture arch = build_architecture();
  return arch;
}

ProbeParams ProbeParams::initialize(std::uint64_t seed) {
  const auto& arch = probe_architecture();
  ProbeParams p;
  p.values.assign(arch.param_count, 0.0);
  nn::Rng rng(seed);
  for (const nn::ConvLayer* l :
       {&arch.enc1, &arch.enc2, &arch.enc3, &arch.ir1, &arch.ir2, &arch.vis1, &arch.vis2}) {
    nn::init_uniform(p.values, l->offset, l->param_count(), l->fan_in(), rng);
  }
  nn::round_to_float(p.values);
  return p;
}

std::size_t ProbeParams::serialized_bytes() const { return kParamHeaderBytes + 4 * values.size(); }

DecomposedPair decompose(const GrayImage& fused, const ProbeParams& params) {
  require_min_dims(fused, kProbeMinDim, kProbeMinDim, "decompose");
  if (params.values.size() != probe_architecture().param_count) {
    throw Error(ErrorCode::InvalidArgument, "probe parameter count mismatch");
  }
  const auto& arch = probe_architecture();
  std::span<const double> p = params.values;
  nn::Tensor a = nn::from_raster(fused.raster());
  for (const nn::ConvLayer* l : {&arch.enc1, &arch.enc2, &arch.enc3}) {
    a = nn::conv_forward(*l, p, a);
    nn::relu_inplace(a);
  }
  // Both heads read the same encoder output: gather its patches once.
  nn::ConvCache patches;
  nn::Tensor ir_h1 = nn::conv_forward(arch.ir1, p, a, &patches);
  auto head = [&](const nn::ConvLayer& l1, const nn::ConvLayer& l2) {
    nn::Tensor h = &l1 == &arch.ir1 ? std::move(ir_h1) : nn::conv_forward_cached(l1, p, patches);
    nn::relu_inplace(h);
    nn::Tensor out = nn::conv_forward(l2, p, h);
    out.data = out.data.array().tanh();
    return tensor_to_image(out);
  };
  return {head(arch.ir1, arch.ir2), head(arch.vis1, arch.vis2)};
}

double reconstruction_loss(const ProbeParams& params, const ProbeSample& sample) {
  check_sample(sample);
  const ForwardPass f = forward(params, nn::from_raster(sample.fused.raster()));
  return sample_loss(f, sample, nullptr, nullptr, 1.0);
}

double reconstruction_mse(const ProbeParams& params, std::span<const ProbeSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "reconstruction_mse: no samples");
  double total = 0.0;
  for (const ProbeSample& s : samples) total += reconstruction_loss(params, s);
  return total / static_cast<double>(samples.size());
}

double probe_loss_and_grad(const ProbeParams& params, std::span<const ProbeSample* const> batch,
                           std::span<double> grad) {
  const auto& arch = probe_architecture();
  std::span<const double> p = params.values;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const ProbeSample* s : batch) {
    check_sample(*s);
    const ForwardPass f = forward(params, nn::from_raster(s->fused.raster()));
    nn::Tensor g_ir, g_vis;
    loss += scale * sample_loss(f, *s, &g_ir, &g_vis, scale);
    nn::Tensor g = head_backward(arch.ir1, arch.ir2, p, f.ir, std::move(g_ir), grad);
    g.data += head_backward(arch.vis1, arch.vis2, p, f.vis, std::move(g_vis), grad).data;
    nn::relu_backward(f.a3, g);
    g = nn::conv_backward(arch.enc3, p, f.c3, g, grad);
    nn::relu_backward(f.a2, g);
    g = nn::conv_backward(arch.enc2, p, f.c2, g, grad);
    nn::relu_backward(f.a1, g);
    nn::conv_backward(arch.enc1, p, f.c1, g, grad);
  }
  return loss;
}

ProbeTrainResult train_probe(std::span<const ProbeSample> dataset, const nn::TrainConfig& cfg) {
  nn::validate(cfg);
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "train_probe: empty dataset");
  if (dataset.size() < kProbeMinSamples) {
    throw Error(ErrorCode::InvalidArgument,
                "train_probe: need at least " + std::to_string(kProbeMinSamples) + " samples, got " +
                    std::to_string(dataset.size()));
  }
  for (const ProbeSample& s : dataset) check_sample(s);

  ProbeTrainResult result;
  result.params = ProbeParams::initialize(cfg.seed);
  std::vector<double>& values = result.params.values;
  nn::Adam adam(values.size(), cfg.adam());
  nn::Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(dataset.size());
  std::vector<double> grad(values.size());
  std::vector<const ProbeSample*> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset[order[i]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = probe_loss_and_grad(result.params, batch, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "train_probe: loss became non-finite at epoch " +
                                                  std::to_string(epoch));
      }
      adam.step(values, grad);
      epoch_loss += loss;
      ++batches;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }
  nn::round_to_float(values);
  result.params.final_loss = result.loss_curve.empty() ? reconstruction_mse(result.params, dataset)
                                                       : result.loss_curve.back();
  return result;
}

void save_probe(const ProbeParams& params, const std::filesystem::path& path) {
  ParamFile file{kProbeMagic, kProbeFormatVersion, ProbeArchitecture::kLayerCount, params.values};
  write_param_file(path, file);
}

ProbeParams load_probe(const std::filesystem::path& path) {
  ParamFile file = read_param_file(path, kProbeMagic);
  if (file.version != kProbeFormatVersion || file.layer_count != ProbeArchitecture::kLayerCount ||
      file.values.size() != probe_architecture().param_count) {
    throw Error(ErrorCode::FormatError, path.string() + ": incompatible probe layout");
  }
  ProbeParams p;
  p.values = std::move(file.values);
  return p;
}

std::filesystem::path component_path(const std::filesystem::path& dir, const std::string& scene,
                                     const std::string& method, const char* modality) {
  return dir / (scene + "_" + method + "_" + modality + ".pgm");
}

void save_components(const std::filesystem::path& dir, const std::string& scene,
                     const std::string& method, const DecomposedPair& pair) {
  save_pgm(pair.ir_hat, component_path(dir, scene, method, "ir"));
  save_pgm(pair.vis_hat, component_path(dir, scene, method, "vis"));
}

DecomposedPair load_components(const std::filesystem::path& dir, const std::string& scene,
                               const std::string& method, const GrayImage& fused) {
  DecomposedPair pair;
  for (const char* modality : {"ir", "vis"}) {
    const auto path = component_path(dir, scene, method, modality);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::IoError, "missing component file " + path.string());
    }
    GrayImage img = load_gray(path);
    require_same_dims(img, fused, "load_components");
    (std::string(modality) == "ir" ? pair.ir_hat : pair.vis_hat) = std::move(img);
  }
  return pair;
}

}  // namespace fusemetrics::probe
