#pragma once

// Learned multi-metric evaluator. A fixed analytic filter bank feeds two
// small modality branches, each regressing the eight full-reference metric
// scores of an (anchor, candidate) pair, plus an environment branch that
// predicts the ENV weight from the visible image.
//
// All network work happens at a fixed analysis resolution: inputs are
// area-resampled to kAnalysisSize x kAnalysisSize first.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fusemetrics/decomposition.hpp"
#include "fusemetrics/environment.hpp"
#include "fusemetrics/image.hpp"
#include "fusemetrics/metrics.hpp"
#include "fusemetrics/nn.hpp"

namespace fusemetrics::surrogate {

inline constexpr int kFeatureChannels = 12;
inline constexpr int kFeatureMinDim = 16;
inline constexpr int kAnalysisSize = 64;
inline constexpr int kHeadCount = metrics::kFullReferenceCount;  // N = 8
inline constexpr std::uint32_t kFormatVersion = 1;

// Gabor bank: wavelength 4 px, Gaussian sigma 2 px, orientations 0/45/90/135 deg.
inline constexpr double kGaborWavelength = 4.0;
inline constexpr double kGaborSigma = 2.0;

using Targets = std::array<double, kHeadCount>;

enum class FeatureChannel {
  Input,
  Coarse,  // one pyramid level down, nearest-neighbour upsampled
  SobelX,
  SobelY,
  SobelMagnitude,
  Laplacian,
  Gabor0,
  Gabor45,
  Gabor90,
  Gabor135,
  LocalMean,
  LocalStd,
};

/// Throws TooSmall below 16x16. Output keeps the input's spatial size.
nn::Tensor features(const GrayImage& img);

enum class Modality { Ir, Vis };
enum class SampleKind { Positive, Negative };

struct BranchLayers {
  nn::ConvLayer conv1;  // 24 -> 16, stride 2
  nn::ConvLayer conv2;  // 16 -> 16, stride 2
  nn::LinearLayer head;  // 32 -> N
};

struct SurrogateArchitecture {
  BranchLayers ir;
  BranchLayers vis;
  nn::ConvLayer env_conv;     // 12 -> 8, stride 2
  nn::LinearLayer env_head;   // 16 -> 1
  // Per-head target mean then standard deviation. Fixed before training and
  // excluded from optimization: raw head outputs are in standardized units.
  std::size_t norm_offset = 0;
  std::size_t trainable_count = 0;
  std::size_t param_count = 0;
  static constexpr std::uint32_t kLayerCount = 9;
};

const SurrogateArchitecture& surrogate_architecture();

struct SurrogateParams {
  std::vector<double> values;
  std::uint64_t seed = 0;

  /// Random weights, identity target normalization.
  static SurrogateParams initialize(std::uint64_t seed);
  Targets target_mean() const;
  Targets target_std() const;
  void set_target_normalization(const Targets& mean, const Targets& std);
  std::size_t serialized_bytes() const;
};

/// Native-unit predictions for the N metrics, ordered as
/// metrics::kFullReferenceMetrics. Throws DimMismatch.
Targets forward_branch(const SurrogateParams& p, Modality modality, const GrayImage& anchor,
                       const GrayImage& candidate);
/// Throws TooSmall below 16x16.
double forward_env(const SurrogateParams& p, const GrayImage& vis);

/// Oracle targets: metrics::pairwise(id, anchor, candidate) for each head.
Targets oracle_targets(const GrayImage& anchor, const GrayImage& candidate);

struct TrainSample {
  Modality modality = Modality::Ir;
  GrayImage anchor;
  GrayImage candidate;
  Targets targets{};
  SampleKind kind = SampleKind::Positive;
};

struct EnvSample {
  GrayImage vis;
  double env = 0.0;
};

struct LossBatch {
  std::vector<TrainSample> samples;
  std::vector<EnvSample> env;
};

struct LossBreakdown {
  double total = 0.0;
  double ir = 0.0;
  double vis = 0.0;
  double env = 0.0;
};

/// L_total = L_ir + L_vis + L_env. Each modality term is MSE(positives) +
/// MSE(negatives) over all heads in standardized target units; L_env is the
/// MSE of the env prediction. Gradients are accumulated into `grad` when it
/// is non-empty. Throws EmptyDataset on an empty batch, NonFiniteLoss.
LossBreakdown loss_total(const SurrogateParams& p, const LossBatch& batch, std::span<double> grad);

/// One training scene at analysis resolution. `components[m]` is the probe
/// decomposition of fused method m.
struct SurrogateScene {
  std::string scene_id;
  GrayImage ir;
  GrayImage vis;
  std::vector<probe::DecomposedPair> components;
  double env = 0.0;
};

/// Resamples the sources and every fused image to the analysis resolution and
/// decomposes the fused images with the probe.
SurrogateScene make_scene(std::string scene_id, const GrayImage& ir, const GrayImage& vis,
                          std::span<const GrayImage> fused, const probe::ProbeParams& probe,
                          double env);

struct LossRow {
  int epoch = 0;
  LossBreakdown loss;
};

struct SurrogateTrainResult {
  SurrogateParams params;
  std::vector<LossRow> curve;
};

/// Each epoch draws one fused method per scene for the positive pairs and one
/// unrelated scene for the negative pairs, both from the seeded generator.
/// `workers` only parallelizes oracle target computation.
/// Throws EmptyDataset, InvalidArgument (fewer than two scenes), NonFiniteLoss.
SurrogateTrainResult train(std::span<const SurrogateScene> scenes, const nn::TrainConfig& cfg,
                           int workers = 1);

/// Probe decomposition, both branches and the env head, combined per metric
/// into adjusted scores. All work runs at the analysis resolution.
env::AdjustedMap predict_adjusted(const metrics::FusionTriple& triple,
                                  const probe::ProbeParams& probe, const SurrogateParams& p);
/// As predict_adjusted but with an externally supplied env weight.
env::AdjustedMap predict_adjusted(const metrics::FusionTriple& triple,
                                  const probe::ProbeParams& probe, const SurrogateParams& p,
                                  double env);

void save_surrogate(const SurrogateParams& p, const std::filesystem::path& path);
SurrogateParams load_surrogate(const std::filesystem::path& path);
/// CSV with header epoch,L_total,L_ir,L_vis,L_env.
std::string format_loss_curve(std::span<const LossRow> curve);

}  // namespace fusemetrics::surrogate
