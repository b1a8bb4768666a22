#pragma once

// Environment-aware weighting: per-scene illumination/obscuration labels,
// their min-max normalization onto [0, 0.5], the ENV weight and the
// adjusted score Q* = q_ir + q_vis - ENV * (q_vis - q_ir).

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusemetrics/decomposition.hpp"
#include "fusemetrics/image.hpp"
#include "fusemetrics/metrics.hpp"

namespace fusemetrics::env {

struct RawLabel {
  std::string scene_id;
  double s_ill = 0.0;
  double s_obs = 0.0;
};

struct EnvLabel {
  std::string scene_id;
  double s_ill_raw = 0.0;
  double s_obs_raw = 0.0;
  double s_ill_norm = 0.0;  // [0, 0.5]
  double s_obs_norm = 0.0;  // [0, 0.5]
  double env = 0.0;         // s_ill_norm + s_obs_norm
};

struct LabelSet {
  std::vector<EnvLabel> labels;
  // Set when every raw value of the attribute was equal; the attribute is
  // then normalized to 0.25 for all scenes.
  bool ill_degenerate = false;
  bool obs_degenerate = false;

  const EnvLabel* find(const std::string& scene_id) const;
};

inline constexpr double kNormalizedMax = 0.5;
inline constexpr double kDegenerateMidpoint = 0.25;

/// Min-max normalization over the whole set, per attribute.
LabelSet normalize_labels(std::span<const RawLabel> raw);

/// JSON array of {"scene_id", "s_ill", "s_obs"} objects.
std::vector<RawLabel> read_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path, std::span<const RawLabel> labels);

struct HeuristicConfig {
  double gradient_scale = 0.15;  // mean Sobel magnitude treated as fully unobscured
};

/// Deterministic stand-in for model-generated labels, computed from the
/// visible image: s_ill = 1 - mean intensity, s_obs = 1 - clamp(mean |Sobel|
/// / gradient_scale, 0, 1).
std::pair<double, double> env_heuristic(const GrayImage& vis, const HeuristicConfig& cfg = {});

struct AdjustedScore {
  metrics::MetricId metric = metrics::MetricId::SSIM;
  double q_ir = 0.0;
  double q_vis = 0.0;
  double delta = 0.0;  // q_vis - q_ir
  double env = 0.0;
  double q_star = 0.0;
};

/// Throws EnvOutOfRange unless env is in [0, 1].
AdjustedScore adjusted_score(double q_ir, double q_vis, double env,
                             metrics::MetricId metric = metrics::MetricId::SSIM);

using AdjustedMap = std::map<metrics::MetricId, AdjustedScore>;

/// Classical path: q_ir = Q(I_ir, ir_hat), q_vis = Q(I_vis, vis_hat) for every
/// full-reference metric (QABF in pairwise form), combined with `env`.
AdjustedMap adjusted_all(const metrics::FusionTriple& triple, const probe::DecomposedPair& pair,
                         double env);

}  // namespace fusemetrics::env
