#include "fusemetrics/environment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fusemetrics/error.hpp"

namespace fusemetrics::env {

const EnvLabel* LabelSet::find(const std::string& scene_id) const {
  for (const EnvLabel& l : labels) {
    if (l.scene_id == scene_id) return &l;
  }
  return nullptr;
}

LabelSet normalize_labels(std::span<const RawLabel> raw) {
  if (raw.empty()) throw Error(ErrorCode::EmptyDataset, "normalize_labels: no labels");
  for (const RawLabel& r : raw) {
    if (!std::isfinite(r.s_ill) || !std::isfinite(r.s_obs)) {
      throw Error(ErrorCode::NonFiniteScore, "normalize_labels: non-finite label for scene " +
                                                 r.scene_id);
    }
  }
  auto [ill_lo, ill_hi] = std::minmax_element(raw.begin(), raw.end(), [](auto& a, auto& b) {
    return a.s_ill < b.s_ill;
  });
  auto [obs_lo, obs_hi] = std::minmax_element(raw.begin(), raw.end(), [](auto& a, auto& b) {
    return a.s_obs < b.s_obs;
  });
  const double il = ill_lo->s_ill, ih = ill_hi->s_ill;
  const double ol = obs_lo->s_obs, oh = obs_hi->s_obs;

  LabelSet out;
  out.ill_degenerate = ih == il;
  out.obs_degenerate = oh == ol;
  auto scale = [](double v, double lo, double hi) {
    if (hi == lo) return kDegenerateMidpoint;
    return std::clamp(kNormalizedMax * (v - lo) / (hi - lo), 0.0, kNormalizedMax);
  };
  for (const RawLabel& r : raw) {
    EnvLabel l;
    l.scene_id = r.scene_id;
    l.s_ill_raw = r.s_ill;
    l.s_obs_raw = r.s_obs;
    l.s_ill_norm = scale(r.s_ill, il, ih);
    l.s_obs_norm = scale(r.s_obs, ol, oh);
    l.env = l.s_ill_norm + l.s_obs_norm;
    out.labels.push_back(std::move(l));
  }
  return out;
}

std::vector<RawLabel> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::ParseError, path.string() + ": expected a JSON array of labels");
  }
  std::vector<RawLabel> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    try {
      out.push_back({item.at("scene_id").get<std::string>(), item.at("s_ill").get<double>(),
                     item.at("s_obs").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ": label entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

void write_label_file(const std::filesystem::path& path, std::span<const RawLabel> labels) {
  nlohmann::json doc = nlohmann::json::array();
  for (const RawLabel& l : labels) {
    doc.push_back({{"scene_id", l.scene_id}, {"s_ill", l.s_ill}, {"s_obs", l.s_obs}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

std::pair<double, double> env_heuristic(const GrayImage& vis, const HeuristicConfig& cfg) {
  auto px = vis.pixels();
  const double mean = std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
  double grad = 0.0;
  if (vis.width() >= 3 && vis.height() >= 3) {
    const GradientField g = sobel(vis);
    grad = std::accumulate(g.magnitude.data.begin(), g.magnitude.data.end(), 0.0) /
           static_cast<double>(g.magnitude.size());
  }
  const double s_ill = std::clamp(1.0 - mean, 0.0, 1.0);
  const double s_obs = 1.0 - std::clamp(grad / cfg.gradient_scale, 0.0, 1.0);
  return {s_ill, s_obs};
}

AdjustedScore adjusted_score(double q_ir, double q_vis, double env, metrics::MetricId metric) {
  if (!(env >= 0.0 && env <= 1.0)) {
    throw Error(ErrorCode::EnvOutOfRange, "env weight " + std::to_string(env) + " outside [0, 1]");
  }
  AdjustedScore s;
  s.metric = metric;
  s.q_ir = q_ir;
  s.q_vis = q_vis;
  s.delta = q_vis - q_ir;
  s.env = env;
  s.q_star = q_ir + q_vis - env * s.delta;
  return s;
}

AdjustedMap adjusted_all(const metrics::FusionTriple& triple, const probe::DecomposedPair& pair,
                         double env) {
  metrics::validate(triple);
  require_same_dims(pair.ir_hat, triple.fused, "adjusted_all");
  require_same_dims(pair.vis_hat, triple.fused, "adjusted_all");
  AdjustedMap out;
  for (metrics::MetricId id : metrics::kFullReferenceMetrics) {
    const double q_ir = metrics::pairwise_or_zero(id, triple.ir, pair.ir_hat).value;
    const double q_vis = metrics::pairwise_or_zero(id, triple.vis, pair.vis_hat).value;
    out.emplace(id, adjusted_score(q_ir, q_vis, env, id));
  }
  return out;
}

}  // namespace fusemetrics::env
