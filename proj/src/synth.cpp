#include "fusemetrics/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fusemetrics/batch.hpp"
#include "fusemetrics/environment.hpp"
#include "fusemetrics/error.hpp"
#include "fusemetrics/nn.hpp"

namespace fusemetrics::synth {

namespace {

constexpr std::array<std::string_view, kMethodCount> kNames = {
    "average",       "max",         "laplacian_blend", "weighted_0.1",
    "weighted_0.3",  "weighted_0.7", "weighted_0.9",   "noisy_0.02",
    "noisy_0.05",    "noisy_0.10",  "blur_1",          "blur_2",
    "ir_only",       "vis_only",    "contrast_crushed", "artifact_blocky"};

constexpr std::array<int, kMethodCount> kApriori = {
    2,   // average
    3,   // max
    1,   // laplacian_blend
    8,   // weighted_0.1
    4,   // weighted_0.3
    5,   // weighted_0.7
    9,   // weighted_0.9
    6,   // noisy_0.02
    10,  // noisy_0.05
    12,  // noisy_0.10
    7,   // blur_1
    11,  // blur_2
    15,  // ir_only
    16,  // vis_only
    14,  // contrast_crushed
    13,  // artifact_blocky
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Mixes every pixel's bit pattern so per-method noise differs between scenes.
std::uint64_t content_hash(const GrayImage& img) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (double v : img.pixels()) h = splitmix(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

GrayImage clamp_image(Raster r) { return GrayImage::from_raster_clamped(std::move(r)); }

Raster blend(const GrayImage& ir, const GrayImage& vis, double w_ir) {
  Raster out(ir.width(), ir.height());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out.data[p] = w_ir * ir.pixels()[p] + (1.0 - w_ir) * vis.pixels()[p];
  }
  return out;
}

Raster blur(const Raster& r, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto k = gaussian_kernel(2 * radius + 1, sigma);
  return filter_separable(r, k, k);
}

Raster add_noise(Raster r, double sigma, std::uint64_t seed) {
  nn::Rng rng(seed);
  for (double& v : r.data) v += sigma * rng.normal();
  return r;
}

Raster laplacian_blend(const GrayImage& ir, const GrayImage& vis) {
  const Raster base_ir = blur(ir.raster(), 1.0);
  const Raster base_vis = blur(vis.raster(), 1.0);
  Raster out(ir.width(), ir.height());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double d_ir = ir.pixels()[p] - base_ir.data[p];
    const double d_vis = vis.pixels()[p] - base_vis.data[p];
    out.data[p] = 0.5 * (base_ir.data[p] + base_vis.data[p]) +
                  (std::abs(d_ir) > std::abs(d_vis) ? d_ir : d_vis);
  }
  return out;
}

Raster contrast_crushed(const Raster& avg) {
  double mean = 0.0;
  for (double v : avg.data) mean += v;
  mean /= static_cast<double>(avg.size());
  Raster out = avg;
  for (double& v : out.data) v = mean + 0.25 * (v - mean);
  return out;
}

Raster blocky(Raster avg, std::uint64_t seed) {
  nn::Rng rng(seed);
  const int bx = (avg.width + 7) / 8, by = (avg.height + 7) / 8;
  std::vector<double> offset(static_cast<std::size_t>(bx) * by);
  for (double& o : offset) o = rng.uniform(-0.1, 0.1);
  for (int y = 0; y < avg.height; ++y)
    for (int x = 0; x < avg.width; ++x) avg(x, y) += offset[static_cast<std::size_t>(y / 8) * bx + x / 8];
  return avg;
}

}  // namespace

ScenePair gen_pair(const SceneSpec& spec) {
  if (spec.width < kMinSceneDim || spec.height < kMinSceneDim) {
    throw Error(ErrorCode::TooSmall, "gen_pair: scenes must be at least 32x32");
  }
  if (spec.n_targets < 0 || !(spec.texture_scale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gen_pair: invalid SceneSpec");
  }
  nn::Rng rng(spec.seed);
  const int w = spec.width, h = spec.height;
  const double min_dim = std::min(w, h);
  ScenePair out;

  // Infrared: dark, slowly varying background with warm Gaussian blobs.
  const double bg = rng.uniform(0.08, 0.2);
  const double bg_tilt = rng.uniform(-0.05, 0.05);
  struct Blob {
    double cx, cy, sigma, amp;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < spec.n_targets; ++i) {
    Blob b;
    b.cx = std::floor(rng.uniform(0.15, 0.85) * w);
    b.cy = std::floor(rng.uniform(0.15, 0.85) * h);
    b.sigma = rng.uniform(0.04, 0.09) * min_dim;
    b.amp = rng.uniform(0.9, 1.0);
    blobs.push_back(b);
    out.blob_centers.push_back({static_cast<int>(b.cx), static_cast<int>(b.cy)});
  }
  Raster ir(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = bg + bg_tilt * (static_cast<double>(y) / h - 0.5);
      for (const Blob& b : blobs) {
        const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        v = std::max(v, b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma)));
      }
      ir(x, y) = v + rng.uniform(-0.02, 0.02);
    }
  out.ir = clamp_image(std::move(ir));

  // Visible: band-limited sinusoid texture over a linear illumination ramp;
  // warm targets appear as darker, smoother patches.
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double cycles = spec.texture_scale * rng.uniform(0.6, 1.6);
    waves.push_back({cycles * std::cos(angle) / w, cycles * std::sin(angle) / h,
                     rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.04, 0.08)});
  }
  const double ramp_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ramp = rng.uniform(0.1, 0.25);
  const double level = rng.uniform(0.45, 0.6);
  Raster vis(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) / w - 0.5, v = static_cast<double>(y) / h - 0.5;
      double tex = 0.0;
      for (const Wave& wv : waves) {
        tex += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
      }
      double shade = 1.0;
      for (const Blob& b : blobs) {
        const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        shade -= 0.35 * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      vis(x, y) = shade * (level + ramp * (u * std::cos(ramp_angle) + v * std::sin(ramp_angle)) + tex);
    }
  if (spec.regime == Regime::Night) {
    for (double& p : vis.data) p = kNightGain * std::clamp(p, 0.0, 1.0) + 0.02 * rng.normal();
  }
  out.vis = clamp_image(std::move(vis));
  return out;
}

const std::array<std::string_view, kMethodCount>& method_names() { return kNames; }

const std::array<int, kMethodCount>& apriori_ranks() { return kApriori; }

int apriori_rank(std::string_view method) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == method) return kApriori[i];
  }
  throw Error(ErrorCode::InvalidArgument, "unknown synthetic method '" + std::string(method) + "'");
}

std::vector<NamedFusion> gen_fusions(const GrayImage& ir, const GrayImage& vis) {
  require_same_dims(ir, vis, "gen_fusions");
  const std::uint64_t content = splitmix(content_hash(ir) ^ (content_hash(vis) << 1));
  auto method_seed = [content](std::size_t index) { return splitmix(content + index); };
  const Raster avg = blend(ir, vis, 0.5);

  std::vector<NamedFusion> out;
  auto push = [&out](std::size_t index, Raster r) {
    out.push_back({std::string(kNames[index]), GrayImage::from_raster_clamped(std::move(r))});
  };
  push(0, avg);
  Raster mx(ir.width(), ir.height());
  for (std::size_t p = 0; p < mx.size(); ++p) mx.data[p] = std::max(ir.pixels()[p], vis.pixels()[p]);
  push(1, std::move(mx));
  push(2, laplacian_blend(ir, vis));
  push(3, blend(ir, vis, 0.1));
  push(4, blend(ir, vis, 0.3));
  push(5, blend(ir, vis, 0.7));
  push(6, blend(ir, vis, 0.9));
  push(7, add_noise(avg, 0.02, method_seed(7)));
  push(8, add_noise(avg, 0.05, method_seed(8)));
  push(9, add_noise(avg, 0.10, method_seed(9)));
  push(10, blur(avg, 1.0));
  push(11, blur(avg, 2.0));
  out.push_back({std::string(kNames[12]), ir});
  out.push_back({std::string(kNames[13]), vis});
  push(14, contrast_crushed(avg));
  push(15, blocky(avg, method_seed(15)));
  return out;
}

std::vector<NamedFusion> gen_noise_ladder(const GrayImage& ir, const GrayImage& vis,
                                          std::size_t count, double step) {
  require_same_dims(ir, vis, "gen_noise_ladder");
  const std::uint64_t content = splitmix(content_hash(ir) ^ (content_hash(vis) << 1));
  const Raster avg = blend(ir, vis, 0.5);
  std::vector<NamedFusion> out;
  for (std::size_t k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "noise_%02zu", k);
    out.push_back({name, clamp_image(add_noise(avg, step * static_cast<double>(k),
                                               splitmix(content ^ (0xA5A5ull + k))))});
  }
  return out;
}

std::vector<SceneSpec> manifest(std::size_t count, std::uint64_t base_seed, int width, int height) {
  std::vector<SceneSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    SceneSpec s;
    s.seed = splitmix(base_seed * 0x100000001B3ull + i);
    s.width = width;
    s.height = height;
    s.regime = i % 2 == 0 ? Regime::Day : Regime::Night;
    s.n_targets = 1 + static_cast<int>(i % 4);
    s.texture_scale = 4.0 + static_cast<double>(i % 5);
    out.push_back(s);
  }
  return out;
}

std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03zu", index);
  return buf;
}

std::vector<probe::ProbeSample> probe_samples(std::span<const SceneSpec> specs) {
  std::vector<probe::ProbeSample> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ScenePair pair = gen_pair(specs[i]);
    Raster fused;
    switch (i % 3) {
      case 0: fused = blend(pair.ir, pair.vis, 0.5); break;
      case 1: {
        fused = Raster(pair.ir.width(), pair.ir.height());
        for (std::size_t p = 0; p < fused.size(); ++p) {
          fused.data[p] = std::max(pair.ir.pixels()[p], pair.vis.pixels()[p]);
        }
        break;
      }
      default: fused = laplacian_blend(pair.ir, pair.vis); break;
    }
    out.push_back({std::move(pair.ir), std::move(pair.vis), clamp_image(std::move(fused))});
  }
  return out;
}

void write_dataset(const std::filesystem::path& root, std::span<const SceneSpec> specs,
                   int workers) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root / "ir", ec);
  fs::create_directories(root / "vis", ec);
  for (std::string_view m : kNames) fs::create_directories(root / "fused" / std::string(m), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create dataset under " + root.string());

  std::vector<env::RawLabel> labels(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    const std::string id = scene_id(i);
    const ScenePair pair = gen_pair(specs[i]);
    save_pgm(pair.ir, root / "ir" / (id + ".pgm"));
    save_pgm(pair.vis, root / "vis" / (id + ".pgm"));
    for (const NamedFusion& f : gen_fusions(pair.ir, pair.vis)) {
      save_pgm(f.fused, root / "fused" / f.method / (id + ".pgm"));
    }
    const auto [s_ill, s_obs] = env::env_heuristic(pair.vis);
    labels[i] = {id, s_ill, s_obs};
  });
  env::write_label_file(root / "env_labels.json", labels);
}

}  // namespace fusemetrics::synth
