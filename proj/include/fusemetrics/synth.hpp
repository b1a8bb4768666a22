#pragma once

// Deterministic synthetic benchmark: paired pseudo-infrared / visible scenes,
// a family of 16 pseudo fusion methods with a known quality ordering, and
// the on-disk dataset layout the command line tool consumes.
//
// Generator: std::mt19937_64 seeded with SceneSpec::seed, uniform variates
// from the top 53 bits, normal variates by Box-Muller. No other entropy is
// used, so a SceneSpec regenerates the same bytes on every platform.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusemetrics/decomposition.hpp"
#include "fusemetrics/image.hpp"

namespace fusemetrics::synth {

enum class Regime { Day, Night };

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  Regime regime = Regime::Day;
  int n_targets = 3;           // warm blobs in the infrared image
  double texture_scale = 6.0;  // cycles of the dominant visible texture across the image
};

struct ScenePair {
  GrayImage ir;
  GrayImage vis;
  std::vector<std::array<int, 2>> blob_centers;  // (x, y)
};

inline constexpr int kMinSceneDim = 32;
inline constexpr double kNightGain = 0.25;

/// Throws TooSmall below 32x32.
ScenePair gen_pair(const SceneSpec& spec);

inline constexpr std::size_t kMethodCount = 16;

/// Method names in generation order.
const std::array<std::string_view, kMethodCount>& method_names();

/// A-priori quality rank of each method (1 = best): balanced clean blends,
/// then unbalanced blends and mild degradations, heavier degradations,
/// artifacts, and finally single-modality outputs.
const std::array<int, kMethodCount>& apriori_ranks();
int apriori_rank(std::string_view method);

struct NamedFusion {
  std::string method;
  GrayImage fused;
};

/// The 16 pseudo fusion methods applied to (ir, vis). Throws DimMismatch.
std::vector<NamedFusion> gen_fusions(const GrayImage& ir, const GrayImage& vis);

/// Average fusion plus zero-mean Gaussian noise with standard deviation
/// step * k for k = 0..count-1. The a-priori rank of entry k is k + 1.
std::vector<NamedFusion> gen_noise_ladder(const GrayImage& ir, const GrayImage& vis,
                                          std::size_t count = kMethodCount, double step = 0.01);

/// Specs for `count` scenes: alternating day/night, varying target count and
/// texture scale, seeds derived from base_seed.
std::vector<SceneSpec> manifest(std::size_t count, std::uint64_t base_seed, int width = 64,
                                int height = 64);
std::string scene_id(std::size_t index);

/// Probe training triples: fused with average, max and Laplacian blend in turn.
std::vector<probe::ProbeSample> probe_samples(std::span<const SceneSpec> specs);

/// Writes ir/<scene>.pgm, vis/<scene>.pgm, fused/<method>/<scene>.pgm and
/// env_labels.json (heuristic labels from the visible image).
void write_dataset(const std::filesystem::path& root, std::span<const SceneSpec> specs,
                   int workers = 1);

}  // namespace fusemetrics::synth
