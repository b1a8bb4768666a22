#pragma once

// Information probe: a small convolutional autoencoder that splits a fused
// image into an infrared-like and a visible-like component.
//
// Architecture (all 3x3, stride 1, edge-replicated borders):
//   encoder  1 -> 8 -> 8 -> 8, ReLU after each layer
//   ir head  8 -> 8 (ReLU) -> 1 (tanh)
//   vis head 8 -> 8 (ReLU) -> 1 (tanh)
// No layer has a bias. Outputs are clamped to [0, 1] when decoded. The probe
// sees the fused image only.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fusemetrics/image.hpp"
#include "fusemetrics/nn.hpp"

namespace fusemetrics::probe {

struct DecomposedPair {
  GrayImage ir_hat;
  GrayImage vis_hat;
};

struct ProbeArchitecture {
  nn::ConvLayer enc1, enc2, enc3;
  nn::ConvLayer ir1, ir2;
  nn::ConvLayer vis1, vis2;
  std::size_t param_count = 0;

  static constexpr int kLayerCount = 7;
  static constexpr int kReceptiveRadius = 5;  // five 3x3 layers on any path
};

const ProbeArchitecture& probe_architecture();

inline constexpr std::uint32_t kProbeFormatVersion = 1;
inline constexpr int kProbeMinDim = 8;

struct ProbeParams {
  std::vector<double> values;  // layout per probe_architecture()
  double final_loss = 0.0;     // last epoch's mean training loss

  static ProbeParams initialize(std::uint64_t seed);
  std::size_t serialized_bytes() const;
};

/// Throws TooSmall below 8x8.
DecomposedPair decompose(const GrayImage& fused, const ProbeParams& params);

struct ProbeSample {
  GrayImage ir;
  GrayImage vis;
  GrayImage fused;
};

inline constexpr std::size_t kProbeMinSamples = 50;

struct ProbeTrainResult {
  ProbeParams params;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Per-sample loss: mean over pixels of (ir_hat - ir)^2 + (vis_hat - vis)^2.
double reconstruction_loss(const ProbeParams& params, const ProbeSample& sample);
/// Mean reconstruction_loss over a set.
double reconstruction_mse(const ProbeParams& params, std::span<const ProbeSample> samples);

/// Loss and parameter gradient for one minibatch (mean over samples).
double probe_loss_and_grad(const ProbeParams& params, std::span<const ProbeSample* const> batch,
                           std::span<double> grad);

/// Adam minibatch training from a seeded initialization. Throws EmptyDataset
/// for an empty set, InvalidArgument for fewer than 50 samples and
/// NonFiniteLoss if the loss diverges.
ProbeTrainResult train_probe(std::span<const ProbeSample> dataset, const nn::TrainConfig& cfg);

void save_probe(const ProbeParams& params, const std::filesystem::path& path);
ProbeParams load_probe(const std::filesystem::path& path);

/// Files `<dir>/<scene>_<method>_ir.pgm` and `<dir>/<scene>_<method>_vis.pgm`.
std::filesystem::path component_path(const std::filesystem::path& dir, const std::string& scene,
                                     const std::string& method, const char* modality);
void save_components(const std::filesystem::path& dir, const std::string& scene,
                     const std::string& method, const DecomposedPair& pair);
/// Throws IoError naming the missing path, DimMismatch when the components do
/// not match `fused`.
DecomposedPair load_components(const std::filesystem::path& dir, const std::string& scene,
                               const std::string& method, const GrayImage& fused);

}  // namespace fusemetrics::probe
