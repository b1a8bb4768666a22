#pragma once

// Classical fusion quality metrics. Eight full-reference metrics are applied
// between a source and the fused image (or, for QABF, between both sources
// and the fused image); four reference-free metrics look at one image.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fusemetrics/image.hpp"

namespace fusemetrics::metrics {

enum class MetricId : int {
  VIF = 0,
  QABF,
  SSIM,
  CC,
  PSNR,
  FMI_P,
  FMI_DCT,
  FMI_W,
  EN,
  SD,
  EI,
  SF,
};

inline constexpr int kMetricCount = 12;
inline constexpr int kFullReferenceCount = 8;

inline constexpr std::array<MetricId, kMetricCount> kAllMetrics = {
    MetricId::VIF, MetricId::QABF,    MetricId::SSIM,  MetricId::CC,
    MetricId::PSNR, MetricId::FMI_P,  MetricId::FMI_DCT, MetricId::FMI_W,
    MetricId::EN,  MetricId::SD,      MetricId::EI,    MetricId::SF};

inline constexpr std::array<MetricId, kFullReferenceCount> kFullReferenceMetrics = {
    MetricId::VIF, MetricId::QABF,  MetricId::SSIM,    MetricId::CC,
    MetricId::PSNR, MetricId::FMI_P, MetricId::FMI_DCT, MetricId::FMI_W};

constexpr int index_of(MetricId id) { return static_cast<int>(id); }
constexpr bool is_full_reference(MetricId id) { return index_of(id) < kFullReferenceCount; }

std::string_view name_of(MetricId id);
/// Accepts the canonical names (case-insensitive). Throws InvalidArgument.
MetricId metric_from_name(std::string_view name);

/// A score that may carry a degeneracy flag (e.g. correlation of a constant
/// image). Degenerate scores are 0.0 by convention.
struct Score {
  double value = 0.0;
  bool degenerate = false;
};

struct FusionTriple {
  GrayImage ir;
  GrayImage vis;
  GrayImage fused;
  std::string method_id;
  std::string scene_id;
};

/// Throws DimMismatch unless all three images share dimensions.
void validate(const FusionTriple& triple);

struct VanillaWeights {
  double w_ir = 1.0;
  double w_vis = 1.0;
};

void validate(const VanillaWeights& w);

// Score returned for identical images.
inline constexpr double kPsnrCap = 100.0;

// SSIM on the [0, 1] domain.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Pixel-domain VIF. Noise variance 2 and stabilizer 1e-10 are the usual
// 8-bit constants rescaled to the [0, 1] domain.
inline constexpr int kVifMaxScales = 4;
inline constexpr int kVifWindow = 9;
inline constexpr double kVifSigma = kVifWindow / 5.0;
inline constexpr double kVifNoiseVar = 2.0 / (255.0 * 255.0);
inline constexpr double kVifEps = 1e-10 / (255.0 * 255.0);

/// Number of scales VIF uses for an image: up to 4, fewer when the coarsest
/// level would drop below 8 pixels. Throws TooSmall below 8x8.
int vif_scale_count(int width, int height);

// Xydeas-Petrovic edge preservation constants.
struct QabfConstants {
  static constexpr double gamma_g = 0.9994;
  static constexpr double kappa_g = -15.0;
  static constexpr double sigma_g = 0.5;
  static constexpr double gamma_a = 0.9879;
  static constexpr double kappa_a = -22.0;
  static constexpr double sigma_a = 0.8;
};

/// Edge preservation value for perfectly transferred edges, the supremum of
/// the QABF score under the constants above.
double qabf_perfect_transfer();

// Feature mutual information: 16x16 windows on a stride of 8, each image
// quantized inside the window into 8 bins between its local min and max.
inline constexpr int kFmiWindow = 16;
inline constexpr int kFmiStride = 8;
inline constexpr int kFmiBins = 8;

enum class FmiFeature { Pixel, Dct, Wavelet };

// --- full-reference ---------------------------------------------------------

double psnr(const GrayImage& a, const GrayImage& b);
Score cc(const GrayImage& a, const GrayImage& b);
double ssim(const GrayImage& a, const GrayImage& b);
Score vif(const GrayImage& ref, const GrayImage& dist);
Score qabf(const GrayImage& ir, const GrayImage& vis, const GrayImage& fused);
Score qabf_pairwise(const GrayImage& src, const GrayImage& comp);
double fmi(const GrayImage& a, const GrayImage& b, FmiFeature feature);

/// Feature map FMI analyses: raw pixels, |block DCT| laid out spatially, or
/// the level-1 Haar detail magnitude. DCT and wavelet maps are divided by
/// their maximum so they share the [0, 1] range of the pixel map.
Raster fmi_feature_map(const GrayImage& img, FmiFeature feature);
/// Normalized MI 2*I/(Ha+Hb) of one window pair; nullopt when Ha+Hb == 0.
std::optional<double> window_nmi(const Raster& a, const Raster& b, int x0, int y0, int w, int h);

/// Pairwise metric dispatch: Q(ref, other). QABF uses the pairwise form.
/// Throws for reference-free ids.
Score pairwise(MetricId id, const GrayImage& ref, const GrayImage& other);
/// As pairwise, but an FMI pair with no informative window scores a flagged 0
/// instead of throwing AllDegenerate. Used where a batch must not abort.
Score pairwise_or_zero(MetricId id, const GrayImage& ref, const GrayImage& other);

// --- reference-free ---------------------------------------------------------

double en(const GrayImage& img);
double sd(const GrayImage& img);
double ei(const GrayImage& img);
double sf(const GrayImage& img);

double reference_free(MetricId id, const GrayImage& img);

// --- fusion-level scores ----------------------------------------------------

/// RQ_f = w_ir * Q(I_ir, I_f) + w_vis * Q(I_vis, I_f). For QABF the two-source
/// form is returned and the weights are ignored.
Score vanilla_fusion_score(const FusionTriple& triple, MetricId metric, const VanillaWeights& w);

class MetricVector {
 public:
  const std::optional<double>& operator[](MetricId id) const { return values_[index_of(id)]; }
  bool has(MetricId id) const { return values_[index_of(id)].has_value(); }
  bool degenerate(MetricId id) const { return degenerate_[index_of(id)]; }
  const std::string& error(MetricId id) const { return errors_[index_of(id)]; }

  void set(MetricId id, double value, bool degenerate = false);
  void mark_failed(MetricId id, std::string message);

 private:
  std::array<std::optional<double>, kMetricCount> values_{};
  std::array<bool, kMetricCount> degenerate_{};
  std::array<std::string, kMetricCount> errors_{};
};

using MetricTimings = std::array<double, kMetricCount>;  // seconds per metric

/// Every full-reference metric in weighted form plus the reference-free
/// metrics on the fused image. A failing metric is left absent. When
/// `timings` is given, the wall time spent in each metric is added to it.
MetricVector eval_all(const FusionTriple& triple, const VanillaWeights& w,
                      MetricTimings* timings = nullptr);
/// eval_all restricted to `ids`; other entries stay absent.
MetricVector eval_metrics(const FusionTriple& triple, const VanillaWeights& w,
                          std::span<const MetricId> ids, MetricTimings* timings = nullptr);

}  // namespace fusemetrics::metrics
