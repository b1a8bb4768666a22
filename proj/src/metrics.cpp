#include "fusemetrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fusemetrics/error.hpp"

namespace fusemetrics::metrics {

namespace {

constexpr std::array<std::string_view, kMetricCount> kNames = {
    "VIF", "QABF", "SSIM", "CC", "PSNR", "FMI_P", "FMI_DCT", "FMI_W", "EN", "SD", "EI", "SF"};

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view name_of(MetricId id) { return kNames[index_of(id)]; }

MetricId metric_from_name(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (int i = 0; i < kMetricCount; ++i) {
    if (kNames[i] == upper) return static_cast<MetricId>(i);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

void validate(const FusionTriple& t) {
  require_same_dims(t.ir, t.fused, "fusion triple (ir/fused)");
  require_same_dims(t.vis, t.fused, "fusion triple (vis/fused)");
}

void validate(const VanillaWeights& w) {
  if (!(w.w_ir >= 0.0) || !(w.w_vis >= 0.0) || (w.w_ir == 0.0 && w.w_vis == 0.0) ||
      !std::isfinite(w.w_ir) || !std::isfinite(w.w_vis)) {
    throw Error(ErrorCode::InvalidArgument, "weights must be non-negative and not both zero");
  }
}

// --- PSNR / CC ----------------------------------------------------------------

double psnr(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "psnr");
  auto pa = a.pixels(), pb = b.pixels();
  double sse = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(pa.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

Score cc(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "cc");
  auto pa = a.pixels(), pb = b.pixels();
  auto constant = [](std::span<const double> p) {
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    return *lo == *hi;
  };
  if (constant(pa) || constant(pb)) return {0.0, true};
  const double ma = mean_of(pa), mb = mean_of(pb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - ma, db = pb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

// --- SSIM ---------------------------------------------------------------------

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "ssim");
  require_min_dims(a, kSsimWindow, kSsimWindow, "ssim");
  const auto k = gaussian_kernel(kSsimWindow, kSsimSigma);
  const Raster& ra = a.raster();
  const Raster& rb = b.raster();
  Raster aa(ra.width, ra.height), bb(ra.width, ra.height), ab(ra.width, ra.height);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    aa.data[i] = ra.data[i] * ra.data[i];
    bb.data[i] = rb.data[i] * rb.data[i];
    ab.data[i] = ra.data[i] * rb.data[i];
  }
  const Raster mu_a = filter_separable_valid(ra, k, k);
  const Raster mu_b = filter_separable_valid(rb, k, k);
  const Raster e_aa = filter_separable_valid(aa, k, k);
  const Raster e_bb = filter_separable_valid(bb, k, k);
  const Raster e_ab = filter_separable_valid(ab, k, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.data[i], mb = mu_b.data[i];
    const double va = e_aa.data[i] - ma * ma;
    const double vb = e_bb.data[i] - mb * mb;
    const double cov = e_ab.data[i] - ma * mb;
    total += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
             ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
  }
  return total / static_cast<double>(mu_a.size());
}

// --- VIF ----------------------------------------------------------------------

int vif_scale_count(int width, int height) {
  const int min_dim = std::min(width, height);
  if (min_dim < 8) {
    throw Error(ErrorCode::TooSmall, "vif: image must be at least 8x8");
  }
  int scales = 1;
  while (scales < kVifMaxScales && min_dim >= (8 << scales)) ++scales;
  return scales;
}

Score vif(const GrayImage& ref, const GrayImage& dist) {
  require_same_dims(ref, dist, "vif");
  const int scales = vif_scale_count(ref.width(), ref.height());
  const auto k = gaussian_kernel(kVifWindow, kVifSigma);
  Raster r = ref.raster();
  Raster d = dist.raster();
  double num = 0.0, den = 0.0;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      r = pyramid_reduce(r);
      d = pyramid_reduce(d);
    }
    Raster rr(r.width, r.height), dd(r.width, r.height), rd(r.width, r.height);
    for (std::size_t i = 0; i < r.size(); ++i) {
      rr.data[i] = r.data[i] * r.data[i];
      dd.data[i] = d.data[i] * d.data[i];
      rd.data[i] = r.data[i] * d.data[i];
    }
    const Raster mu_r = filter_separable(r, k, k);
    const Raster mu_d = filter_separable(d, k, k);
    const Raster e_rr = filter_separable(rr, k, k);
    const Raster e_dd = filter_separable(dd, k, k);
    const Raster e_rd = filter_separable(rd, k, k);
    for (std::size_t i = 0; i < r.size(); ++i) {
      double var_r = std::max(0.0, e_rr.data[i] - mu_r.data[i] * mu_r.data[i]);
      double var_d = std::max(0.0, e_dd.data[i] - mu_d.data[i] * mu_d.data[i]);
      const double cov = e_rd.data[i] - mu_r.data[i] * mu_d.data[i];
      double g = cov / (var_r + kVifEps);
      double sv = var_d - g * cov;
      if (var_r < kVifEps) {
        g = 0.0;
        sv = var_d;
        var_r = 0.0;
      }
      if (var_d < kVifEps) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = var_d;
        g = 0.0;
      }
      sv = std::max(sv, kVifEps);
      num += std::log10(1.0 + g * g * var_r / (sv + kVifNoiseVar));
      den += std::log10(1.0 + var_r / kVifNoiseVar);
    }
  }
  if (den <= 0.0) return {0.0, true};
  return {num / den, false};
}

// --- QABF ---------------------------------------------------------------------

namespace {

double edge_preservation(double g_src, double a_src, double g_f, double a_f) {
  using C = QabfConstants;
  const double hi = std::max(g_src, g_f);
  const double strength = hi > 0.0 ? std::min(g_src, g_f) / hi : 0.0;
  const double orient = 1.0 - std::abs(a_src - a_f) / (std::numbers::pi / 2.0);
  const double qg = C::gamma_g / (1.0 + std::exp(C::kappa_g * (strength - C::sigma_g)));
  const double qa = C::gamma_a / (1.0 + std::exp(C::kappa_a * (orient - C::sigma_a)));
  return qg * qa;
}

}  // namespace

double qabf_perfect_transfer() { return edge_preservation(1.0, 0.0, 1.0, 0.0); }

Score qabf(const GrayImage& ir, const GrayImage& vis, const GrayImage& fused) {
  require_same_dims(ir, fused, "qabf");
  require_same_dims(vis, fused, "qabf");
  require_min_dims(fused, 3, 3, "qabf");
  const GradientField ga = sobel(ir), gb = sobel(vis), gf = sobel(fused);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gf.magnitude.size(); ++i) {
    const double wa = ga.magnitude.data[i], wb = gb.magnitude.data[i];
    const double gmag = gf.magnitude.data[i], gor = gf.orientation.data[i];
    if (wa > 0.0) num += wa * edge_preservation(wa, ga.orientation.data[i], gmag, gor);
    if (wb > 0.0) num += wb * edge_preservation(wb, gb.orientation.data[i], gmag, gor);
    den += wa + wb;
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

Score qabf_pairwise(const GrayImage& src, const GrayImage& comp) {
  require_same_dims(src, comp, "qabf_pairwise");
  require_min_dims(src, 3, 3, "qabf_pairwise");
  const GradientField gs = sobel(src), gc = sobel(comp);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gs.magnitude.size(); ++i) {
    const double ws = gs.magnitude.data[i];
    if (ws > 0.0) {
      num += ws * edge_preservation(ws, gs.orientation.data[i], gc.magnitude.data[i],
                                    gc.orientation.data[i]);
    }
    den += ws;
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

// --- FMI ----------------------------------------------------------------------

namespace {

void normalize_by_max(Raster& r) {
  const double hi = *std::max_element(r.data.begin(), r.data.end());
  if (hi > 0.0) {
    for (double& v : r.data) v /= hi;
  }
}

std::vector<int> window_starts(int length) {
  std::vector<int> starts;
  if (length <= kFmiWindow) {
    starts.push_back(0);
    return starts;
  }
  for (int s = 0; s + kFmiWindow <= length; s += kFmiStride) starts.push_back(s);
  if (starts.back() + kFmiWindow < length) starts.push_back(length - kFmiWindow);
  return starts;
}

double entropy_bits(std::span<const int> counts, int total) {
  double h = 0.0;
  for (int c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

}  // namespace

Raster fmi_feature_map(const GrayImage& img, FmiFeature feature) {
  switch (feature) {
    case FmiFeature::Pixel:
      return img.raster();
    case FmiFeature::Dct: {
      const BlockDct dct = block_dct8(img);
      Raster map(dct.blocks_x * 8, dct.blocks_y * 8);
      for (int by = 0; by < dct.blocks_y; ++by)
        for (int bx = 0; bx < dct.blocks_x; ++bx) {
          const DctBlock& blk = dct.blocks[static_cast<std::size_t>(by) * dct.blocks_x + bx];
          for (int v = 0; v < 8; ++v)
            for (int u = 0; u < 8; ++u) map(bx * 8 + u, by * 8 + v) = std::abs(blk[v * 8 + u]);
        }
      normalize_by_max(map);
      return map;
    }
    case FmiFeature::Wavelet: {
      const HaarBands bands = haar_dwt1(img);
      Raster map(bands.ll.width, bands.ll.height);
      for (std::size_t i = 0; i < map.size(); ++i) {
        const double lh = bands.lh.data[i], hl = bands.hl.data[i], hh = bands.hh.data[i];
        map.data[i] = std::sqrt(lh * lh + hl * hl + hh * hh);
      }
      normalize_by_max(map);
      return map;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown FMI feature");
}

std::optional<double> window_nmi(const Raster& a, const Raster& b, int x0, int y0, int w, int h) {
  auto quantize = [&](const Raster& r, std::vector<int>& bins) {
    double lo = r(x0, y0), hi = lo;
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        lo = std::min(lo, r(x, y));
        hi = std::max(hi, r(x, y));
      }
    bins.clear();
    const double scale = hi > lo ? kFmiBins / (hi - lo) : 0.0;
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        bins.push_back(std::min(static_cast<int>((r(x, y) - lo) * scale), kFmiBins - 1));
      }
  };
  std::vector<int> qa, qb;
  quantize(a, qa);
  quantize(b, qb);
  std::array<int, kFmiBins> ca{}, cb{};
  std::array<int, kFmiBins * kFmiBins> cab{};
  for (std::size_t i = 0; i < qa.size(); ++i) {
    ++ca[qa[i]];
    ++cb[qb[i]];
    ++cab[qa[i] * kFmiBins + qb[i]];
  }
  const int n = w * h;
  const double ha = entropy_bits(ca, n), hb = entropy_bits(cb, n);
  if (ha + hb == 0.0) return std::nullopt;
  const double hab = entropy_bits(cab, n);
  return 2.0 * (ha + hb - hab) / (ha + hb);
}

double fmi(const GrayImage& a, const GrayImage& b, FmiFeature feature) {
  require_same_dims(a, b, "fmi");
  const Raster fa = fmi_feature_map(a, feature);
  const Raster fb = fmi_feature_map(b, feature);
  const auto xs = window_starts(fa.width);
  const auto ys = window_starts(fa.height);
  const int ww = std::min(kFmiWindow, fa.width), wh = std::min(kFmiWindow, fa.height);
  double total = 0.0;
  int used = 0;
  for (int y0 : ys) {
    for (int x0 : xs) {
      if (auto v = window_nmi(fa, fb, x0, y0, ww, wh)) {
        total += *v;
        ++used;
      }
    }
  }
  if (used == 0) {
    throw Error(ErrorCode::AllDegenerate, "fmi: every window has zero entropy");
  }
  return total / used;
}

Score pairwise(MetricId id, const GrayImage& ref, const GrayImage& other) {
  switch (id) {
    case MetricId::VIF: return vif(ref, other);
    case MetricId::QABF: return qabf_pairwise(ref, other);
    case MetricId::SSIM: return {ssim(ref, other), false};
    case MetricId::CC: return cc(ref, other);
    case MetricId::PSNR: return {psnr(ref, other), false};
    case MetricId::FMI_P: return {fmi(ref, other, FmiFeature::Pixel), false};
    case MetricId::FMI_DCT: return {fmi(ref, other, FmiFeature::Dct), false};
    case MetricId::FMI_W: return {fmi(ref, other, FmiFeature::Wavelet), false};
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(name_of(id)) + " is not a full-reference metric");
  }
}

Score pairwise_or_zero(MetricId id, const GrayImage& ref, const GrayImage& other) {
  try {
    return pairwise(id, ref, other);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllDegenerate) throw;
    return {0.0, true};
  }
}

// --- reference-free -------------------------------------------------------------

double en(const GrayImage& img) {
  const Histogram256 h = histogram256(img);
  double e = 0.0;
  for (std::uint64_t c : h.counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / static_cast<double>(h.total);
      e -= p * std::log2(p);
    }
  }
  return e;
}

double sd(const GrayImage& img) {
  auto px = img.pixels();
  const double m = mean_of(px);
  double s = 0.0;
  for (double v : px) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(px.size()));
}

double ei(const GrayImage& img) {
  require_min_dims(img, 3, 3, "ei");
  const GradientField g = sobel(img);
  return mean_of(g.magnitude.data);
}

double sf(const GrayImage& img) {
  const Raster& r = img.raster();
  double row = 0.0, col = 0.0;
  for (int y = 0; y < r.height; ++y)
    for (int x = 1; x < r.width; ++x) {
      const double d = r(x, y) - r(x - 1, y);
      row += d * d;
    }
  for (int y = 1; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const double d = r(x, y) - r(x, y - 1);
      col += d * d;
    }
  const double nr = static_cast<double>(r.height) * (r.width - 1);
  const double nc = static_cast<double>(r.width) * (r.height - 1);
  const double rf2 = nr > 0 ? row / nr : 0.0;
  const double cf2 = nc > 0 ? col / nc : 0.0;
  return std::sqrt(rf2 + cf2);
}

double reference_free(MetricId id, const GrayImage& img) {
  switch (id) {
    case MetricId::EN: return en(img);
    case MetricId::SD: return sd(img);
    case MetricId::EI: return ei(img);
    case MetricId::SF: return sf(img);
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(name_of(id)) + " is not a reference-free metric");
  }
}

// --- fusion-level ---------------------------------------------------------------

Score vanilla_fusion_score(const FusionTriple& triple, MetricId metric, const VanillaWeights& w) {
  validate(triple);
  validate(w);
  if (!is_full_reference(metric)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name_of(metric)) + " is not a full-reference metric");
  }
  if (metric == MetricId::QABF) return qabf(triple.ir, triple.vis, triple.fused);
  Score total{};
  if (w.w_ir != 0.0) {
    const Score s = pairwise(metric, triple.ir, triple.fused);
    total.value += w.w_ir * s.value;
    total.degenerate |= s.degenerate;
  }
  if (w.w_vis != 0.0) {
    const Score s = pairwise(metric, triple.vis, triple.fused);
    total.value += w.w_vis * s.value;
    total.degenerate |= s.degenerate;
  }
  return total;
}

void MetricVector::set(MetricId id, double value, bool degenerate) {
  values_[index_of(id)] = value;
  degenerate_[index_of(id)] = degenerate;
  errors_[index_of(id)].clear();
}

void MetricVector::mark_failed(MetricId id, std::string message) {
  values_[index_of(id)].reset();
  degenerate_[index_of(id)] = false;
  errors_[index_of(id)] = std::move(message);
}

MetricVector eval_all(const FusionTriple& triple, const VanillaWeights& w, MetricTimings* timings) {
  return eval_metrics(triple, w, kAllMetrics, timings);
}

MetricVector eval_metrics(const FusionTriple& triple, const VanillaWeights& w,
                          std::span<const MetricId> ids, MetricTimings* timings) {
  MetricVector out;
  using Clock = std::chrono::steady_clock;
  for (MetricId id : ids) {
    const auto start = Clock::now();
    try {
      if (is_full_reference(id)) {
        const Score s = vanilla_fusion_score(triple, id, w);
        out.set(id, s.value, s.degenerate);
      } else {
        out.set(id, reference_free(id, triple.fused));
      }
    } catch (const Error& e) {
      out.mark_failed(id, std::string(to_string(e.code())) + ": " + e.what());
    }
    if (timings) {
      (*timings)[index_of(id)] += std::chrono::duration<double>(Clock::now() - start).count();
    }
  }
  return out;
}

}  // namespace fusemetrics::metrics
