#include <cmath>
#include <numbers>
#include <random>

#include "fusemetrics/surrogate.hpp"
#include "fusemetrics/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fusemetrics;
using namespace fusemetrics::surrogate;
using testing::check_error;
using testing::from_fn;

namespace {

std::vector<SurrogateScene> small_scenes(std::size_t n, std::uint64_t seed) {
  const probe::ProbeParams pr = probe::ProbeParams::initialize(1);
  std::vector<SurrogateScene> out;
  std::size_t i = 0;
  for (const synth::SceneSpec& spec : synth::manifest(n, seed, 32, 32)) {
    const synth::ScenePair pair = synth::gen_pair(spec);
    std::vector<GrayImage> fused;
    for (const auto& f : synth::gen_fusions(pair.ir, pair.vis)) fused.push_back(f.fused);
    fused.resize(3);
    out.push_back(make_scene(synth::scene_id(i), pair.ir, pair.vis, fused, pr, 0.1 + 0.2 * (i % 4)));
    ++i;
  }
  return out;
}

double channel_mean_abs(const nn::Tensor& t, FeatureChannel c, int margin) {
  double s = 0;
  int n = 0;
  for (int y = margin; y < t.height - margin; ++y)
    for (int x = margin; x < t.width - margin; ++x) {
      s += std::abs(t.data(static_cast<int>(c), y * t.width + x));
      ++n;
    }
  return s / n;
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("feature stack examples") {
  const nn::Tensor flat = features(GrayImage::filled(20, 18, 0.35));
  CHECK(flat.channels == kFeatureChannels);
  CHECK(flat.width == 20);
  CHECK(flat.height == 18);
  for (FeatureChannel c : {FeatureChannel::SobelX, FeatureChannel::SobelY, FeatureChannel::SobelMagnitude,
                           FeatureChannel::Laplacian, FeatureChannel::Gabor0, FeatureChannel::Gabor45,
                           FeatureChannel::Gabor90, FeatureChannel::Gabor135, FeatureChannel::LocalStd}) {
    CHECK(flat.data.row(static_cast<int>(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(flat.data.row(static_cast<int>(FeatureChannel::LocalMean)).minCoeff() == doctest::Approx(0.35));
  CHECK(flat.data.row(static_cast<int>(FeatureChannel::LocalMean)).maxCoeff() == doctest::Approx(0.35));

  std::mt19937_64 rng(1);
  for (int dim : {16, 31, 64}) {
    const nn::Tensor t = features(oracle::random_image(rng, dim, dim + 3));
    CHECK(t.channels == 12);
    CHECK(t.data.allFinite());
  }
  check_error(ErrorCode::TooSmall, [] { features(GrayImage::filled(15, 40, 0)); });
}

TEST_CASE("matched sinusoid excites the aligned Gabor channel") {
  const double k = 2 * std::numbers::pi / kGaborWavelength;
  const GrayImage along_x = from_fn(48, 48, [&](int x, int) { return 0.5 + 0.4 * std::sin(k * x); });
  const nn::Tensor t = features(along_x);
  const double g0 = channel_mean_abs(t, FeatureChannel::Gabor0, 8);
  for (FeatureChannel other : {FeatureChannel::Gabor45, FeatureChannel::Gabor90, FeatureChannel::Gabor135}) {
    CHECK(g0 > 2 * channel_mean_abs(t, other, 8));
  }
  const GrayImage along_y = from_fn(48, 48, [&](int, int y) { return 0.5 + 0.4 * std::sin(k * y); });
  const nn::Tensor u = features(along_y);
  CHECK(channel_mean_abs(u, FeatureChannel::Gabor90, 8) > 2 * channel_mean_abs(u, FeatureChannel::Gabor0, 8));
}

TEST_CASE("architecture contract") {
  const SurrogateArchitecture& a = surrogate_architecture();
  CHECK(a.ir.conv1.in == 24);
  CHECK(a.ir.conv1.out == 16);
  CHECK(a.ir.conv2.out == 16);
  CHECK(a.ir.head.out == kHeadCount);
  CHECK(a.env_conv.in == 12);
  CHECK(a.env_head.out == 1);
  CHECK(a.param_count == a.trainable_count + 2 * kHeadCount);
  const SurrogateParams p = SurrogateParams::initialize(3);
  CHECK(p.values.size() == a.param_count);
  for (double s : p.target_std()) CHECK(s == 1.0);
  for (double m : p.target_mean()) CHECK(m == 0.0);
}

TEST_CASE("forward passes are deterministic and shaped") {
  const SurrogateParams p = SurrogateParams::initialize(4);
  std::mt19937_64 rng(2);
  const GrayImage a = oracle::random_textured(rng, 40, 36), b = oracle::random_textured(rng, 40, 36);
  const Targets t1 = forward_branch(p, Modality::Ir, a, b), t2 = forward_branch(p, Modality::Ir, a, b);
  CHECK(t1 == t2);
  CHECK(t1.size() == 8);
  CHECK(forward_branch(p, Modality::Vis, a, b) != t1);
  check_error(ErrorCode::DimMismatch, [&] { forward_branch(p, Modality::Ir, a, GrayImage::filled(40, 35, 0)); });
  const double e = forward_env(p, a);
  CHECK(e > 0);
  CHECK(e < 1);
  CHECK(forward_env(p, a) == e);
  check_error(ErrorCode::TooSmall, [&] { forward_env(p, GrayImage::filled(10, 10, 0)); });
}

TEST_CASE("oracle targets follow the metric order") {
  std::mt19937_64 rng(3);
  const GrayImage a = oracle::random_textured(rng, 32, 32), b = oracle::random_textured(rng, 32, 32);
  const Targets t = oracle_targets(a, b);
  for (int k = 0; k < kHeadCount; ++k) {
    CHECK(t[k] == metrics::pairwise(metrics::kFullReferenceMetrics[k], a, b).value);
  }
}

TEST_CASE("loss examples") {
  SurrogateParams p = SurrogateParams::initialize(5);
  Targets mean{}, sd{};
  for (int k = 0; k < kHeadCount; ++k) {
    mean[k] = 0.1 * k;
    sd[k] = 0.5 + 0.25 * k;
  }
  p.set_target_normalization(mean, sd);
  std::mt19937_64 rng(4);
  LossBatch batch;
  for (int i = 0; i < 4; ++i) {
    TrainSample s;
    s.modality = i % 2 ? Modality::Vis : Modality::Ir;
    s.anchor = oracle::random_textured(rng, 32, 32);
    s.candidate = oracle::random_textured(rng, 32, 32);
    s.kind = i < 2 ? SampleKind::Positive : SampleKind::Negative;
    s.targets = forward_branch(p, s.modality, s.anchor, s.candidate);
    batch.samples.push_back(s);
  }
  const GrayImage v = oracle::random_textured(rng, 32, 32);
  batch.env.push_back({v, forward_env(p, v)});
  const LossBreakdown exact = loss_total(p, batch, {});
  CHECK(exact.total < 1e-20);

  for (TrainSample& s : batch.samples)
    for (double& t : s.targets) t += 0.3;
  batch.env[0].env = 0.9;
  const LossBreakdown off = loss_total(p, batch, {});
  CHECK(off.total > 0);
  CHECK(off.total == doctest::Approx(off.ir + off.vis + off.env).epsilon(1e-12));
  CHECK(off.ir > 0);
  CHECK(off.vis > 0);
  CHECK(off.env > 0);
  check_error(ErrorCode::EmptyDataset, [&] { loss_total(p, LossBatch{}, {}); });
}

TEST_CASE("loss gradient matches central differences") {
  SurrogateParams p = SurrogateParams::initialize(6);
  Targets mean{}, sd{};
  for (int k = 0; k < kHeadCount; ++k) {
    mean[k] = 0.3;
    sd[k] = 0.2 + 0.1 * k;
  }
  p.set_target_normalization(mean, sd);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  LossBatch batch;
  for (int i = 0; i < 4; ++i) {
    TrainSample s;
    s.modality = i % 2 ? Modality::Vis : Modality::Ir;
    s.anchor = oracle::random_textured(rng, 24, 24);
    s.candidate = oracle::random_textured(rng, 24, 24);
    s.kind = i < 2 ? SampleKind::Positive : SampleKind::Negative;
    for (double& t : s.targets) t = u(rng);
    batch.samples.push_back(s);
  }
  batch.env.push_back({oracle::random_textured(rng, 24, 24), 0.4});

  const SurrogateArchitecture& a = surrogate_architecture();
  std::vector<double> grad(p.values.size(), 0.0);
  loss_total(p, batch, grad);
  for (std::size_t i = a.trainable_count; i < grad.size(); ++i) CHECK(grad[i] == 0.0);

  std::uniform_int_distribution<std::size_t> pick(0, a.trainable_count - 1);
  // Small enough that no perturbation crosses a ReLU kink.
  const double h = 1e-6;
  int bad = 0;
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t i = pick(rng);
    SurrogateParams plus = p, minus = p;
    plus.values[i] += h;
    minus.values[i] -= h;
    const double fd = (loss_total(plus, batch, {}).total - loss_total(minus, batch, {}).total) / (2 * h);
    const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, err);
    if (err >= 1e-3) ++bad;
  }
  INFO("worst relative error " << worst);
  CHECK(bad == 0);
}

TEST_CASE("training examples") {
  const auto scenes = small_scenes(4, 21);
  nn::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.seed = 9;
  const SurrogateTrainResult r = train(scenes, cfg);
  REQUIRE(r.curve.size() == 2);
  for (const LossRow& row : r.curve) {
    CHECK(row.loss.total >= 0);
    CHECK(std::isfinite(row.loss.total));
  }
  CHECK(train(scenes, cfg).params.values == r.params.values);
  CHECK(train(scenes, cfg, 3).params.values == r.params.values);
  for (double s : r.params.target_std()) CHECK(s > 0);

  nn::TrainConfig none = cfg;
  none.epochs = 0;
  nn::TrainConfig frozen = cfg;
  frozen.learning_rate = 0;
  CHECK(train(scenes, frozen).params.values == train(scenes, none).params.values);

  const std::string csv = format_loss_curve(r.curve);
  CHECK(csv.rfind("epoch,L_total,L_ir,L_vis,L_env\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  check_error(ErrorCode::EmptyDataset, [&] { train(std::vector<SurrogateScene>{}, cfg); });
  check_error(ErrorCode::InvalidArgument, [&] { train(std::span(scenes).first(1), cfg); });
}

TEST_CASE("predict_adjusted composes the heads through the adjusted score") {
  const probe::ProbeParams pr = probe::ProbeParams::initialize(2);
  const SurrogateParams p = SurrogateParams::initialize(7);
  std::mt19937_64 rng(6);
  const metrics::FusionTriple t{oracle::random_textured(rng, 80, 70), oracle::random_textured(rng, 80, 70),
                                oracle::random_textured(rng, 80, 70), "m", "s"};
  const env::AdjustedMap out = predict_adjusted(t, pr, p);
  CHECK(out.size() == 8);
  const double e = out.begin()->second.env;
  CHECK(e == forward_env(p, t.vis));
  const env::AdjustedMap again = predict_adjusted(t, pr, p, e);
  for (const auto& [id, s] : out) {
    CHECK(s.env == e);
    CHECK(s.q_star == env::adjusted_score(s.q_ir, s.q_vis, e).q_star);
    CHECK(again.at(id).q_star == s.q_star);
  }
  check_error(ErrorCode::EnvOutOfRange, [&] { predict_adjusted(t, pr, p, 1.5); });
}

TEST_CASE("surrogate file round trip") {
  testing::TempDir dir;
  SurrogateParams p = SurrogateParams::initialize(8);
  Targets mean{}, sd{};
  sd.fill(2.0);
  p.set_target_normalization(mean, sd);
  nn::round_to_float(p.values);
  save_surrogate(p, dir / "s.bin");
  CHECK(std::filesystem::file_size(dir / "s.bin") == p.serialized_bytes());
  CHECK(testing::slurp(dir / "s.bin").substr(0, 4) == "EVNT");
  CHECK(load_surrogate(dir / "s.bin").values == p.values);
  check_error(ErrorCode::FormatError, [&] {
    probe::save_probe(probe::ProbeParams::initialize(1), dir / "p.bin");
    load_surrogate(dir / "p.bin");
  });
}

}  // TEST_SUITE
