#include <cmath>
#include <random>

#include "fusemetrics/environment.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fusemetrics;
using namespace fusemetrics::env;
using metrics::MetricId;
using testing::check_error;
using testing::from_fn;

TEST_SUITE("environment") {

TEST_CASE("normalize_labels examples") {
  const std::vector<RawLabel> raw = {{"a", 0, 0.1}, {"b", 5, 0.4}};
  const LabelSet s = normalize_labels(raw);
  CHECK(s.labels[0].s_ill_norm == 0.0);
  CHECK(s.labels[1].s_ill_norm == 0.5);
  CHECK_FALSE(s.ill_degenerate);

  const std::vector<RawLabel> identity = {{"a", 0, 0}, {"b", 0.3, 0.2}, {"c", 0.5, 0.5}};
  const LabelSet t = normalize_labels(identity);
  CHECK(t.labels[1].s_ill_norm == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(t.labels[1].s_obs_norm == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(t.labels[1].env == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.find("c")->env == doctest::Approx(1.0));
  CHECK(t.find("zz") == nullptr);
}

TEST_CASE("normalize_labels invariants") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 7);
  std::vector<RawLabel> raw;
  for (int i = 0; i < 30; ++i) raw.push_back({"s" + std::to_string(i), u(rng), u(rng)});
  const LabelSet s = normalize_labels(raw);
  std::vector<RawLabel> affine = raw;
  for (RawLabel& r : affine) {
    r.s_ill = 4.5 * r.s_ill + 2;
    r.s_obs = 0.01 * r.s_obs - 9;
  }
  const LabelSet a = normalize_labels(affine);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const EnvLabel& l = s.labels[i];
    CHECK(l.env == doctest::Approx(l.s_ill_norm + l.s_obs_norm).epsilon(1e-12));
    CHECK(l.s_ill_norm >= 0);
    CHECK(l.s_ill_norm <= 0.5);
    CHECK(l.s_obs_norm >= 0);
    CHECK(l.s_obs_norm <= 0.5);
    CHECK(std::abs(a.labels[i].s_ill_norm - l.s_ill_norm) < 1e-12);
    CHECK(std::abs(a.labels[i].s_obs_norm - l.s_obs_norm) < 1e-12);
  }
}

TEST_CASE("degenerate label range maps to the midpoint") {
  const std::vector<RawLabel> raw = {{"a", 2, 1}, {"b", 2, 3}};
  const LabelSet s = normalize_labels(raw);
  CHECK(s.ill_degenerate);
  CHECK_FALSE(s.obs_degenerate);
  for (const EnvLabel& l : s.labels) CHECK(l.s_ill_norm == 0.25);
  check_error(ErrorCode::EmptyDataset, [] { normalize_labels(std::vector<RawLabel>{}); });
  const std::vector<RawLabel> bad = {{"a", std::nan(""), 1}};
  check_error(ErrorCode::NonFiniteScore, [&] { normalize_labels(bad); });
}

TEST_CASE("label file round trip and parse errors") {
  testing::TempDir dir;
  const std::vector<RawLabel> raw = {{"scene_000", 0.25, 0.75}, {"scene_001", 0.1, 0.3}};
  write_label_file(dir / "labels.json", raw);
  const auto back = read_label_file(dir / "labels.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0].scene_id == "scene_000");
  CHECK(back[0].s_ill == 0.25);
  CHECK(back[1].s_obs == 0.3);
  testing::spit(dir / "bad.json", "{\"scene_id\": 1}");
  check_error(ErrorCode::ParseError, [&] { read_label_file(dir / "bad.json"); });
  testing::spit(dir / "broken.json", "[{");
  check_error(ErrorCode::ParseError, [&] { read_label_file(dir / "broken.json"); });
  testing::spit(dir / "missing_key.json", "[{\"scene_id\": \"a\", \"s_ill\": 1}]");
  check_error(ErrorCode::ParseError, [&] { read_label_file(dir / "missing_key.json"); });
  check_error(ErrorCode::IoError, [&] { read_label_file(dir / "nope.json"); });
}

TEST_CASE("env_heuristic examples") {
  CHECK(env_heuristic(GrayImage::filled(8, 8, 1.0)).first == 0.0);
  CHECK(env_heuristic(GrayImage::filled(8, 8, 0.0)).first == 1.0);
  CHECK(env_heuristic(GrayImage::filled(8, 8, 0.0)).second == 1.0);
  const GrayImage bright = from_fn(32, 32, [](int x, int y) { return 0.7 + 0.25 * std::sin(1.3 * x + 0.4 * y); });
  const GrayImage dark = GrayImage::filled(32, 32, 0.1);
  const auto b = env_heuristic(bright), d = env_heuristic(dark);
  CHECK(b.first < d.first);
  CHECK(b.second < d.second);
}

TEST_CASE("env_heuristic is monotone under dimming") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const GrayImage img = oracle::random_textured(rng, 24, 24);
    for (double gamma : {0.9, 0.5, 0.1}) {
      const GrayImage dim = from_fn(24, 24, [&](int x, int y) { return gamma * img(x, y); });
      CHECK(env_heuristic(dim).first >= env_heuristic(img).first);
    }
  }
}

TEST_CASE("adjusted_score examples") {
  CHECK(adjusted_score(0.6, 0.8, 0.0).q_star == doctest::Approx(1.4).epsilon(1e-12));
  CHECK(adjusted_score(0.6, 0.8, 1.0).q_star == doctest::Approx(1.2).epsilon(1e-12));
  const AdjustedScore s = adjusted_score(0.6, 0.8, 0.3, MetricId::CC);
  CHECK(s.metric == MetricId::CC);
  CHECK(s.delta == 0.8 - 0.6);
  for (double e : {0.0, 0.25, 0.5, 1.0}) CHECK(adjusted_score(0.7, 0.7, e).q_star == 1.4);
  check_error(ErrorCode::EnvOutOfRange, [] { adjusted_score(0.1, 0.2, 1.01); });
  check_error(ErrorCode::EnvOutOfRange, [] { adjusted_score(0.1, 0.2, -0.01); });
  check_error(ErrorCode::EnvOutOfRange, [] { adjusted_score(0.1, 0.2, std::nan("")); });
}

TEST_CASE("adjusted_score is monotone in env") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng), b = u(rng);
    double last = adjusted_score(a, b, 0.0).q_star;
    for (int k = 1; k <= 10; ++k) {
      const double q = adjusted_score(a, b, k / 10.0).q_star;
      if (b > a) CHECK(q < last);
      if (b < a) CHECK(q > last);
      last = q;
    }
  }
}

TEST_CASE("adjusted_all examples") {
  std::mt19937_64 rng(4);
  const GrayImage ir = oracle::random_textured(rng, 32, 32), vis = oracle::random_textured(rng, 32, 32);
  const GrayImage fused = from_fn(32, 32, [&](int x, int y) { return 0.2 * ir(x, y) + 0.8 * vis(x, y); });
  const metrics::FusionTriple t{ir, vis, fused, "m", "s"};

  const AdjustedMap exact = adjusted_all(t, {ir, vis}, 0.7);
  CHECK(exact.at(MetricId::SSIM).q_star == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(exact.size() == metrics::kFullReferenceCount);

  const probe::DecomposedPair pair{from_fn(32, 32, [&](int x, int y) { return 0.5 * ir(x, y); }), fused};
  const AdjustedMap zero = adjusted_all(t, pair, 0.0);
  for (const auto& [id, s] : zero) {
    CHECK(s.q_star == s.q_ir + s.q_vis);
    CHECK(s.q_ir == metrics::pairwise(id, ir, pair.ir_hat).value);
    CHECK(s.q_vis == metrics::pairwise(id, vis, pair.vis_hat).value);
  }
  const AdjustedMap penalized = adjusted_all(t, pair, 0.8);
  const AdjustedScore& ssim = penalized.at(MetricId::SSIM);
  CHECK(ssim.delta > 0);
  CHECK(ssim.q_star < ssim.q_ir + ssim.q_vis);
  CHECK(ssim.q_ir + ssim.q_vis - ssim.q_star == doctest::Approx(0.8 * ssim.delta).epsilon(1e-12));
  check_error(ErrorCode::DimMismatch, [&] {
    adjusted_all(t, {GrayImage::filled(8, 8, 0), vis}, 0.5);
  });
}

}  // TEST_SUITE
