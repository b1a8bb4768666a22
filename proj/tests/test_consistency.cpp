#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fusemetrics/consistency.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fusemetrics;
using namespace fusemetrics::mc;
using testing::check_error;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("m" + std::to_string(10 + i));
  return out;
}

std::vector<int> random_perm(std::mt19937_64& rng, int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 1);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

TEST_SUITE("consistency") {

TEST_CASE("rank examples") {
  const std::vector<double> s = {0.9, 0.5, 0.7};
  const Ranking r = rank(s, ids(3), true);
  CHECK(r.ranks == std::vector<int>{1, 3, 2});
  CHECK_FALSE(r.had_ties);
  CHECK(rank(s, ids(3), false).ranks == std::vector<int>{3, 1, 2});

  const std::vector<double> flat = {0.4, 0.4, 0.4, 0.4};
  const std::vector<std::string> names = {"d", "b", "a", "c"};
  const Ranking t = rank(flat, names, true);
  CHECK(t.had_ties);
  CHECK(t.ranks == std::vector<int>{4, 2, 1, 3});

  check_error(ErrorCode::TooFewMethods, [] { rank(std::vector<double>{1.0}, ids(1), true); });
  check_error(ErrorCode::NonFiniteScore,
              [] { rank(std::vector<double>{1.0, std::nan("")}, ids(2), true); });
  check_error(ErrorCode::LengthMismatch, [] { rank(std::vector<double>{1.0, 2.0}, ids(3), true); });
}

TEST_CASE("rank is invariant under monotone transforms") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(16), t(16), neg(16);
    for (int i = 0; i < 16; ++i) {
      s[i] = u(rng);
      t[i] = std::log(s[i]) * 3 + 1;
      neg[i] = -s[i];
    }
    CHECK(rank(s, ids(16), true).ranks == rank(t, ids(16), true).ranks);
    CHECK(rank(s, ids(16), true).ranks == rank(neg, ids(16), false).ranks);
  }
}

TEST_CASE("mc hand case") {
  const std::vector<int> m = {1, 2, 3}, ref = {2, 1, 3};
  const McResult r = mc::mc(m, ref, {0.9, 0.9, 0.1});
  CHECK(std::abs(r.mc - std::exp(-0.171)) < 1e-12);
  CHECK(std::abs(r.mc - 0.8428) < 1e-4);
  CHECK(r.breakdown[0].weight == doctest::Approx(0.855).epsilon(1e-12));
  CHECK(r.breakdown[1].weight == doctest::Approx(0.855).epsilon(1e-12));
  CHECK(r.breakdown[0].delta_rank == 1);
  CHECK(r.breakdown[2].delta_rank == 0);
  CHECK(mc::mc(m, m, {0.5, 0.7, 3.0}).mc == 1.0);
}

TEST_CASE("mc matches the naive formula and is symmetric") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_perm(rng, 16), b = random_perm(rng, 16);
    const ConsistencyParams p{0.9, 0.9, 0.0125};
    const double v = mc::mc(a, b, p).mc;
    CHECK(std::abs(v - oracle::mc(a, b, 0.9, 0.9, 0.0125)) < 1e-12);
    CHECK(v == mc::mc(b, a, p).mc);
    CHECK(v > 0);
    CHECK(v <= 1);
    if (a != b) CHECK(v < 1);
  }
}

TEST_CASE("errors at the top cost more than errors at the bottom") {
  std::vector<int> ref(8);
  std::iota(ref.begin(), ref.end(), 1);
  std::vector<int> top = ref, bottom = ref;
  std::swap(top[0], top[1]);
  std::swap(bottom[6], bottom[7]);
  const ConsistencyParams p;
  CHECK(mc::mc(top, ref, p).mc < mc::mc(bottom, ref, p).mc);
}

TEST_CASE("mc input validation") {
  const ConsistencyParams p;
  check_error(ErrorCode::LengthMismatch, [&] { mc::mc(std::vector<int>{1, 2}, std::vector<int>{1, 2, 3}, p); });
  check_error(ErrorCode::NotAPermutation, [&] { mc::mc(std::vector<int>{1, 1, 3}, std::vector<int>{1, 2, 3}, p); });
  check_error(ErrorCode::NotAPermutation, [&] { mc::mc(std::vector<int>{0, 1, 2}, std::vector<int>{1, 2, 3}, p); });
  check_error(ErrorCode::TooFewMethods, [&] { mc::mc(std::vector<int>{1}, std::vector<int>{1}, p); });
  check_error(ErrorCode::InvalidArgument, [&] { validate({1.0, 0.9, 0.1}); });
  check_error(ErrorCode::InvalidArgument, [&] { validate({0.9, 0.0, 0.1}); });
  check_error(ErrorCode::InvalidArgument, [&] { validate({0.9, 0.9, 0.0}); });
}

TEST_CASE("mc_report examples") {
  ScoreTable t;
  t.methods = {"a", "b", "c"};
  t.add_column("metric", {0.9, 0.8, 0.1}, {ColumnKind::Metric, true});
  t.add_column("ref", {0.5, 0.9, 0.2}, {ColumnKind::Reference, true});
  t.add_column("ref_low", {3, 2, 1}, {ColumnKind::Reference, false});
  const std::vector<std::string> metrics = {"metric"}, refs = {"ref", "metric", "ref_low"};
  const McReport r = mc_report(t, metrics, refs, {0.9, 0.9, 0.1});
  CHECK(r.cell("metric", "metric").result.mc == 1.0);
  CHECK(std::abs(r.cell("metric", "ref").result.mc - std::exp(-0.171)) < 1e-12);
  // Lower-is-better {3, 2, 1} ranks c, b, a: the first and last swap.
  CHECK(r.cell("metric", "ref_low").result.mc < r.cell("metric", "ref").result.mc);
  check_error(ErrorCode::UnknownColumn, [&] { r.cell("nope", "ref"); });
  const std::vector<std::string> unknown = {"zzz"};
  check_error(ErrorCode::UnknownColumn, [&] { mc_report(t, unknown, refs, {}); });
  check_error(ErrorCode::LengthMismatch, [&] { t.add_column("short", {1.0}, {}); });
}

TEST_CASE("mc_report is invariant under row permutation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  ScoreTable t;
  t.methods = ids(16);
  std::vector<double> a(16), b(16);
  for (int i = 0; i < 16; ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
  }
  t.add_column("m", a, {ColumnKind::Metric, true});
  t.add_column("r", b, {ColumnKind::Reference, true});
  std::vector<std::size_t> order(16);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ScoreTable s;
  std::vector<double> pa, pb;
  for (std::size_t i : order) {
    s.methods.push_back(t.methods[i]);
    pa.push_back(a[i]);
    pb.push_back(b[i]);
  }
  s.add_column("m", pa, {ColumnKind::Metric, true});
  s.add_column("r", pb, {ColumnKind::Reference, true});
  const std::vector<std::string> mcol = {"m"}, rcol = {"r"};
  CHECK(mc_report(t, mcol, rcol, {}).cells[0].result.mc == mc_report(s, mcol, rcol, {}).cells[0].result.mc);
}

TEST_CASE("breakdown recomputes the matrix exactly") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  ScoreTable t;
  t.methods = ids(16);
  for (const char* name : {"m1", "m2", "r1", "r2"}) {
    std::vector<double> v(16);
    for (double& x : v) x = u(rng);
    t.add_column(name, v, {name[0] == 'm' ? ColumnKind::Metric : ColumnKind::Reference, true});
  }
  const McReport r = mc_report(t, t.columns_of(ColumnKind::Metric), t.columns_of(ColumnKind::Reference), {});
  const std::string csv = format_breakdown_csv(r);
  const McReport back = parse_breakdown_csv(csv);
  CHECK(format_matrix_csv(back) == format_matrix_csv(r));
  CHECK(format_breakdown_csv(back) == csv);
  for (const McCell& c : r.cells) {
    double sum = 0;
    for (const MethodBreakdown& b : c.result.breakdown) sum += b.weight * b.delta_rank;
    CHECK(std::abs(c.result.mc - std::exp(-r.params.s * sum)) < 1e-12);
  }
  CHECK(format_pretty(r).find("m1") != std::string::npos);
  check_error(ErrorCode::ParseError, [] { parse_breakdown_csv("hello\n"); });
}

TEST_CASE("score table files") {
  testing::TempDir dir;
  testing::spit(dir / "s.csv", "method,psnr,deep\na,30.5,0.9\nb,28,0.95\nc,35,0.5\n");
  testing::spit(dir / "s.json",
                R"({"columns": {"deep": {"kind": "reference", "higher_is_better": true}}})");
  const ScoreTable t = read_score_table(dir / "s.csv", dir / "s.json");
  CHECK(t.methods == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.column("psnr")[1] == 28.0);
  CHECK(t.column_info("deep").kind == ColumnKind::Reference);
  CHECK(t.column_info("psnr").kind == ColumnKind::Metric);
  CHECK(t.columns_of(ColumnKind::Reference) == std::vector<std::string>{"deep"});

  write_score_table(t, dir / "o.csv", dir / "o.json");
  const ScoreTable u = read_score_table(dir / "o.csv", dir / "o.json");
  CHECK(u.scores == t.scores);
  CHECK(u.column_info("deep").kind == ColumnKind::Reference);

  auto parse_error_line = [&](const std::string& text) {
    testing::spit(dir / "bad.csv", text);
    try {
      read_score_table(dir / "bad.csv", {});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(parse_error_line("method,x\na,1\nb,oops\n").find("line 3") != std::string::npos);
  CHECK(parse_error_line("method,x\na,1\nb,2,3\n").find("line 3") != std::string::npos);
  CHECK(parse_error_line("method,x\na,1\na,2\n").find("line 3") != std::string::npos);
  CHECK(parse_error_line("name,x\na,1\n").find("line 1") != std::string::npos);

  testing::spit(dir / "unknown.json", R"({"columns": {"zzz": {"kind": "metric"}}})");
  check_error(ErrorCode::UnknownColumn, [&] { read_score_table(dir / "s.csv", dir / "unknown.json"); });
}

}  // TEST_SUITE
