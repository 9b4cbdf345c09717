#include <doctest.h>

#include <random>

#include "hrnav/error.hpp"
#include "hrnav/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hrnav;

namespace {

EpisodeResult res(bool ok, double l, double p, Difficulty d = Difficulty::Easy) {
  EpisodeResult r;
  r.success = ok;
  r.shortest = l;
  r.traveled = p;
  r.difficulty = d;
  return r;
}

StepRecord rec(double x, double y, int heading, Action a, bool revisit = false) {
  StepRecord s;
  s.x = x;
  s.y = y;
  s.heading = heading;
  s.action = a;
  s.revisit = revisit;
  return s;
}

}  // namespace

TEST_CASE("spl: examples") {
  CHECK(spl({res(true, 3, 3)}) == 1.0);
  CHECK(spl({res(true, 2, 4)}) == 0.5);
  CHECK(spl({res(false, 2, 2)}) == 0.0);
  CHECK(spl({res(true, 2, 1)}) == 1.0);  // p < l is clamped
  CHECK_THROWS_AS(spl({res(true, 0, 1)}), Error);
  try {
    spl({});
    FAIL("expected EmptyResultSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyResultSet);
  }
}

TEST_CASE("sr: examples") {
  CHECK_THROWS_AS(sr({}), Error);
  CHECK(sr({res(true, 1, 1)}) == 1.0);
  CHECK(sr({res(true, 1, 1), res(false, 1, 1), res(true, 1, 1), res(false, 1, 1)}) == 0.5);
}

TEST_CASE("spl and sr agree with brute force; 0 <= SPL <= SR <= 1") {
  std::mt19937_64 rng(314);
  for (int i = 0; i < 500; ++i) {
    const auto rs = support::random_results(rng);
    const double s = sr(rs), p = spl(rs);
    REQUIRE(s == doctest::Approx(oracle::brute_sr(rs)).epsilon(1e-12));
    REQUIRE(p == doctest::Approx(oracle::brute_spl(rs)).epsilon(1e-12));
    REQUIRE(0.0 <= p);
    REQUIRE(p <= s + 1e-15);
    REQUIRE(s <= 1.0);
  }
}

TEST_CASE("stratified_report: single stratum") {
  const auto rep = stratified_report({res(true, 2, 4, Difficulty::Medium), res(false, 2, 2, Difficulty::Medium)});
  CHECK_FALSE(rep.strata[0].has_value());
  CHECK_FALSE(rep.strata[2].has_value());
  REQUIRE(rep.strata[1].has_value());
  CHECK(rep.strata[1]->sr == rep.overall.sr);
  CHECK(rep.strata[1]->spl == rep.overall.spl);
  CHECK_FALSE(rep.pooled_differs_from_macro);
}

TEST_CASE("stratified_report: pooled overall") {
  std::vector<EpisodeResult> rs;
  for (int i = 0; i < 4; ++i) rs.push_back(res(true, 1, 1, Difficulty::Easy));
  for (int i = 0; i < 4; ++i) rs.push_back(res(i < 2, 1, 1, Difficulty::Medium));
  for (int i = 0; i < 4; ++i) rs.push_back(res(false, 1, 1, Difficulty::Hard));
  const auto rep = stratified_report(rs);
  CHECK(rep.strata[0]->sr == 1.0);
  CHECK(rep.strata[1]->sr == 0.5);
  CHECK(rep.strata[2]->sr == 0.0);
  CHECK(rep.overall.sr == 0.5);
  CHECK_FALSE(rep.pooled_differs_from_macro);
}

TEST_CASE("stratified_report: unequal strata expose pooled vs macro mean") {
  std::vector<EpisodeResult> rs;
  for (int i = 0; i < 9; ++i) rs.push_back(res(true, 1, 1, Difficulty::Easy));
  rs.push_back(res(false, 1, 1, Difficulty::Hard));
  const auto rep = stratified_report(rs);
  CHECK(rep.overall.sr == doctest::Approx(0.9));
  CHECK(rep.macro.sr == doctest::Approx(0.5));
  CHECK(rep.pooled_differs_from_macro);
  const auto csv = results_csv(rep, "test", "abc");
  CHECK(csv.find("split,difficulty,n,SR,SPL\n") == 0);
  CHECK(csv.find("test,Easy,9,1.000000,1.000000\n") != std::string::npos);
  CHECK(csv.find("test,Hard,1,0.000000,0.000000\n") != std::string::npos);
  CHECK(csv.find("test,Overall,10,0.900000,0.900000\n") != std::string::npos);
  CHECK(csv.find("# config_hash=abc") != std::string::npos);
  CHECK(csv.find("macro_SR=0.500000") != std::string::npos);
}

TEST_CASE("amortized_latency: examples") {
  CHECK(amortized_latency(14.22, 374.12, 15) == doctest::Approx(39.1613).epsilon(1e-4));
  // The reference measurement for k = 15 is 41.16 ms: about 2 ms above the model.
  CHECK(41.16 - amortized_latency(14.22, 374.12, 15) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(amortized_latency(14.22, 374.12, 1) == doctest::Approx(14.22 + 374.12));
  CHECK(amortized_latency(14.22, 374.12, 1000000) == doctest::Approx(14.22).epsilon(1e-4));
  double prev = 1e300;
  for (int k = 1; k <= 100; ++k) {
    const double m = amortized_latency(10, 300, k);
    CHECK(m < prev);
    prev = m;
  }
  CHECK_THROWS_AS(amortized_latency(1, 1, 0), Error);
}

TEST_CASE("wandering_diagnostics: constructed logs") {
  EpisodeLog straight;
  straight.header.start = {0.125, 0.125, 0};
  straight.header.shortest_path_length = 1.0;
  for (int i = 1; i <= 4; ++i) straight.steps.push_back(rec(0.125 + 0.25 * i, 0.125, 0, Action::MoveForward));
  auto d = wandering_diagnostics(straight);
  CHECK(d.revisit_rate == 0.0);
  CHECK(d.path_ratio == doctest::Approx(1.0));
  CHECK(d.oscillation_count == 0);

  EpisodeLog back;
  back.header.start = {0.125, 0.125, 0};
  back.header.shortest_path_length = 0.25;
  back.steps = {rec(0.375, 0.125, 0, Action::MoveForward),
                rec(0.375, 0.125, 180, Action::TurnLeft),
                rec(0.125, 0.125, 180, Action::MoveForward, true),
                rec(0.125, 0.125, 0, Action::TurnLeft)};
  d = wandering_diagnostics(back);
  CHECK(d.revisit_rate > 0.0);
  CHECK(d.path_ratio == doctest::Approx(2.0));

  // Left-right dithering in place: no displacement, no re-entry.
  EpisodeLog spin;
  spin.header.start = {0.125, 0.125, 0};
  spin.header.shortest_path_length = 1.0;
  const Action seq[] = {Action::TurnLeft, Action::TurnRight, Action::TurnLeft, Action::TurnRight};
  int h = 0;
  for (Action a : seq) {
    h = normalize_heading(h + (a == Action::TurnLeft ? 30 : -30));
    spin.steps.push_back(rec(0.125, 0.125, h, a));
  }
  d = wandering_diagnostics(spin);
  CHECK(d.revisit_rate == 0.0);
  CHECK(d.oscillation_count == 2);
}

TEST_CASE("result_from_log uses raw step records") {
  EpisodeLog log;
  log.header.episode_id = "e";
  log.header.start = {0, 0, 0};
  log.header.shortest_path_length = 0.5;
  log.header.difficulty = Difficulty::Hard;
  auto a = rec(0.25, 0, 0, Action::MoveForward);
  a.d_t = 1.2;
  auto b = rec(0.5, 0, 0, Action::MoveForward);
  b.d_t = 0.95;
  auto c = rec(0.5, 0, 0, Action::Stop);
  c.d_t = 0.95;
  log.steps = {a, b, c};
  log.footer.success = false;  // ignored
  const auto r = result_from_log(log);
  CHECK(r.success);
  CHECK(r.traveled == doctest::Approx(0.5));
  CHECK(r.steps == 3);
  CHECK(r.difficulty == Difficulty::Hard);
  log.steps.back().d_t = 1.01;
  CHECK_FALSE(result_from_log(log).success);
}

TEST_CASE("student t upper tail matches table values") {
  // Critical values of the one-sided test at 5% and 1%.
  CHECK(oracle::student_t_upper(2.131847, 4) == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(oracle::student_t_upper(3.746947, 4) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(oracle::student_t_upper(0.0, 4) == doctest::Approx(0.5));
  CHECK(oracle::student_t_upper(-2.131847, 4) == doctest::Approx(0.95).epsilon(1e-5));
}
