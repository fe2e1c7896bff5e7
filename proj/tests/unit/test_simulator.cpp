#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "patchleak/errors.hpp"
#include "patchleak/randmodel.hpp"
#include "patchleak/simulator.hpp"
#include "patchleak/synthgen.hpp"

using namespace patchleak;
using fixtures::patch;

namespace {

// Two segments split at 07-06.
//   a  07-01         s1 07-02 high (bug restricted since 06-30)
//   b  07-03         s2 07-03 low  (bug never restricted)
//   c  07-07         s3 07-08 critical (bug restricted 07-09)
Corpus small_corpus() {
  std::vector<PatchRecord> p = {patch("a", "2008-07-01T10:00:00Z"), patch("s1", "2008-07-02T10:00:00Z"),
                                patch("b", "2008-07-03T09:00:00Z"), patch("s2", "2008-07-03T10:00:00Z"),
                                patch("c", "2008-07-07T10:00:00Z"), patch("s3", "2008-07-08T10:00:00Z")};
  p[1].description = "Bug 200001 - fix";
  p[3].description = "Bug 200002 - fix";
  p[5].description = "Bug 200003 - fix";
  std::vector<VulnerabilityLabel> l = {
      fixtures::security_label("s1", "2008-07-06T00:00:00Z", Severity::high),
      fixtures::security_label("s2", "2008-07-06T00:00:00Z", Severity::low),
      fixtures::security_label("s3", "2008-07-11T00:00:00Z", Severity::critical),
  };
  std::vector<BugEventLog> bugs = {
      {100000, {}},
      {200001, {{parse_timestamp("2008-06-30T00:00:00Z"), BugEventKind::restricted}}},
      {200002, {}},
      {200003, {{parse_timestamp("2008-07-09T12:00:00Z"), BugEventKind::restricted}}},
  };
  return Corpus(p, l, fixtures::timeline("2008-07-01", "2008-07-10", {"2008-07-06"}), bugs);
}

SimulationConfig config(int k = 1, SeverityFilter f = SeverityFilter::all) {
  SimulationConfig c;
  c.k = k;
  c.severity = f;
  c.grid = {{0.125, 1.0}};
  c.random_trials = 20000;
  return c;
}

std::optional<double> effort_on(const EffortSeries& s, const char* day) {
  for (const DayRecord& r : s.days)
    if (r.day == parse_day(day)) return r.effort;
  FAIL("day not simulated");
  return std::nullopt;
}

}  // namespace

TEST_CASE("random ranker expected efforts") {
  const Corpus c = small_corpus();
  const EffortSeries s = simulate_random_daily(c, config());
  REQUIRE(s.days.size() == 10);
  CHECK_FALSE(effort_on(s, "2008-07-01"));
  CHECK(*effort_on(s, "2008-07-02") == doctest::Approx(1.5));
  CHECK(*effort_on(s, "2008-07-04") == doctest::Approx(5.0 / 3.0));
  CHECK_FALSE(effort_on(s, "2008-07-06"));
  CHECK_FALSE(effort_on(s, "2008-07-07"));
  CHECK(*effort_on(s, "2008-07-09") == doctest::Approx(1.5));
}

TEST_CASE("severity filter drops low and moderate fixes") {
  const Corpus c = small_corpus();
  CHECK(qualifies(c, 1, SeverityFilter::severe));
  CHECK_FALSE(qualifies(c, 3, SeverityFilter::severe));
  CHECK(qualifies(c, 3, SeverityFilter::all));
  CHECK_FALSE(qualifies(c, 0, SeverityFilter::all));
  const EffortSeries s = simulate_random_daily(c, config(1, SeverityFilter::severe));
  // Pool {a, s1, b, s2} with one severe fix: (4+1)/2 by Monte Carlo.
  const DayRecord& r = s.days[3];
  REQUIRE(r.effort);
  CHECK(r.pool_security_count == 1);
  CHECK(std::abs(*r.effort - 2.5) <= 4 * r.effort_stderr + 1e-9);
  CHECK(r.effort_stderr > 0.0);
}

TEST_CASE("k beyond the qualifying fixes leaves the day without an effort") {
  const Corpus c = small_corpus();
  const EffortSeries s = simulate_random_daily(c, config(3));
  for (const DayRecord& r : s.days) CHECK_FALSE(r.effort);
  const EffortSeries link = simulate_link_daily(c, config(3));
  for (const DayRecord& r : link.days) CHECK_FALSE(r.effort);
}

TEST_CASE("link ranker puts evident fixes first") {
  const Corpus c = small_corpus();
  const EffortSeries s = simulate_link_daily(c, config());
  CHECK(*effort_on(s, "2008-07-02") == 1.0);
  CHECK(*effort_on(s, "2008-07-03") == 1.0);
  CHECK(*effort_on(s, "2008-07-08") == 2.0);
  CHECK(*effort_on(s, "2008-07-09") == 1.0);
  const EffortSeries k2 = simulate_link_daily(c, config(2));
  for (std::size_t d = 0; d < s.days.size(); ++d)
    if (k2.days[d].effort) CHECK(*k2.days[d].effort >= *s.days[d].effort);
  CHECK(*effort_on(k2, "2008-07-03") == 4.0);  // s1, a, b, s2
}

TEST_CASE("random analytic and Monte Carlo agree") {
  SynthConfig sc;
  sc.days = 60;
  const Corpus c = generate(sc);
  // k=2 goes through Monte Carlo; the closed form k(n+1)/(n_s+1) is the reference.
  const EffortSeries mc = simulate_random_daily(c, config(2));
  for (const DayRecord& r : mc.days) {
    if (!r.effort) continue;
    const double exact = kth_expected_effort({static_cast<std::int64_t>(r.pool_size),
                                              static_cast<std::int64_t>(r.pool_security_count)},
                                             2);
    CHECK(std::abs(*r.effort - exact) <= 4.5 * r.effort_stderr + 1e-9);
  }
}

TEST_CASE("effort CDF properties") {
  SynthConfig sc;
  sc.days = 90;
  const Corpus c = generate(sc);
  for (RankerKind kind : {RankerKind::random, RankerKind::link}) {
    const EffortSeries s = simulate(c, kind, config());
    const EffortCdf cdf = effort_cdf(s, default_trim_day(c), 100);
    REQUIRE(cdf.points.size() == 100);
    CHECK(cdf.days == 40);
    double prev = 0.0;
    for (const CdfPoint& p : cdf.points) {
      CHECK(p.fraction >= prev - 1e-12);
      CHECK(p.fraction <= cdf.asymptote + 1e-12);
      prev = p.fraction;
    }
    CHECK(cdf.at(0) == 0.0);
    CHECK(cdf.at(1000) == cdf.points.back().fraction);
    CHECK_THROWS_AS(effort_cdf(s, c.timeline().period_end + std::chrono::days{1}), EmptyWindow);
  }
}

TEST_CASE("window increase") {
  const Corpus c = small_corpus();
  const EffortSeries random = simulate_random_daily(c, config());
  const EffortSeries link = simulate_link_daily(c, config());
  SUBCASE("zero budget") {
    CHECK(window_increase(c, random, 0).total_increase_days == 0.0);
    CHECK(window_increase(c, link, 0).total_increase_days == 0.0);
  }
  SUBCASE("budget covering every pool finds each fix on its landing day") {
    // 07-02 .. 07-05 plus 07-08 .. 07-10.
    CHECK(window_increase(c, random, 100).total_increase_days == doctest::Approx(7.0));
    CHECK(window_increase(c, link, 100).total_increase_days == doctest::Approx(7.0));
  }
  SUBCASE("one patch a day along the link ranking") {
    const WindowReport w = window_increase(c, link, 1, 3.5);
    REQUIRE(w.segments.size() == 2);
    CHECK(*w.segments[0].discovery_day == parse_day("2008-07-02"));
    CHECK(*w.segments[1].discovery_day == parse_day("2008-07-08"));
    CHECK(w.total_increase_days == 7.0);
    CHECK(*w.multiplicative_factor == doctest::Approx(2.0));
  }
  SUBCASE("random expectation is monotone in the budget") {
    SynthConfig sc;
    sc.days = 62;
    const Corpus g = generate(sc);
    const EffortSeries s = simulate_random_daily(g, config());
    double prev = -1.0;
    for (std::int64_t b : {0, 1, 2, 3, 7, 20, 100}) {
      const double y = window_increase(g, s, b).total_increase_days;
      CHECK(y >= prev);
      prev = y;
    }
  }
  CHECK_THROWS_AS(window_increase(c, random, -1), InvalidConfig);
  CHECK_FALSE(window_increase(c, random, 1, 0.0).multiplicative_factor);
}

TEST_CASE("svm ranker on a leaky synthetic corpus") {
  SynthConfig sc;
  sc.days = 100;
  sc.update_every = 25;
  sc.leaks = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  const Corpus c = generate(sc);
  const EffortSeries s = simulate_svm_daily(c, config());
  REQUIRE(s.days.size() == 100);
  std::size_t trained = 0;
  for (const DayRecord& r : s.days) {
    std::vector<std::size_t> pool = c.pool_indices(r.day);
    std::set<std::size_t> a(pool.begin(), pool.end()), b(r.ranking.begin(), r.ranking.end());
    CHECK(a == b);
    CHECK(r.ranking.size() == pool.size());
    if (r.effort) CHECK((*r.effort >= 1.0 && *r.effort <= static_cast<double>(r.pool_size)));
    if (r.pool_security_count == 0) CHECK_FALSE(r.effort);
    if (r.day < c.timeline().security_updates.front()) CHECK(r.fallback);
    if (!r.fallback) {
      ++trained;
      CHECK(r.params == KernelParams{0.125, 1.0});
    }
  }
  CHECK(trained > 0);
  const EffortSeries again = simulate_svm_daily(c, config());
  for (std::size_t d = 0; d < s.days.size(); ++d) CHECK(s.days[d].ranking == again.days[d].ranking);

  SUBCASE("ablating a feature the generator never leaks") {
    const AblationResult r = ablation_run(c, s, "day_of_week", config(), {1, 3}, 20);
    CHECK(r.cdf_delta.size() == 20);
    CHECK(r.window_delta.size() == 2);
    const Day trim = default_trim_day(c);
    CHECK(r.cdf5_drop == doctest::Approx(effort_cdf(s, trim, 20).at(5) - effort_cdf(r.series, trim, 20).at(5)));
  }
}

TEST_CASE("configuration errors") {
  const Corpus c = small_corpus();
  CHECK_THROWS_AS(simulate_random_daily(c, config(0)), InvalidConfig);
  CHECK_THROWS_AS(parse_ranker("oracle"), InvalidConfig);
  CHECK(parse_ranker("link") == RankerKind::link);
  CHECK(parse_severity_filter("severe") == SeverityFilter::severe);
  const Corpus no_bugs({patch("a", "2008-07-01T10:00:00Z")}, {}, fixtures::timeline("2008-07-01", "2008-07-10", {}));
  CHECK_THROWS_AS(simulate_link_daily(no_bugs, config()), MissingBugEvents);
}

TEST_CASE("second fix in a pool of five: Monte Carlo against enumeration") {
  std::vector<PatchRecord> p;
  for (int i = 0; i < 5; ++i) p.push_back(patch("p" + std::to_string(i), "2008-07-01T1" + std::to_string(i) + ":00:00Z"));
  std::vector<VulnerabilityLabel> l = {fixtures::security_label("p1", "2008-08-01T00:00:00Z"),
                                       fixtures::security_label("p3", "2008-08-01T00:00:00Z")};
  const Corpus c(p, l, fixtures::timeline("2008-07-01", "2008-07-02", {}));
  SimulationConfig cfg = config(2);
  cfg.random_trials = 100000;
  const DayRecord& r = simulate_random_daily(c, cfg).days.front();
  REQUIRE(r.effort);
  CHECK(std::abs(*r.effort - 4.0) <= 3 * r.effort_stderr);
}

TEST_CASE("analytic random efforts match Monte Carlo on every day") {
  // Every label severe: the severity filter forces the Monte Carlo path without changing targets.
  SynthConfig sc;
  sc.days = 62;
  sc.severity_mix = {0.0, 0.0, 1.0, 1.0};
  const Corpus c = generate(sc);
  SimulationConfig cfg = config();
  cfg.random_trials = 100000;
  const EffortSeries exact = simulate_random_daily(c, cfg);
  cfg.severity = SeverityFilter::severe;
  const EffortSeries mc = simulate_random_daily(c, cfg);
  std::size_t compared = 0;
  for (std::size_t d = 0; d < exact.days.size(); ++d) {
    REQUIRE(exact.days[d].effort.has_value() == mc.days[d].effort.has_value());
    if (!exact.days[d].effort) continue;
    CHECK(std::abs(*exact.days[d].effort - *mc.days[d].effort) <= 3 * mc.days[d].effort_stderr + 1e-12);
    ++compared;
  }
  CHECK(compared > 30);
}

TEST_CASE("a series found at rank one everywhere reaches its asymptote at effort one") {
  const Corpus c = small_corpus();
  EffortSeries s = simulate_link_daily(c, config());
  for (DayRecord& r : s.days)
    if (r.effort) r.effort = 1.0;
  const EffortCdf cdf = effort_cdf(s, c.timeline().period_start, 10);
  CHECK(cdf.at(1) == doctest::Approx(cdf.asymptote));
  CHECK(cdf.asymptote == doctest::Approx(7.0 / 10.0));
}
