#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace patchleak {

using Rational = boost::multiprecision::cpp_rational;

// n patches in the pool, n_s of them security fixes, examined in uniformly random order.
struct PoolState {
  std::int64_t n = 0;
  std::int64_t n_s = 0;
};

// X = position of the first security fix. Pr[X = x] = C(n-x, n_s-1) / C(n, n_s) on 1..n-n_s+1.
double effort_pmf(const PoolState& pool, std::int64_t x);
Rational effort_pmf_exact(const PoolState& pool, std::int64_t x);

double expected_effort(const PoolState& pool);
Rational expected_effort_exact(const PoolState& pool);

// Pr[X <= b]. Zero when the pool holds no security fix.
double effort_cdf(const PoolState& pool, std::int64_t b);

// Pr[the k-th security fix sits at position <= b].
double kth_effort_cdf(const PoolState& pool, std::int64_t k, std::int64_t b);
// E[position of the k-th security fix] = k (n+1) / (n_s+1).
double kth_expected_effort(const PoolState& pool, std::int64_t k);

struct DayLanding {
  std::int64_t total = 0;
  std::int64_t security = 0;
};

// Daily landings between two security updates and the attacker's daily budget.
struct LandingSchedule {
  std::vector<DayLanding> days;
  std::int64_t budget = 1;
};

struct DiscoveryDistribution {
  std::vector<double> p;            // Pr[first discovery on day t]
  std::vector<double> conditional;  // Pr[discovery on day t | none before]
  double p_none = 0.0;
};

// Budgeted attacker who examines up to `budget` never-seen patches per day in random order.
// The number of unexamined non-security patches is tracked exactly; a day without any security
// fix in the pool consumes budget but cannot succeed.
DiscoveryDistribution discovery_day_distribution(const LandingSchedule& sched);

// E[Y] = sum_t (N - t + 1) Pr[first discovery on day t].
double expected_window_increase(const LandingSchedule& sched);

// Daily schedule with a constant landing rate whose cumulative security count tracks fraction * total.
LandingSchedule fractional_schedule(std::int64_t days, std::int64_t daily, double fraction, std::int64_t budget);

struct EffortCurvePoint {
  double fraction = 0.0;
  std::int64_t n = 0;
  double n_s = 0.0;             // fraction * n
  double expected_effort = 0.0;  // (n + 1) / (n_s + 1)
  std::int64_t n_s_rounded = 0;
  double expected_effort_rounded = 0.0;
};

// Expected effort against pool size for each fraction; points with fraction * n < 1 are skipped.
std::vector<EffortCurvePoint> effort_vs_pool_curves(std::span<const double> fractions,
                                                    std::span<const std::int64_t> pool_sizes);

struct WindowCurvePoint {
  double fraction = 0.0;
  std::int64_t budget = 0;
  double expected_increase = 0.0;
};

std::vector<WindowCurvePoint> window_vs_budget_curves(std::span<const double> fractions, std::int64_t days,
                                                      std::int64_t daily, std::span<const std::int64_t> budgets);

}  // namespace patchleak
