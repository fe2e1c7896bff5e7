#include "patchleak/randmodel.hpp"

#include <algorithm>
#include <cmath>

#include "patchleak/errors.hpp"

namespace patchleak {

namespace {

using boost::multiprecision::cpp_int;

constexpr std::int64_t kExactLimit = 60;

void require_valid(const PoolState& pool) {
  if (pool.n <= 0 || pool.n_s < 1 || pool.n_s > pool.n)
    throw InvalidSupport("pool requires n > 0 and 1 <= n_s <= n (got n=" + std::to_string(pool.n) +
                         ", n_s=" + std::to_string(pool.n_s) + ")");
}

void require_support(const PoolState& pool, std::int64_t x) {
  require_valid(pool);
  if (x < 1 || x > pool.n - pool.n_s + 1)
    throw InvalidSupport("effort " + std::to_string(x) + " outside 1.." + std::to_string(pool.n - pool.n_s + 1));
}

cpp_int binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  cpp_int r = 1;
  for (std::int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double log_binomial(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

Rational effort_pmf_exact(const PoolState& pool, std::int64_t x) {
  require_support(pool, x);
  return Rational(binomial(pool.n - x, pool.n_s - 1), binomial(pool.n, pool.n_s));
}

double effort_pmf(const PoolState& pool, std::int64_t x) {
  require_support(pool, x);
  if (pool.n <= kExactLimit) return static_cast<double>(effort_pmf_exact(pool, x));
  return std::exp(log_binomial(pool.n - x, pool.n_s - 1) - log_binomial(pool.n, pool.n_s));
}

Rational expected_effort_exact(const PoolState& pool) {
  require_valid(pool);
  Rational sum = 0;
  for (std::int64_t x = 1; x <= pool.n - pool.n_s + 1; ++x) sum += x * effort_pmf_exact(pool, x);
  return sum;
}

double expected_effort(const PoolState& pool) {
  require_valid(pool);
  // E[X] = sum_{x >= 1} Pr[X >= x]; Pr[X >= x+1] = Pr[X >= x] (n - n_s - x + 1) / (n - x + 1).
  CompensatedSum sum;
  double survival = 1.0;
  const double n = static_cast<double>(pool.n);
  const double ns = static_cast<double>(pool.n_s);
  for (std::int64_t x = 1; x <= pool.n - pool.n_s + 1; ++x) {
    sum.add(survival);
    const double xd = static_cast<double>(x);
    survival *= (n - ns - xd + 1.0) / (n - xd + 1.0);
  }
  return sum.value();
}

double effort_cdf(const PoolState& pool, std::int64_t b) {
  if (pool.n_s < 0 || pool.n < pool.n_s) throw NegativePool("pool with n_s outside [0, n]");
  if (pool.n_s == 0 || b <= 0) return 0.0;
  if (b >= pool.n - pool.n_s + 1) return 1.0;
  double miss = 1.0;
  for (std::int64_t i = 0; i < b; ++i)
    miss *= static_cast<double>(pool.n - pool.n_s - i) / static_cast<double>(pool.n - i);
  return 1.0 - miss;
}

double kth_effort_cdf(const PoolState& pool, std::int64_t k, std::int64_t b) {
  if (k < 1) throw InvalidSupport("k must be positive");
  if (pool.n_s < k || b < k) return 0.0;
  if (k == 1) return effort_cdf(pool, b);
  if (b >= pool.n) return 1.0;
  // Hypergeometric tail: at least k security fixes among the first b examined.
  const double denom = log_binomial(pool.n, b);
  CompensatedSum below;
  for (std::int64_t j = std::max<std::int64_t>(0, b - (pool.n - pool.n_s)); j < k; ++j)
    below.add(std::exp(log_binomial(pool.n_s, j) + log_binomial(pool.n - pool.n_s, b - j) - denom));
  return std::clamp(1.0 - below.value(), 0.0, 1.0);
}

double kth_expected_effort(const PoolState& pool, std::int64_t k) {
  require_valid(pool);
  if (k < 1 || k > pool.n_s) throw InvalidSupport("k outside 1..n_s");
  return static_cast<double>(k) * static_cast<double>(pool.n + 1) / static_cast<double>(pool.n_s + 1);
}

DiscoveryDistribution discovery_day_distribution(const LandingSchedule& sched) {
  if (sched.budget < 0) throw InvalidConfig("budget must be non-negative");
  DiscoveryDistribution out;
  std::int64_t remaining_plain = 0;  // unexamined non-security patches
  std::int64_t security = 0;         // security fixes landed so far (none examined before discovery)
  double undiscovered = 1.0;
  for (const DayLanding& day : sched.days) {
    if (day.total < 0 || day.security < 0 || day.security > day.total)
      throw NegativePool("day with " + std::to_string(day.security) + " security fixes among " +
                         std::to_string(day.total) + " landings");
    remaining_plain += day.total - day.security;
    security += day.security;
    double q = 0.0;
    if (security == 0) {
      remaining_plain -= std::min(sched.budget, remaining_plain);
    } else {
      q = effort_cdf({remaining_plain + security, security}, sched.budget);
      // On failure the whole budget went to non-security patches.
      if (q < 1.0) remaining_plain -= sched.budget;
      if (remaining_plain < 0) throw NegativePool("examined more patches than have landed");
    }
    out.conditional.push_back(q);
    out.p.push_back(undiscovered * q);
    undiscovered *= 1.0 - q;
  }
  CompensatedSum total;
  for (double p : out.p) total.add(p);
  out.p_none = std::max(0.0, 1.0 - total.value());
  return out;
}

double expected_window_increase(const LandingSchedule& sched) {
  const DiscoveryDistribution d = discovery_day_distribution(sched);
  const auto n_days = static_cast<std::int64_t>(d.p.size());
  CompensatedSum sum;
  for (std::int64_t t = 1; t <= n_days; ++t) sum.add(static_cast<double>(n_days - t + 1) * d.p[t - 1]);
  return sum.value();
}

LandingSchedule fractional_schedule(std::int64_t days, std::int64_t daily, double fraction, std::int64_t budget) {
  if (days < 1 || daily < 0 || fraction < 0.0 || fraction > 1.0) throw InvalidConfig("invalid schedule parameters");
  LandingSchedule s;
  s.budget = budget;
  std::int64_t previous = 0;
  for (std::int64_t t = 1; t <= days; ++t) {
    const auto cumulative = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(daily * t)));
    s.days.push_back({daily, std::min(daily, cumulative - previous)});
    previous = cumulative;
  }
  return s;
}

std::vector<EffortCurvePoint> effort_vs_pool_curves(std::span<const double> fractions,
                                                    std::span<const std::int64_t> pool_sizes) {
  std::vector<EffortCurvePoint> out;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) throw InvalidConfig("fractions must lie in (0, 1)");
    for (std::int64_t n : pool_sizes) {
      const double ns = f * static_cast<double>(n);
      if (ns < 1.0) continue;
      EffortCurvePoint p;
      p.fraction = f;
      p.n = n;
      p.n_s = ns;
      p.expected_effort = static_cast<double>(n + 1) / (ns + 1.0);
      p.n_s_rounded = std::clamp<std::int64_t>(std::llround(ns), 1, n - 1);
      p.expected_effort_rounded = expected_effort({n, p.n_s_rounded});
      out.push_back(p);
    }
  }
  return out;
}

std::vector<WindowCurvePoint> window_vs_budget_curves(std::span<const double> fractions, std::int64_t days,
                                                      std::int64_t daily, std::span<const std::int64_t> budgets) {
  std::vector<WindowCurvePoint> out;
  for (double f : fractions) {
    for (std::int64_t b : budgets)
      out.push_back({f, b, expected_window_increase(fractional_schedule(days, daily, f, b))});
  }
  return out;
}

}  // namespace patchleak
