#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patchleak/corpus.hpp"
#include "patchleak/features.hpp"
#include "patchleak/learner.hpp"
#include "patchleak/linkattack.hpp"

namespace patchleak {

enum class RankerKind { svm, random, link };
enum class SeverityFilter { all, severe };

std::string_view to_string(RankerKind r);
RankerKind parse_ranker(std::string_view text);
std::string_view to_string(SeverityFilter s);
SeverityFilter parse_severity_filter(std::string_view text);

struct SimulationConfig {
  int k = 1;
  SeverityFilter severity = SeverityFilter::all;
  FeatureMask mask = FeatureMask::all();
  std::vector<KernelParams> grid = default_grid();
  int folds = 5;
  std::uint64_t seed = 0;
  SolverOptions solver;
  std::int64_t random_trials = 100000;  // Monte Carlo trials for the random ranker
  LinkAttackOptions link;
};

struct DayRecord {
  Day day;
  std::size_t pool_size = 0;
  std::size_t pool_security_count = 0;  // security fixes in the pool passing the severity filter
  std::optional<double> effort;          // rank of the k-th qualifying fix (expected rank for random)
  double effort_stderr = 0.0;            // Monte Carlo standard error, random ranker only
  bool fallback = false;                 // learner unavailable; pool ranked in seeded random order
  std::string note;
  std::optional<KernelParams> params;
  std::vector<std::size_t> ranking;  // corpus patch indices, best first (svm and link rankers)
};

struct EffortSeries {
  RankerKind ranker = RankerKind::svm;
  int k = 1;
  SeverityFilter severity = SeverityFilter::all;
  std::vector<DayRecord> days;
};

// Whether patch i counts as a target under the filter.
bool qualifies(const Corpus& corpus, std::size_t patch_index, SeverityFilter filter);

EffortSeries simulate_svm_daily(const Corpus& corpus, const SimulationConfig& config);
EffortSeries simulate_random_daily(const Corpus& corpus, const SimulationConfig& config);
// Patches whose bug history is security-evident rank first, each group in landing order.
EffortSeries simulate_link_daily(const Corpus& corpus, const SimulationConfig& config);
EffortSeries simulate(const Corpus& corpus, RankerKind ranker, const SimulationConfig& config);

struct CdfPoint {
  std::int64_t effort = 0;
  double fraction = 0.0;
};

struct EffortCdf {
  Day from_day;
  std::size_t days = 0;
  double asymptote = 0.0;  // fraction of days with at least k qualifying fixes in the pool
  std::vector<CdfPoint> points;  // efforts 1..max_effort

  double at(std::int64_t effort) const;
};

Day default_trim_day(const Corpus& corpus);  // period start + 50 days

// Empirical CDF of realised efforts over days >= from_day. For the random ranker the per-day
// effort distribution is used: CDF(e) = mean over days of Pr[rank of k-th fix <= e].
EffortCdf effort_cdf(const EffortSeries& series, Day from_day, std::int64_t max_effort = 0);

// Effort-distribution CDF of the random ranker for the pools in `series`.
EffortCdf random_effort_cdf(const EffortSeries& series, Day from_day, std::int64_t max_effort);

struct SegmentWindow {
  Segment segment;
  std::optional<Day> discovery_day;  // svm/link: day the k-th qualifying fix was examined
  double increase_days = 0.0;        // expected value for the random ranker
};

struct WindowReport {
  RankerKind ranker = RankerKind::svm;
  std::int64_t budget = 0;
  double total_increase_days = 0.0;
  double baseline_days = 3.4;
  std::optional<double> multiplicative_factor;  // total / baseline, when baseline > 0
  std::vector<SegmentWindow> segments;
};

// Budgeted attacker who examines up to `budget` new patches a day in ranking order and never
// re-examines; the state resets at each security update.
WindowReport window_increase(const Corpus& corpus, const EffortSeries& series, std::int64_t budget,
                             double baseline_days = 3.4, std::uint64_t seed = 0, std::int64_t trials = 20000);

struct AblationResult {
  std::string removed;
  std::vector<CdfPoint> cdf_delta;  // ablated minus full, per effort
  std::vector<std::pair<std::int64_t, double>> window_delta;  // per budget, ablated minus full
  double cdf5_drop = 0.0;                                      // full CDF(5) - ablated CDF(5)
  EffortSeries series;
};

AblationResult ablation_run(const Corpus& corpus, const EffortSeries& full, const std::string& feature_group,
                            const SimulationConfig& config, const std::vector<std::int64_t>& budgets,
                            std::int64_t max_effort = 100);

}  // namespace patchleak
