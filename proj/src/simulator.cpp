#include "patchleak/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <unordered_map>

#include "patchleak/errors.hpp"
#include "patchleak/randmodel.hpp"

namespace patchleak {

std::string_view to_string(RankerKind r) {
  switch (r) {
    case RankerKind::svm: return "svm";
    case RankerKind::random: return "random";
    case RankerKind::link: return "link";
  }
  return "?";
}

RankerKind parse_ranker(std::string_view text) {
  if (text == "svm") return RankerKind::svm;
  if (text == "random") return RankerKind::random;
  if (text == "link") return RankerKind::link;
  throw InvalidConfig("unknown ranker '" + std::string(text) + "' (expected svm, random or link)");
}

std::string_view to_string(SeverityFilter s) { return s == SeverityFilter::all ? "all" : "severe"; }

SeverityFilter parse_severity_filter(std::string_view text) {
  if (text == "all") return SeverityFilter::all;
  if (text == "severe" || text == "high_or_critical") return SeverityFilter::severe;
  throw InvalidConfig("unknown severity filter '" + std::string(text) + "' (expected all or severe)");
}

bool qualifies(const Corpus& corpus, std::size_t i, SeverityFilter filter) {
  const VulnerabilityLabel* l = corpus.label_of(i);
  if (!l || !l->is_security) return false;
  return filter == SeverityFilter::all || is_severe(*l->severity);
}

namespace {

using std::chrono::days;

std::uint64_t mix(std::uint64_t seed, std::int64_t salt) {
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(salt) * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::int64_t day_number(Day d) { return d.time_since_epoch().count(); }

void validate(const SimulationConfig& config) {
  if (config.k < 1) throw InvalidConfig("k must be positive");
  if (config.random_trials < 1) throw InvalidConfig("random_trials must be positive");
}

// Counts qualifying fixes, then records the 1-based rank of the k-th one in `ranking`.
void fill_effort(const Corpus& corpus, const SimulationConfig& config, DayRecord& rec) {
  std::size_t found = 0;
  for (std::size_t r = 0; r < rec.ranking.size(); ++r) {
    if (!qualifies(corpus, rec.ranking[r], config.severity)) continue;
    if (++found == static_cast<std::size_t>(config.k)) {
      rec.effort = static_cast<double>(r + 1);
      break;
    }
  }
}

DayRecord start_record(const Corpus& corpus, const SimulationConfig& config, Day d,
                       const std::vector<std::size_t>& pool) {
  DayRecord rec;
  rec.day = d;
  rec.pool_size = pool.size();
  rec.pool_security_count = static_cast<std::size_t>(
      std::count_if(pool.begin(), pool.end(), [&](std::size_t i) { return qualifies(corpus, i, config.severity); }));
  return rec;
}

// Learner state for one training cut (the patches before the most recent security update).
// Models are keyed by the set of training patches whose security label is visible.
class SvmRanker {
 public:
  SvmRanker(const Corpus& corpus, const SimulationConfig& config) : corpus_(corpus), config_(config) {}

  void rank(Day d, const std::vector<std::size_t>& pool, DayRecord& rec) {
    const std::vector<std::size_t> training = corpus_.training_indices(d);
    if (training.size() != train_.size() || !schema_) reset(training);

    std::vector<std::size_t> visible;
    for (std::size_t i : train_)
      if (corpus_.visible_label(i, d)) visible.push_back(i);
    auto it = models_.find(visible);
    if (it == models_.end()) it = models_.emplace(visible, build(visible)).first;
    Model& m = it->second;

    rec.note = m.note;
    rec.fallback = !m.trained;
    rec.params = m.trained ? std::optional<KernelParams>(m.model.params) : std::nullopt;
    rec.ranking = pool;
    if (!m.trained) {
      std::mt19937_64 rng(mix(config_.seed, day_number(d)));
      std::shuffle(rec.ranking.begin(), rec.ranking.end(), rng);
      return;
    }

    std::vector<std::size_t> missing;
    for (std::size_t i : pool)
      if (!m.decision.count(i)) missing.push_back(i);
    if (!missing.empty()) {
      std::vector<FeatureVector> xs;
      xs.reserve(missing.size());
      for (std::size_t i : missing) xs.push_back(extract(*schema_, corpus_.patch(i)));
      const std::vector<double> dec = m.model.decisions(xs);
      for (std::size_t j = 0; j < missing.size(); ++j) m.decision[missing[j]] = dec[j];
    }
    std::stable_sort(rec.ranking.begin(), rec.ranking.end(), [&](std::size_t a, std::size_t b) {
      const double da = m.decision.at(a);
      const double db = m.decision.at(b);
      const double sa = m.model.calibration->probability(da);
      const double sb = m.model.calibration->probability(db);
      if (sa != sb) return sa > sb;
      if (da != db) return da > db;
      const PatchRecord& pa = corpus_.patch(a);
      const PatchRecord& pb = corpus_.patch(b);
      if (pa.landed_at != pb.landed_at) return pa.landed_at < pb.landed_at;
      return pa.id < pb.id;
    });
  }

 private:
  struct Model {
    bool trained = false;
    TrainedModel model;
    std::string note;
    std::unordered_map<std::size_t, double> decision;
  };

  void reset(const std::vector<std::size_t>& training) {
    train_ = training;
    models_.clear();
    workspace_.reset();
    features_.clear();
    schema_.reset();
    if (train_.empty()) return;
    std::vector<const PatchRecord*> records;
    records.reserve(train_.size());
    for (std::size_t i : train_) records.push_back(&corpus_.patch(i));
    schema_ = build_schema(std::span<const PatchRecord* const>(records), config_.mask);
  }

  Model build(const std::vector<std::size_t>& visible) {
    Model m;
    if (train_.empty()) {
      m.note = "random order: no training data";
      return m;
    }
    if (visible.empty()) {
      m.note = "random order: no disclosed security fix in training data";
      return m;
    }
    if (visible.size() == train_.size()) {
      m.note = "random order: no non-security patch in training data";
      return m;
    }
    if (!workspace_) {
      features_.reserve(train_.size());
      for (std::size_t i : train_) features_.push_back(extract(*schema_, corpus_.patch(i)));
      workspace_ = std::make_unique<KernelWorkspace>(features_);
    }
    std::vector<std::size_t> sorted_visible = visible;
    std::sort(sorted_visible.begin(), sorted_visible.end());
    std::vector<std::int8_t> y(train_.size(), -1);
    for (std::size_t r = 0; r < train_.size(); ++r)
      if (std::binary_search(sorted_visible.begin(), sorted_visible.end(), train_[r])) y[r] = 1;

    const std::size_t dim = schema_->dimension();
    KernelParams params{dim > 0 ? 1.0 / static_cast<double>(dim) : 1.0, 1.0};
    try {
      params = grid_search(*workspace_, y, config_.grid, config_.folds, config_.seed, config_.solver).best;
    } catch (const SingleClassFold&) {
      m.note = "default parameters: too few disclosed fixes for cross-validation";
    } catch (const InsufficientData&) {
      m.note = "default parameters: too few training patches for cross-validation";
    }
    try {
      m.model = fit_calibrated(*workspace_, features_, y, params, config_.seed, config_.solver);
      m.trained = true;
      if (!m.model.converged) m.note += (m.note.empty() ? "" : "; ") + std::string("solver hit the iteration cap");
    } catch (const Error& e) {
      m.note = std::string("random order: training failed: ") + e.what();
    }
    workspace_->release_kernels();
    return m;
  }

  const Corpus& corpus_;
  const SimulationConfig& config_;
  std::vector<std::size_t> train_;
  std::optional<FeatureSchema> schema_;
  std::vector<FeatureVector> features_;
  std::unique_ptr<KernelWorkspace> workspace_;
  std::map<std::vector<std::size_t>, Model> models_;
};

// Monte Carlo rank of the k-th of n_s targets placed uniformly among n positions.
std::pair<double, double> monte_carlo_kth_rank(std::int64_t n, std::int64_t n_s, int k, std::int64_t trials,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> positions;
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t t = 1; t <= trials; ++t) {
    // Floyd's algorithm: n_s distinct positions from 1..n.
    positions.clear();
    for (std::int64_t j = n - n_s + 1; j <= n; ++j) {
      const std::int64_t v = std::uniform_int_distribution<std::int64_t>(1, j)(rng);
      positions.push_back(std::find(positions.begin(), positions.end(), v) == positions.end() ? v : j);
    }
    std::nth_element(positions.begin(), positions.begin() + (k - 1), positions.end());
    const double x = static_cast<double>(positions[static_cast<std::size_t>(k - 1)]);
    const double delta = x - mean;
    mean += delta / static_cast<double>(t);
    m2 += delta * (x - mean);
  }
  const double var = trials > 1 ? m2 / static_cast<double>(trials - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(trials))};
}

}  // namespace

EffortSeries simulate_svm_daily(const Corpus& corpus, const SimulationConfig& config) {
  validate(config);
  EffortSeries out{RankerKind::svm, config.k, config.severity, {}};
  SvmRanker ranker(corpus, config);
  const ReleaseTimeline& tl = corpus.timeline();
  for (Day d = tl.period_start; d <= tl.period_end; d += days{1}) {
    const std::vector<std::size_t> pool = corpus.pool_indices(d);
    DayRecord rec = start_record(corpus, config, d, pool);
    ranker.rank(d, pool, rec);
    fill_effort(corpus, config, rec);
    out.days.push_back(std::move(rec));
  }
  return out;
}

EffortSeries simulate_random_daily(const Corpus& corpus, const SimulationConfig& config) {
  validate(config);
  EffortSeries out{RankerKind::random, config.k, config.severity, {}};
  const ReleaseTimeline& tl = corpus.timeline();
  const bool analytic = config.k == 1 && config.severity == SeverityFilter::all;
  for (Day d = tl.period_start; d <= tl.period_end; d += days{1}) {
    const std::vector<std::size_t> pool = corpus.pool_indices(d);
    DayRecord rec = start_record(corpus, config, d, pool);
    const auto n = static_cast<std::int64_t>(rec.pool_size);
    const auto n_s = static_cast<std::int64_t>(rec.pool_security_count);
    if (n_s >= config.k) {
      if (analytic) {
        rec.effort = expected_effort({n, n_s});
      } else {
        const auto [mean, se] =
            monte_carlo_kth_rank(n, n_s, config.k, config.random_trials, mix(config.seed, day_number(d)));
        rec.effort = mean;
        rec.effort_stderr = se;
      }
    }
    out.days.push_back(std::move(rec));
  }
  return out;
}

EffortSeries simulate_link_daily(const Corpus& corpus, const SimulationConfig& config) {
  validate(config);
  if (!corpus.bug_events()) throw MissingBugEvents("the link attack needs bug_events.jsonl");
  const BugIndex bugs(*corpus.bug_events());
  std::vector<std::vector<std::uint64_t>> ids(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    ids[i] = extract_bug_ids(corpus.patch(i).description, config.link.pattern);

  EffortSeries out{RankerKind::link, config.k, config.severity, {}};
  const ReleaseTimeline& tl = corpus.timeline();
  for (Day d = tl.period_start; d <= tl.period_end; d += days{1}) {
    const std::vector<std::size_t> pool = corpus.pool_indices(d);
    DayRecord rec = start_record(corpus, config, d, pool);
    rec.ranking = pool;
    std::stable_partition(rec.ranking.begin(), rec.ranking.end(),
                          [&](std::size_t i) { return is_security_evident(ids[i], bugs, d, config.link.evidence); });
    fill_effort(corpus, config, rec);
    out.days.push_back(std::move(rec));
  }
  return out;
}

EffortSeries simulate(const Corpus& corpus, RankerKind ranker, const SimulationConfig& config) {
  switch (ranker) {
    case RankerKind::svm: return simulate_svm_daily(corpus, config);
    case RankerKind::random: return simulate_random_daily(corpus, config);
    case RankerKind::link: return simulate_link_daily(corpus, config);
  }
  throw InvalidConfig("unknown ranker");
}

double EffortCdf::at(std::int64_t effort) const {
  if (effort < 1 || points.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(std::min<std::int64_t>(effort, static_cast<std::int64_t>(points.size())));
  return points[idx - 1].fraction;
}

Day default_trim_day(const Corpus& corpus) { return corpus.timeline().period_start + days{50}; }

namespace {

std::vector<const DayRecord*> window_days(const EffortSeries& series, Day from_day) {
  std::vector<const DayRecord*> out;
  for (const DayRecord& r : series.days)
    if (r.day >= from_day) out.push_back(&r);
  if (out.empty()) throw EmptyWindow("no simulated days on or after " + format_day(from_day));
  return out;
}

std::int64_t largest_pool(const std::vector<const DayRecord*>& days) {
  std::int64_t m = 1;
  for (const DayRecord* r : days) m = std::max(m, static_cast<std::int64_t>(r->pool_size));
  return m;
}

double asymptote(const std::vector<const DayRecord*>& days, int k) {
  const auto with_targets = std::count_if(days.begin(), days.end(), [&](const DayRecord* r) {
    return r->pool_security_count >= static_cast<std::size_t>(k);
  });
  return static_cast<double>(with_targets) / static_cast<double>(days.size());
}

}  // namespace

EffortCdf random_effort_cdf(const EffortSeries& series, Day from_day, std::int64_t max_effort) {
  const auto days_in = window_days(series, from_day);
  if (max_effort <= 0) max_effort = largest_pool(days_in);
  EffortCdf cdf{from_day, days_in.size(), asymptote(days_in, series.k), {}};
  std::vector<double> sum(static_cast<std::size_t>(max_effort), 0.0);
  for (const DayRecord* r : days_in) {
    const PoolState pool{static_cast<std::int64_t>(r->pool_size), static_cast<std::int64_t>(r->pool_security_count)};
    if (pool.n_s < series.k) continue;
    for (std::int64_t e = 1; e <= max_effort; ++e)
      sum[static_cast<std::size_t>(e - 1)] += kth_effort_cdf(pool, series.k, e);
  }
  for (std::int64_t e = 1; e <= max_effort; ++e)
    cdf.points.push_back({e, sum[static_cast<std::size_t>(e - 1)] / static_cast<double>(days_in.size())});
  return cdf;
}

EffortCdf effort_cdf(const EffortSeries& series, Day from_day, std::int64_t max_effort) {
  if (series.ranker == RankerKind::random) return random_effort_cdf(series, from_day, max_effort);
  const auto days_in = window_days(series, from_day);
  if (max_effort <= 0) max_effort = largest_pool(days_in);
  EffortCdf cdf{from_day, days_in.size(), asymptote(days_in, series.k), {}};
  std::vector<std::size_t> at_effort(static_cast<std::size_t>(max_effort) + 1, 0);
  for (const DayRecord* r : days_in) {
    if (!r->effort) continue;
    const auto e = static_cast<std::int64_t>(std::ceil(*r->effort));
    if (e <= max_effort) ++at_effort[static_cast<std::size_t>(e)];
  }
  std::size_t running = 0;
  for (std::int64_t e = 1; e <= max_effort; ++e) {
    running += at_effort[static_cast<std::size_t>(e)];
    cdf.points.push_back({e, static_cast<double>(running) / static_cast<double>(days_in.size())});
  }
  return cdf;
}

namespace {

std::vector<const DayRecord*> days_of(const EffortSeries& series, const Segment& seg) {
  std::vector<const DayRecord*> out;
  for (const DayRecord& r : series.days)
    if (seg.contains(r.day)) out.push_back(&r);
  return out;
}

// Budgeted scan over stored rankings.
SegmentWindow ranked_window(const Corpus& corpus, const EffortSeries& series, const Segment& seg,
                            std::int64_t budget) {
  SegmentWindow w{seg, std::nullopt, 0.0};
  if (budget <= 0) return w;
  std::vector<bool> examined(corpus.size(), false);
  int found = 0;
  for (const DayRecord* r : days_of(series, seg)) {
    std::int64_t taken = 0;
    for (std::size_t i : r->ranking) {
      if (taken == budget) break;
      if (examined[i]) continue;
      examined[i] = true;
      ++taken;
      if (qualifies(corpus, i, series.severity) && ++found == series.k) break;
    }
    if (found >= series.k) {
      w.discovery_day = r->day;
      w.increase_days = static_cast<double>(days_between(r->day, seg.end));
      break;
    }
  }
  return w;
}

// Daily landings inside a segment, split into qualifying fixes and everything else.
std::vector<DayLanding> segment_landings(const Corpus& corpus, const Segment& seg, SeverityFilter filter) {
  std::vector<DayLanding> out(static_cast<std::size_t>(seg.length()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Day d = day_of(corpus.patch(i).landed_at);
    if (!seg.contains(d)) continue;
    DayLanding& slot = out[static_cast<std::size_t>(days_between(seg.begin, d))];
    ++slot.total;
    if (qualifies(corpus, i, filter)) ++slot.security;
  }
  return out;
}

// Random attacker, k-th discovery: Monte Carlo over the same daily schedule.
double random_window_monte_carlo(const std::vector<DayLanding>& schedule, std::int64_t budget, int k,
                                 std::int64_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto n_days = static_cast<std::int64_t>(schedule.size());
  double total = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    std::int64_t plain = 0, targets = 0;
    int found = 0;
    for (std::int64_t d = 0; d < n_days; ++d) {
      const DayLanding& day = schedule[static_cast<std::size_t>(d)];
      plain += day.total - day.security;
      targets += day.security;
      for (std::int64_t b = 0; b < budget && plain + targets > 0; ++b) {
        const auto pick = std::uniform_int_distribution<std::int64_t>(0, plain + targets - 1)(rng);
        if (pick < targets) {
          --targets;
          ++found;
        } else {
          --plain;
        }
        if (found >= k) break;
      }
      if (found >= k) {
        total += static_cast<double>(n_days - d);
        break;
      }
    }
  }
  return total / static_cast<double>(trials);
}

}  // namespace

WindowReport window_increase(const Corpus& corpus, const EffortSeries& series, std::int64_t budget,
                             double baseline_days, std::uint64_t seed, std::int64_t trials) {
  if (budget < 0) throw InvalidConfig("budget must be non-negative");
  WindowReport report;
  report.ranker = series.ranker;
  report.budget = budget;
  report.baseline_days = baseline_days;
  const std::vector<Segment> segments = corpus.timeline().segments();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Segment& seg = segments[s];
    SegmentWindow w{seg, std::nullopt, 0.0};
    if (series.ranker != RankerKind::random) {
      w = ranked_window(corpus, series, seg, budget);
    } else if (budget > 0) {
      const std::vector<DayLanding> schedule = segment_landings(corpus, seg, series.severity);
      if (series.k == 1)
        w.increase_days = expected_window_increase({schedule, budget});
      else
        w.increase_days =
            random_window_monte_carlo(schedule, budget, series.k, trials, mix(seed, static_cast<std::int64_t>(s)));
    }
    report.total_increase_days += w.increase_days;
    report.segments.push_back(w);
  }
  if (baseline_days > 0.0) report.multiplicative_factor = report.total_increase_days / baseline_days;
  return report;
}

AblationResult ablation_run(const Corpus& corpus, const EffortSeries& full, const std::string& feature_group,
                            const SimulationConfig& config, const std::vector<std::int64_t>& budgets,
                            std::int64_t max_effort) {
  const std::vector<Feature> removed = ablation_group(feature_group);
  SimulationConfig ablated = config;
  ablated.mask = config.mask.without(removed);

  AblationResult result;
  result.removed = feature_group;
  result.series = simulate_svm_daily(corpus, ablated);
  const Day trim = default_trim_day(corpus);
  const EffortCdf base = effort_cdf(full, trim, max_effort);
  const EffortCdf cut = effort_cdf(result.series, trim, max_effort);
  for (std::size_t e = 0; e < base.points.size(); ++e)
    result.cdf_delta.push_back({base.points[e].effort, cut.points[e].fraction - base.points[e].fraction});
  result.cdf5_drop = base.at(5) - cut.at(5);
  for (std::int64_t b : budgets) {
    const double before = window_increase(corpus, full, b).total_increase_days;
    const double after = window_increase(corpus, result.series, b).total_increase_days;
    result.window_delta.emplace_back(b, after - before);
  }
  return result;
}

}  // namespace patchleak
