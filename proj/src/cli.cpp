#include "patchleak/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchleak/corpus.hpp"
#include "patchleak/csv.hpp"
#include "patchleak/errors.hpp"
#include "patchleak/infogain.hpp"
#include "patchleak/linkattack.hpp"
#include "patchleak/randmodel.hpp"
#include "patchleak/simulator.hpp"
#include "patchleak/synthgen.hpp"

namespace patchleak::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_directory(file.parent_path());
}

std::string optional_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

// ---------------------------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig config;
  if (!a.config.empty()) config = synth_config_from_json(read_file(a.config));
  if (a.seed) config.seed = *a.seed;
  const Corpus corpus = generate(config);
  ensure_directory(a.out);
  write_corpus(corpus, a.out);
  out << "wrote " << corpus.size() << " patches (" << corpus.security_count() << " security) to " << a.out << '\n';
}

// ---------------------------------------------------------------------------------------------
// features rank

struct FeaturesArgs {
  std::string corpus;
  std::string out;
  std::string rule = "c45";
};

void run_features_rank(const FeaturesArgs& a, std::ostream& out) {
  const Corpus corpus = load_corpus(a.corpus);
  const ThresholdRule rule = a.rule == "max_ratio" ? ThresholdRule::max_ratio : ThresholdRule::c45;
  const std::vector<FeatureScore> scores = rank_features(corpus, rule);
  ensure_parent(a.out);
  CsvWriter csv(a.out, {"feature", "gain", "gain_ratio", "best_threshold"});
  for (const FeatureScore& s : scores)
    csv.row({std::string(feature_name(s.feature)), format_real(s.gain), format_real(s.gain_ratio),
             optional_real(s.threshold)});
  csv.close();
  out << "ranked " << scores.size() << " features\n";
}

// ---------------------------------------------------------------------------------------------
// randmodel curve

struct CurveArgs {
  std::int64_t days = 31;
  std::int64_t daily = 39;
  std::vector<double> fracs{0.0032, 0.01, 0.032, 0.1, 0.32};
  std::int64_t max_budget = 100;
  std::string out;
  std::string effort_out;
};

void run_randmodel_curve(const CurveArgs& a, std::ostream& out) {
  if (a.days < 1 || a.daily < 1) throw InvalidConfig("--days and --daily must be positive");
  if (a.max_budget < 0) throw InvalidConfig("--max-budget must be non-negative");
  std::vector<std::int64_t> budgets(static_cast<std::size_t>(a.max_budget + 1));
  for (std::size_t b = 0; b < budgets.size(); ++b) budgets[b] = static_cast<std::int64_t>(b);
  const auto window = window_vs_budget_curves(a.fracs, a.days, a.daily, budgets);
  ensure_parent(a.out);
  CsvWriter csv(a.out, {"fraction", "budget", "expected_window_increase_days"});
  for (const WindowCurvePoint& p : window)
    csv.row({format_real(p.fraction), std::to_string(p.budget), format_real(p.expected_increase)});
  csv.close();

  if (!a.effort_out.empty()) {
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(a.days * a.daily));
    for (std::size_t n = 0; n < sizes.size(); ++n) sizes[n] = static_cast<std::int64_t>(n + 1);
    const auto effort = effort_vs_pool_curves(a.fracs, sizes);
    ensure_parent(a.effort_out);
    CsvWriter e(a.effort_out, {"fraction", "pool_size", "security_count", "expected_effort", "security_count_rounded",
                               "expected_effort_rounded"});
    for (const EffortCurvePoint& p : effort)
      e.row({format_real(p.fraction), std::to_string(p.n), format_real(p.n_s), format_real(p.expected_effort),
             std::to_string(p.n_s_rounded), format_real(p.expected_effort_rounded)});
    e.close();
  }
  out << "wrote " << window.size() << " window points\n";
}

// ---------------------------------------------------------------------------------------------
// linkattack

struct LinkArgs {
  std::string corpus;
  int k = 1;
  std::string out;
  bool absent_means_restricted = false;
};

void run_linkattack(const LinkArgs& a, std::ostream& out) {
  const Corpus corpus = load_corpus(a.corpus);
  LinkAttackOptions options;
  options.evidence.absent_means_restricted = a.absent_means_restricted;
  const LinkAttackSeries series = link_attack_daily(corpus, a.k, options);
  ensure_parent(a.out);
  CsvWriter csv(a.out, {"day", "found_count", "first_found_patch_id", "window_contribution_days"});
  for (const LinkAttackDay& d : series.days)
    csv.row({format_day(d.day), std::to_string(d.found_count), d.first_found_patch_id.value_or(""),
             std::to_string(d.window_contribution_days)});
  csv.close();
  out << "total window increase " << series.total_window_days() << " days\n";
}

// ---------------------------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string corpus;
  std::string ranker = "svm";
  int k = 1;
  std::string severity = "all";
  std::vector<std::int64_t> budgets{1, 2, 3, 7};
  std::uint64_t seed = 0;
  std::string out;
  std::string remove;
  std::string grid = "coarse";
  int folds = 5;
  std::int64_t trials = 100000;
  std::int64_t window_trials = 20000;
  std::int64_t max_effort = 100;
  std::int64_t trim_days = 50;
  double baseline = 3.4;
  bool absent_means_restricted = false;
  std::string from_manifest;
};

ojson manifest_of(const SimulateArgs& a, const std::string& digest) {
  ojson m;
  m["format"] = "patchleak-run";
  m["version"] = kManifestVersion;
  m["command"] = "simulate";
  m["corpus"] = a.corpus;
  m["corpus_sha256"] = digest;
  m["ranker"] = a.ranker;
  m["k"] = a.k;
  m["severity"] = a.severity;
  m["budgets"] = a.budgets;
  m["seed"] = a.seed;
  m["remove"] = a.remove.empty() ? ojson(nullptr) : ojson(a.remove);
  m["grid"] = a.grid;
  m["folds"] = a.folds;
  m["trials"] = a.trials;
  m["window_trials"] = a.window_trials;
  m["max_effort"] = a.max_effort;
  m["trim_days"] = a.trim_days;
  m["baseline_days"] = a.baseline;
  m["absent_means_restricted"] = a.absent_means_restricted;
  m["outputs"] = {"efforts.csv", "cdf.csv", "window.csv", "window_segments.csv"};
  return m;
}

// Replaces everything but --out (and --corpus, when given, to relocate the data) with the
// manifest's settings.
SimulateArgs args_from_manifest(const SimulateArgs& given, bool corpus_given) {
  ojson m;
  try {
    m = ojson::parse(read_file(given.from_manifest));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(given.from_manifest + ": " + e.what());
  }
  if (m.value("format", "") != "patchleak-run" || m.value("command", "") != "simulate")
    throw ParseError(given.from_manifest + ": not a simulate run manifest");
  if (m.value("version", 0) != kManifestVersion)
    throw ParseError(given.from_manifest + ": unsupported manifest version");
  SimulateArgs a;
  try {
    a.corpus = corpus_given ? given.corpus : m.at("corpus").get<std::string>();
    a.ranker = m.at("ranker").get<std::string>();
    a.k = m.at("k").get<int>();
    a.severity = m.at("severity").get<std::string>();
    a.budgets = m.at("budgets").get<std::vector<std::int64_t>>();
    a.seed = m.at("seed").get<std::uint64_t>();
    a.remove = m.at("remove").is_null() ? std::string() : m.at("remove").get<std::string>();
    a.grid = m.at("grid").get<std::string>();
    a.folds = m.at("folds").get<int>();
    a.trials = m.at("trials").get<std::int64_t>();
    a.window_trials = m.at("window_trials").get<std::int64_t>();
    a.max_effort = m.at("max_effort").get<std::int64_t>();
    a.trim_days = m.at("trim_days").get<std::int64_t>();
    a.baseline = m.at("baseline_days").get<double>();
    a.absent_means_restricted = m.at("absent_means_restricted").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(given.from_manifest + ": " + e.what());
  }
  a.out = given.out;
  const std::string digest = corpus_digest(a.corpus);
  if (digest != m.value("corpus_sha256", ""))
    throw InvalidConfig("corpus " + a.corpus + " does not match the manifest's corpus_sha256");
  return a;
}

void write_efforts(const fs::path& path, const EffortSeries& series) {
  CsvWriter csv(path, {"day", "pool_size", "pool_security_count", "effort", "effort_stderr", "fallback", "gamma",
                       "c", "note"});
  for (const DayRecord& d : series.days) {
    csv.row({format_day(d.day), std::to_string(d.pool_size), std::to_string(d.pool_security_count),
             optional_real(d.effort), format_real(d.effort_stderr), d.fallback ? "1" : "0",
             d.params ? format_real(d.params->gamma) : std::string(), d.params ? format_real(d.params->c) : std::string(),
             d.note});
  }
  csv.close();
}

void run_simulate(SimulateArgs a, bool corpus_given, std::ostream& out) {
  if (!a.from_manifest.empty()) a = args_from_manifest(a, corpus_given);
  if (a.corpus.empty()) throw InvalidConfig("--corpus is required unless --from-manifest is given");
  if (a.k < 1) throw InvalidConfig("--k must be at least 1");
  if (a.max_effort < 1) throw InvalidConfig("--max-effort must be positive");
  if (a.trim_days < 0) throw InvalidConfig("--trim-days must be non-negative");
  for (std::int64_t b : a.budgets)
    if (b < 0) throw InvalidConfig("budgets must be non-negative");

  const Corpus corpus = load_corpus(a.corpus);
  const std::string digest = corpus_digest(a.corpus);

  SimulationConfig config;
  config.k = a.k;
  config.severity = parse_severity_filter(a.severity);
  config.grid = a.grid == "full" ? default_grid() : coarse_grid();
  config.folds = a.folds;
  config.seed = a.seed;
  config.random_trials = a.trials;
  config.link.evidence.absent_means_restricted = a.absent_means_restricted;
  if (!a.remove.empty()) config.mask = FeatureMask::all().without(ablation_group(a.remove));

  const RankerKind ranker = parse_ranker(a.ranker);
  const EffortSeries series = simulate(corpus, ranker, config);

  const fs::path dir(a.out);
  ensure_directory(dir);
  write_efforts(dir / "efforts.csv", series);

  const Day from = corpus.timeline().period_start + std::chrono::days{a.trim_days};
  {
    CsvWriter csv(dir / "cdf.csv", {"effort", "cdf", "asymptote"});
    try {
      const EffortCdf cdf = effort_cdf(series, from, a.max_effort);
      for (const CdfPoint& p : cdf.points)
        csv.row({std::to_string(p.effort), format_real(p.fraction), format_real(cdf.asymptote)});
    } catch (const EmptyWindow&) {
      // No day left after the trim: the header alone documents an empty CDF.
    }
    csv.close();
  }

  CsvWriter window(dir / "window.csv",
                   {"budget", "total_increase_days", "baseline_days", "multiplicative_factor"});
  CsvWriter segments(dir / "window_segments.csv",
                     {"budget", "segment_begin", "segment_end", "discovery_day", "increase_days"});
  for (std::int64_t b : a.budgets) {
    const WindowReport r = window_increase(corpus, series, b, a.baseline, a.seed, a.window_trials);
    window.row({std::to_string(b), format_real(r.total_increase_days), format_real(r.baseline_days),
                optional_real(r.multiplicative_factor)});
    for (const SegmentWindow& s : r.segments)
      segments.row({std::to_string(b), format_day(s.segment.begin), format_day(s.segment.end),
                    s.discovery_day ? format_day(*s.discovery_day) : std::string(), format_real(s.increase_days)});
  }
  window.close();
  segments.close();

  write_file(dir / "run_manifest.json", manifest_of(a, digest).dump(2) + "\n");
  const auto with_effort = std::count_if(series.days.begin(), series.days.end(),
                                         [](const DayRecord& d) { return d.effort.has_value(); });
  out << "simulated " << series.days.size() << " days (" << with_effort << " with a target in the pool) into "
      << a.out << '\n';
}

// ---------------------------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& file) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError(file.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

// Appends one gnuplot data block (selected by `index NAME` or by position) built from two CSV columns.
void append_block(std::ostringstream& dat, const std::string& name, const fs::path& file, const std::string& x,
                  const std::string& y, bool first) {
  const auto rows = read_csv(file);
  if (rows.empty()) throw ParseError(file.string() + ": empty file");
  const std::size_t xi = column(rows.front(), x, file);
  const std::size_t yi = column(rows.front(), y, file);
  if (!first) dat << "\n\n";
  dat << "\"" << name << "\"\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= std::max(xi, yi)) throw ParseError(file.string() + ": short row " + std::to_string(r + 1));
    if (rows[r][yi].empty()) continue;
    dat << rows[r][xi] << ' ' << rows[r][yi] << '\n';
  }
}

void run_report(const ReportArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, fs::path>> runs;
  for (const std::string& arg : a.runs) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
      throw InvalidConfig("--run expects NAME=DIR, got '" + arg + "'");
    runs.emplace_back(arg.substr(0, eq), fs::path(arg.substr(eq + 1)));
  }
  std::ostringstream efforts, cdf, window;
  efforts << "# daily effort per run: day effort\n";
  cdf << "# effort CDF per run: effort fraction_of_days\n";
  window << "# window increase per run: budget total_increase_days\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& [name, dir] = runs[i];
    append_block(efforts, name, dir / "efforts.csv", "day", "effort", i == 0);
    append_block(cdf, name, dir / "cdf.csv", "effort", "cdf", i == 0);
    append_block(window, name, dir / "window.csv", "budget", "total_increase_days", i == 0);
  }
  ensure_directory(a.out);
  const fs::path dir(a.out);
  write_file(dir / "efforts.dat", efforts.str());
  write_file(dir / "cdf.dat", cdf.str());
  write_file(dir / "window.dat", window.str());
  out << "wrote plot data for " << runs.size() << " runs to " << a.out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Measure how much security-fix information leaks from patch metadata", "patchleak"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--config", synth.config, "JSON generator configuration")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output corpus directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Override the configured seed");

  FeaturesArgs features;
  auto* features_cmd = app.add_subcommand("features", "Feature analysis");
  features_cmd->require_subcommand(1);
  auto* rank_cmd = features_cmd->add_subcommand("rank", "Rank features by information gain ratio");
  rank_cmd->add_option("--corpus", features.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  rank_cmd->add_option("--out", features.out, "Output CSV")->required();
  rank_cmd->add_option("--rule", features.rule, "Threshold rule for continuous features")
      ->check(CLI::IsMember({"c45", "max_ratio"}))
      ->capture_default_str();

  CurveArgs curve;
  auto* randmodel_cmd = app.add_subcommand("randmodel", "Random-ranker model");
  randmodel_cmd->require_subcommand(1);
  auto* curve_cmd = randmodel_cmd->add_subcommand("curve", "Expected effort and window-increase curves");
  curve_cmd->add_option("--days", curve.days, "Days between security updates")->capture_default_str();
  curve_cmd->add_option("--daily", curve.daily, "Patches landing per day")->capture_default_str();
  curve_cmd->add_option("--fracs", curve.fracs, "Security fractions")->delimiter(',')->capture_default_str();
  curve_cmd->add_option("--max-budget", curve.max_budget, "Largest daily budget")->capture_default_str();
  curve_cmd->add_option("--out", curve.out, "Window-vs-budget CSV")->required();
  curve_cmd->add_option("--effort-out", curve.effort_out, "Effort-vs-pool-size CSV");

  LinkArgs link;
  auto* link_cmd = app.add_subcommand("linkattack", "Day-by-day bug-link attack");
  link_cmd->add_option("--corpus", link.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  link_cmd->add_option("--k", link.k, "Security fixes the attacker needs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  link_cmd->add_option("--out", link.out, "Output CSV")->required();
  link_cmd->add_flag("--absent-means-restricted", link.absent_means_restricted,
                     "Treat bugs missing from the snapshot as restricted");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Day-by-day attacker simulation");
  auto* corpus_opt =
      sim_cmd->add_option("--corpus", sim.corpus, "Corpus directory")->check(CLI::ExistingDirectory);
  sim_cmd->add_option("--ranker", sim.ranker, "Ranking strategy")
      ->check(CLI::IsMember({"svm", "random", "link"}))
      ->capture_default_str();
  sim_cmd->add_option("--k", sim.k, "Security fixes the attacker needs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->add_option("--severity", sim.severity, "Which fixes count as targets")
      ->check(CLI::IsMember({"all", "severe"}))
      ->capture_default_str();
  sim_cmd->add_option("--budget-list", sim.budgets, "Daily budgets for the window increase")
      ->delimiter(',')
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Seed for folds, fallbacks and Monte Carlo")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output run directory")->required();
  sim_cmd->add_option("--remove", sim.remove, "Feature group left out of the learner")
      ->check(CLI::IsMember(ablation_targets()));
  sim_cmd->add_option("--grid", sim.grid, "Hyperparameter grid")
      ->check(CLI::IsMember({"coarse", "full"}))
      ->capture_default_str();
  sim_cmd->add_option("--folds", sim.folds, "Cross-validation folds")->check(CLI::Range(2, 100))->capture_default_str();
  sim_cmd->add_option("--trials", sim.trials, "Monte Carlo trials per day for the random ranker")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->add_option("--window-trials", sim.window_trials, "Monte Carlo trials per segment for the window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->add_option("--max-effort", sim.max_effort, "Largest effort in cdf.csv")->capture_default_str();
  sim_cmd->add_option("--trim-days", sim.trim_days, "Warm-up days left out of cdf.csv")->capture_default_str();
  sim_cmd->add_option("--baseline", sim.baseline, "Baseline window in days")->capture_default_str();
  sim_cmd->add_flag("--absent-means-restricted", sim.absent_means_restricted,
                    "Link ranker: treat bugs missing from the snapshot as restricted");
  sim_cmd->add_option("--from-manifest", sim.from_manifest, "Rerun the configuration in a run_manifest.json")
      ->check(CLI::ExistingFile);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Join run outputs into gnuplot data files");
  report_cmd->add_option("--run", report.runs, "NAME=DIR of a simulate run (repeatable)")->required();
  report_cmd->add_option("--out", report.out, "Output directory")->required();

  // Deepest subcommand seen on the command line, for help and usage text.
  const auto innermost = [&app]() -> const CLI::App* {
    const CLI::App* at = &app;
    while (!at->get_subcommands().empty()) at = at->get_subcommands().front();
    return at;
  };
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << innermost()->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << innermost()->help();
    return 2;
  }

  try {
    if (*synth_cmd) run_synth(synth, out);
    else if (*rank_cmd) run_features_rank(features, out);
    else if (*curve_cmd) run_randmodel_curve(curve, out);
    else if (*link_cmd) run_linkattack(link, out);
    else if (*sim_cmd) run_simulate(sim, corpus_opt->count() > 0, out);
    else if (*report_cmd) run_report(report, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace patchleak::cli
