#include "patchleak/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "patchleak/errors.hpp"

namespace patchleak {

namespace {

struct Weighted {
  const char* name;
  double weight;
};

// Ordinary patch mix over top-level directories and file extensions.
constexpr Weighted kDirectories[] = {
    {"content", 16}, {"layout", 14}, {"js", 12},      {"browser", 10}, {"toolkit", 8}, {"dom", 7},
    {"netwerk", 5},  {"widget", 5},  {"gfx", 5},      {"xpcom", 4},    {"security", 3}, {"modules", 3},
    {"editor", 2},   {"db", 2},      {"parser", 2},   {"testing", 2},
};
constexpr Weighted kSecurityDirectories[] = {{"js", 35}, {"layout", 25}, {"netwerk", 20}, {"gfx", 20}};

constexpr Weighted kExtensions[] = {
    {".cpp", 35}, {".h", 20}, {".js", 15}, {".html", 7}, {".xul", 5}, {".css", 4}, {".idl", 4}, {".py", 3},
    {".mk", 2},   {"", 5},
};
constexpr Weighted kSecurityExtensions[] = {{".cpp", 60}, {".h", 30}, {".idl", 10}};

constexpr const char* kWords[] = {
    "crash",   "leak",   "assertion", "frame",   "reflow", "parser", "cache",   "timer",  "listener", "image",
    "style",   "script", "window",    "network", "socket", "font",   "plugin",  "update", "memory",   "thread",
    "menu",    "focus",  "selection", "table",   "xpcom",  "string", "history", "cookie", "download", "event",
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <std::size_t N>
std::discrete_distribution<std::size_t> weights_of(const Weighted (&table)[N]) {
  std::vector<double> w;
  for (const Weighted& e : table) w.push_back(e.weight);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

class Generator {
 public:
  explicit Generator(const SynthConfig& c) : cfg_(c), rng_(c.seed) {
    // Author activity follows a Zipf-like law over a seeded ordering; the security group is a
    // separate seeded pick so its members are not simply the most active developers.
    std::vector<int> order(static_cast<std::size_t>(c.n_authors));
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<double> weights;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      authors_.push_back(author_name(order[rank]));
      weights.push_back(1.0 / std::pow(static_cast<double>(rank + 1), 0.9));
    }
    author_dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
    std::vector<std::size_t> pick(authors_.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::shuffle(pick.begin(), pick.end(), rng_);
    pick.resize(static_cast<std::size_t>(c.n_security_authors));
    std::sort(pick.begin(), pick.end());
    for (std::size_t i : pick) security_authors_.push_back(authors_[i]);
  }

  Corpus run() {
    const Day start = parse_day(cfg_.start_date);
    ReleaseTimeline timeline;
    timeline.period_start = start;
    timeline.period_end = start + std::chrono::days{cfg_.days - 1};
    for (int d = cfg_.update_every; d < cfg_.days; d += cfg_.update_every)
      timeline.security_updates.push_back(start + std::chrono::days{d});

    std::vector<PatchRecord> patches;
    std::vector<VulnerabilityLabel> labels;
    std::vector<BugEventLog> bugs;
    std::poisson_distribution<int> per_day(cfg_.daily_rate);
    std::discrete_distribution<int> severity(cfg_.severity_mix.begin(), cfg_.severity_mix.end());
    std::uint64_t next_bug = 430000;
    std::uint64_t serial = 0;

    for (int d = 0; d < cfg_.days; ++d) {
      const Day day = start + std::chrono::days{d};
      const int weekday = static_cast<int>(std::chrono::weekday{day}.c_encoding());
      const double p_security = std::min(1.0, cfg_.security_fraction * weekday_factor(weekday));
      const int count = per_day(rng_);

      std::vector<std::pair<PatchRecord, bool>> today;
      for (int i = 0; i < count; ++i) {
        const bool security = std::bernoulli_distribution(p_security)(rng_);
        PatchRecord p = make_patch(day, security);
        p.id = patch_id(serial++);
        today.emplace_back(std::move(p), security);
      }
      std::stable_sort(today.begin(), today.end(),
                       [](const auto& a, const auto& b) { return a.first.landed_at < b.first.landed_at; });

      for (auto& [p, security] : today) {
        next_bug += 1 + std::uniform_int_distribution<std::uint64_t>(0, 40)(rng_);
        p.description = describe(next_bug);
        BugEventLog log{next_bug, {}};
        if (security) {
          const Timestamp filed = p.landed_at - std::chrono::days{std::uniform_int_distribution<int>(1, 20)(rng_)};
          log.events.push_back({filed, BugEventKind::restricted});
          log.events.push_back({filed, BugEventKind::core_security_added});
          VulnerabilityLabel l;
          l.patch_id = p.id;
          l.is_security = true;
          l.disclosed_at = start_of(disclosure_day(timeline, day_of(p.landed_at)));
          l.severity = static_cast<Severity>(severity(rng_));
          labels.push_back(std::move(l));
        }
        bugs.push_back(std::move(log));
        patches.push_back(std::move(p));
      }
    }
    return Corpus(std::move(patches), std::move(labels), std::move(timeline), std::move(bugs));
  }

 private:
  static std::string author_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "dev%04d@example.org", i);
    return buf;
  }

  std::string patch_id(std::uint64_t serial) const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(cfg_.seed * 0x100000001b3ULL + serial)));
    return buf;
  }

  // Weekend landings are more likely to be security fixes when the day-of-week leak is on;
  // the factors average to one over a week.
  double weekday_factor(int weekday) const {
    const double s = cfg_.leaks.day_of_week;
    return (weekday == 0 || weekday == 6) ? 1.0 + s : 1.0 - 0.4 * s;
  }

  bool leak(double strength) { return strength > 0.0 && std::bernoulli_distribution(strength)(rng_); }

  PatchRecord make_patch(Day day, bool security) {
    const LeakStrengths& s = cfg_.leaks;
    PatchRecord p;

    if (security && !security_authors_.empty() && leak(s.author))
      p.author = security_authors_[std::uniform_int_distribution<std::size_t>(0, security_authors_.size() - 1)(rng_)];
    else
      p.author = authors_[author_dist_(rng_)];

    const bool size_leak = security && leak(s.diff_size);
    const double file_p = size_leak ? 0.8 : 0.45;
    const int n_files = std::min(30, 1 + std::geometric_distribution<int>(file_p)(rng_));

    const std::string primary_dir = (security && leak(s.top_dir)) ? pick(sec_dir_dist_, kSecurityDirectories)
                                                                   : pick(dir_dist_, kDirectories);
    const std::string primary_ext = (security && leak(s.file_type)) ? pick(sec_ext_dist_, kSecurityExtensions)
                                                                     : pick(ext_dist_, kExtensions);
    std::set<std::string> files;
    while (static_cast<int>(files.size()) < n_files) {
      const bool stray = std::bernoulli_distribution(0.2)(rng_);
      const std::string dir = stray ? pick(dir_dist_, kDirectories) : primary_dir;
      const std::string ext = stray ? pick(ext_dist_, kExtensions) : primary_ext;
      const char* word = kWords[std::uniform_int_distribution<std::size_t>(0, std::size(kWords) - 1)(rng_)];
      const int sub = std::uniform_int_distribution<int>(0, 9)(rng_);
      const int stem = std::uniform_int_distribution<int>(0, 99)(rng_);
      files.insert(dir + "/src" + std::to_string(sub) + "/" + word + std::to_string(stem) + ext);
    }
    p.files.assign(files.begin(), files.end());
    p.diff_files = static_cast<std::int64_t>(p.files.size());

    const double mu = size_leak ? 3.5 - 1.5 : 3.5;
    const double lines = std::lognormal_distribution<double>(mu, 1.2)(rng_);
    p.diff_lines = std::max<std::int64_t>(1, std::llround(lines) * std::max<std::int64_t>(1, p.diff_files / 2));
    p.diff_chars = p.diff_lines * std::uniform_int_distribution<std::int64_t>(20, 45)(rng_);
    p.avg_file_size = std::round(std::lognormal_distribution<double>(9.5, 1.0)(rng_));

    double hours;
    if (security && leak(s.time_of_day)) hours = std::normal_distribution<double>(3.0, 1.5)(rng_);
    else if (std::bernoulli_distribution(0.6)(rng_)) hours = std::normal_distribution<double>(19.0, 3.0)(rng_);
    else hours = std::normal_distribution<double>(11.0, 2.5)(rng_);
    auto seconds = static_cast<std::int64_t>(std::floor(hours * 3600.0)) % 86400;
    if (seconds < 0) seconds += 86400;
    p.landed_at = start_of(day) + std::chrono::seconds{seconds};
    return p;
  }

  template <std::size_t N>
  std::string pick(std::discrete_distribution<std::size_t>& dist, const Weighted (&table)[N]) {
    return table[std::min(dist(rng_), N - 1)].name;
  }

  std::string describe(std::uint64_t bug) {
    std::string text = "Bug " + std::to_string(bug) + " - ";
    const int n_words = std::uniform_int_distribution<int>(2, 5)(rng_);
    for (int w = 0; w < n_words; ++w) {
      if (w) text += ' ';
      text += kWords[std::uniform_int_distribution<std::size_t>(0, std::size(kWords) - 1)(rng_)];
    }
    text += ", r=" + authors_[author_dist_(rng_)].substr(0, 7);
    return text;
  }

  // Fixes are announced with the first security update after the landing day.
  Day disclosure_day(const ReleaseTimeline& timeline, Day landed) const {
    auto it = std::upper_bound(timeline.security_updates.begin(), timeline.security_updates.end(), landed);
    const Day update = it == timeline.security_updates.end() ? timeline.period_end + std::chrono::days{1} : *it;
    return update + std::chrono::days{cfg_.disclosure_lag};
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::string> authors_;
  std::vector<std::string> security_authors_;
  std::discrete_distribution<std::size_t> author_dist_;
  std::discrete_distribution<std::size_t> dir_dist_ = weights_of(kDirectories);
  std::discrete_distribution<std::size_t> sec_dir_dist_ = weights_of(kSecurityDirectories);
  std::discrete_distribution<std::size_t> ext_dist_ = weights_of(kExtensions);
  std::discrete_distribution<std::size_t> sec_ext_dist_ = weights_of(kSecurityExtensions);
};

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidConfig(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void SynthConfig::validate() const {
  if (days < 1) throw InvalidConfig("days must be positive");
  if (!(daily_rate > 0.0)) throw InvalidConfig("daily_rate must be positive");
  check_unit(security_fraction, "security_fraction");
  if (n_authors < 1) throw InvalidConfig("n_authors must be positive");
  if (n_security_authors < 0 || n_security_authors > n_authors)
    throw InvalidConfig("n_security_authors must lie in [0, n_authors]");
  check_unit(leaks.author, "leak_strengths.author");
  check_unit(leaks.top_dir, "leak_strengths.top_dir");
  check_unit(leaks.diff_size, "leak_strengths.diff_size");
  check_unit(leaks.file_type, "leak_strengths.file_type");
  check_unit(leaks.time_of_day, "leak_strengths.time_of_day");
  check_unit(leaks.day_of_week, "leak_strengths.day_of_week");
  if (leaks.author > 0.0 && n_security_authors == 0)
    throw InvalidConfig("an author leak needs at least one security author");
  if (update_every < 1) throw InvalidConfig("update_every must be positive");
  if (disclosure_lag < 0) throw InvalidConfig("disclosure_lag must be non-negative");
  double total = 0.0;
  for (double w : severity_mix) {
    if (!(w >= 0.0)) throw InvalidConfig("severity_mix weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidConfig("severity_mix needs a positive weight");
  try {
    parse_day(start_date);
  } catch (const ParseError& e) {
    throw InvalidConfig(std::string("start_date: ") + e.what());
  }
}

SynthConfig synth_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  SynthConfig c;
  static const std::set<std::string> known = {"days",         "daily_rate",     "security_fraction", "n_authors",
                                              "n_security_authors", "leak_strengths", "update_every",
                                              "disclosure_lag", "severity_mix",   "seed",              "start_date"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw InvalidConfig("unknown config key '" + key + "'");
  try {
    c.days = j.value("days", c.days);
    c.daily_rate = j.value("daily_rate", c.daily_rate);
    c.security_fraction = j.value("security_fraction", c.security_fraction);
    c.n_authors = j.value("n_authors", c.n_authors);
    c.n_security_authors = j.value("n_security_authors", c.n_security_authors);
    c.update_every = j.value("update_every", c.update_every);
    c.disclosure_lag = j.value("disclosure_lag", c.disclosure_lag);
    c.seed = j.value("seed", c.seed);
    c.start_date = j.value("start_date", c.start_date);
    if (j.contains("leak_strengths")) {
      const auto& l = j.at("leak_strengths");
      static const std::set<std::string> leak_keys = {"author",    "top_dir",     "diff_size",
                                                      "file_type", "time_of_day", "day_of_week"};
      for (const auto& [key, value] : l.items())
        if (!leak_keys.count(key)) throw InvalidConfig("unknown leak_strengths key '" + key + "'");
      c.leaks.author = l.value("author", c.leaks.author);
      c.leaks.top_dir = l.value("top_dir", c.leaks.top_dir);
      c.leaks.diff_size = l.value("diff_size", c.leaks.diff_size);
      c.leaks.file_type = l.value("file_type", c.leaks.file_type);
      c.leaks.time_of_day = l.value("time_of_day", c.leaks.time_of_day);
      c.leaks.day_of_week = l.value("day_of_week", c.leaks.day_of_week);
    }
    if (j.contains("severity_mix")) {
      const auto& m = j.at("severity_mix");
      static const std::array<const char*, 4> names = {"low", "moderate", "high", "critical"};
      for (const auto& [key, value] : m.items())
        if (std::find_if(names.begin(), names.end(), [&](const char* n) { return key == n; }) == names.end())
          throw InvalidConfig("unknown severity_mix key '" + key + "'");
      for (std::size_t i = 0; i < names.size(); ++i) c.severity_mix[i] = m.value(names[i], c.severity_mix[i]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config has a field of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["days"] = c.days;
  j["daily_rate"] = c.daily_rate;
  j["security_fraction"] = c.security_fraction;
  j["n_authors"] = c.n_authors;
  j["n_security_authors"] = c.n_security_authors;
  j["leak_strengths"] = {{"author", c.leaks.author},       {"top_dir", c.leaks.top_dir},
                         {"diff_size", c.leaks.diff_size}, {"file_type", c.leaks.file_type},
                         {"time_of_day", c.leaks.time_of_day}, {"day_of_week", c.leaks.day_of_week}};
  j["update_every"] = c.update_every;
  j["disclosure_lag"] = c.disclosure_lag;
  j["severity_mix"] = {{"low", c.severity_mix[0]},
                       {"moderate", c.severity_mix[1]},
                       {"high", c.severity_mix[2]},
                       {"critical", c.severity_mix[3]}};
  j["seed"] = c.seed;
  j["start_date"] = c.start_date;
  return j.dump(2);
}

Corpus generate(const SynthConfig& config) {
  config.validate();
  return Generator(config).run();
}

}  // namespace patchleak
