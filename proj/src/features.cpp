#include "patchleak/features.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "patchleak/errors.hpp"

namespace patchleak {

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::author: return "author";
    case Feature::top_dir: return "top_dir";
    case Feature::file_type: return "file_type";
    case Feature::diff_chars: return "diff_chars";
    case Feature::diff_lines: return "diff_lines";
    case Feature::diff_files: return "diff_files";
    case Feature::avg_file_size: return "avg_file_size";
    case Feature::time_of_day: return "time_of_day";
    case Feature::day_of_week: return "day_of_week";
  }
  return "?";
}

std::optional<Feature> parse_feature(std::string_view name) {
  for (Feature f : kAllFeatures)
    if (feature_name(f) == name) return f;
  return std::nullopt;
}

bool is_continuous(Feature f) {
  return std::find(kContinuousFeatures.begin(), kContinuousFeatures.end(), f) != kContinuousFeatures.end();
}

FeatureMask FeatureMask::all() {
  FeatureMask m;
  m.bits_.set();
  return m;
}

FeatureMask FeatureMask::without(Feature f) const {
  FeatureMask m = *this;
  m.bits_.reset(static_cast<std::size_t>(f));
  return m;
}

FeatureMask FeatureMask::without(std::span<const Feature> fs) const {
  FeatureMask m = *this;
  for (Feature f : fs) m = m.without(f);
  return m;
}

std::vector<Feature> FeatureMask::enabled_features() const {
  std::vector<Feature> out;
  for (Feature f : kAllFeatures)
    if (enabled(f)) out.push_back(f);
  return out;
}

std::vector<Feature> ablation_group(std::string_view name) {
  if (name == "diff_size")
    return {Feature::diff_chars, Feature::diff_lines, Feature::diff_files, Feature::avg_file_size};
  if (auto f = parse_feature(name); f && !(is_continuous(*f) && *f != Feature::time_of_day)) return {*f};
  throw InvalidConfig("unknown ablation target '" + std::string(name) +
                      "' (expected author, top_dir, file_type, time_of_day, day_of_week or diff_size)");
}

std::vector<std::string> ablation_targets() {
  return {"author", "top_dir", "file_type", "time_of_day", "day_of_week", "diff_size"};
}

std::string top_level_directory(std::string_view path) {
  const auto slash = path.find('/');
  if (slash == std::string_view::npos || slash == 0) return "(root)";
  return std::string(path.substr(0, slash));
}

std::string file_extension(std::string_view path) {
  const auto slash = path.rfind('/');
  const std::string_view base = slash == std::string_view::npos ? path : path.substr(slash + 1);
  const auto dot = base.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == base.size()) return "(none)";
  return std::string(base.substr(dot));
}

std::string_view weekday_name(int day_of_week) {
  static constexpr std::array<std::string_view, 7> names = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  return names.at(static_cast<std::size_t>(day_of_week));
}

namespace {

// Most frequent key; ties go to the lexicographically smallest.
std::string majority(const std::vector<std::string>& keys, std::string fallback) {
  std::map<std::string, int> counts;
  for (const std::string& k : keys) ++counts[k];
  std::string best = std::move(fallback);
  int best_count = 0;
  for (const auto& [key, count] : counts) {
    if (count > best_count) {
      best = key;
      best_count = count;
    }
  }
  return best;
}

std::size_t continuous_slot(Feature f) {
  return static_cast<std::size_t>(std::find(kContinuousFeatures.begin(), kContinuousFeatures.end(), f) -
                                  kContinuousFeatures.begin());
}

}  // namespace

PatchAttributes describe(const PatchRecord& p) {
  PatchAttributes a;
  a.author = p.author;
  std::vector<std::string> dirs, exts;
  for (const std::string& f : p.files) {
    dirs.push_back(top_level_directory(f));
    exts.push_back(file_extension(f));
  }
  a.top_dir = majority(dirs, "(root)");
  a.file_type = majority(exts, "(none)");
  a.continuous = {static_cast<double>(p.diff_chars), static_cast<double>(p.diff_lines),
                  static_cast<double>(p.diff_files), p.avg_file_size,
                  static_cast<double>(seconds_into_day(p.landed_at))};
  a.day_of_week = static_cast<int>(std::chrono::weekday{day_of(p.landed_at)}.c_encoding());
  return a;
}

std::size_t FeatureSchema::dimension() const {
  std::size_t d = 0;
  if (enabled.enabled(Feature::author)) d += authors.size();
  if (enabled.enabled(Feature::top_dir)) d += top_dirs.size();
  if (enabled.enabled(Feature::file_type)) d += file_types.size();
  for (Feature f : kContinuousFeatures)
    if (enabled.enabled(f)) ++d;
  if (enabled.enabled(Feature::day_of_week)) d += 7;
  return d;
}

FeatureSchema build_schema(std::span<const PatchRecord* const> training, FeatureMask mask) {
  if (training.empty()) throw EmptyTrainingSet("cannot build a feature schema without training patches");
  std::set<std::string> authors, dirs, types;
  FeatureSchema s;
  s.enabled = mask;
  s.continuous_min.fill(std::numeric_limits<double>::infinity());
  s.continuous_max.fill(-std::numeric_limits<double>::infinity());
  for (const PatchRecord* p : training) {
    const PatchAttributes a = describe(*p);
    authors.insert(a.author);
    dirs.insert(a.top_dir);
    types.insert(a.file_type);
    for (std::size_t c = 0; c < a.continuous.size(); ++c) {
      s.continuous_min[c] = std::min(s.continuous_min[c], a.continuous[c]);
      s.continuous_max[c] = std::max(s.continuous_max[c], a.continuous[c]);
    }
  }
  if (mask.enabled(Feature::author)) s.authors.assign(authors.begin(), authors.end());
  if (mask.enabled(Feature::top_dir)) s.top_dirs.assign(dirs.begin(), dirs.end());
  if (mask.enabled(Feature::file_type)) s.file_types.assign(types.begin(), types.end());
  return s;
}

FeatureSchema build_schema(std::span<const PatchRecord> training, FeatureMask mask) {
  std::vector<const PatchRecord*> ptrs;
  ptrs.reserve(training.size());
  for (const PatchRecord& p : training) ptrs.push_back(&p);
  return build_schema(std::span<const PatchRecord* const>(ptrs), mask);
}

namespace {

void one_hot(std::vector<double>& out, const std::vector<std::string>& categories, const std::string& value) {
  const std::size_t base = out.size();
  out.resize(base + categories.size(), 0.0);
  auto it = std::lower_bound(categories.begin(), categories.end(), value);
  if (it != categories.end() && *it == value) out[base + static_cast<std::size_t>(it - categories.begin())] = 1.0;
}

}  // namespace

FeatureVector extract(const FeatureSchema& schema, const PatchAttributes& a) {
  FeatureVector v;
  v.values.reserve(schema.dimension());
  const FeatureMask& m = schema.enabled;
  if (m.enabled(Feature::author)) one_hot(v.values, schema.authors, a.author);
  if (m.enabled(Feature::top_dir)) one_hot(v.values, schema.top_dirs, a.top_dir);
  if (m.enabled(Feature::file_type)) one_hot(v.values, schema.file_types, a.file_type);
  for (Feature f : kContinuousFeatures) {
    if (!m.enabled(f)) continue;
    const std::size_t c = continuous_slot(f);
    const double lo = schema.continuous_min[c];
    const double hi = schema.continuous_max[c];
    const double scaled = hi > lo ? (a.continuous[c] - lo) / (hi - lo) : 0.0;
    v.values.push_back(std::clamp(scaled, 0.0, 1.0));
  }
  if (m.enabled(Feature::day_of_week)) {
    const std::size_t base = v.values.size();
    v.values.resize(base + 7, 0.0);
    v.values[base + static_cast<std::size_t>(a.day_of_week)] = 1.0;
  }
  return v;
}

FeatureVector extract(const FeatureSchema& schema, const PatchRecord& p) { return extract(schema, describe(p)); }

}  // namespace patchleak
