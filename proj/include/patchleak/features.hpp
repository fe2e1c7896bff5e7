#pragma once

#include <array>
#include <bitset>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchleak/corpus.hpp"

namespace patchleak {

enum class Feature {
  author,
  top_dir,
  file_type,
  diff_chars,
  diff_lines,
  diff_files,
  avg_file_size,
  time_of_day,
  day_of_week,
};

inline constexpr std::size_t kFeatureCount = 9;
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures = {
    Feature::author,     Feature::top_dir,       Feature::file_type,   Feature::diff_chars, Feature::diff_lines,
    Feature::diff_files, Feature::avg_file_size, Feature::time_of_day, Feature::day_of_week};
inline constexpr std::array<Feature, 5> kContinuousFeatures = {
    Feature::diff_chars, Feature::diff_lines, Feature::diff_files, Feature::avg_file_size, Feature::time_of_day};

std::string_view feature_name(Feature f);
std::optional<Feature> parse_feature(std::string_view name);
bool is_continuous(Feature f);

class FeatureMask {
 public:
  static FeatureMask all();
  static FeatureMask none() { return FeatureMask{}; }

  bool enabled(Feature f) const { return bits_.test(static_cast<std::size_t>(f)); }
  FeatureMask without(Feature f) const;
  FeatureMask without(std::span<const Feature> fs) const;
  bool any() const { return bits_.any(); }
  std::vector<Feature> enabled_features() const;

  bool operator==(const FeatureMask&) const = default;

 private:
  std::bitset<kFeatureCount> bits_;
};

// Ablation targets: a single nominal/temporal feature, or "diff_size" for the four size
// features removed together.
std::vector<Feature> ablation_group(std::string_view name);
std::vector<std::string> ablation_targets();

// Raw categorical/continuous view of a patch before encoding.
struct PatchAttributes {
  std::string author;
  std::string top_dir;    // majority top-level directory, "(root)" for top-level files
  std::string file_type;  // majority extension, "(none)" without one
  std::array<double, 5> continuous{};  // ordered as kContinuousFeatures
  int day_of_week = 0;                 // 0 = Sunday
};

PatchAttributes describe(const PatchRecord& p);
std::string top_level_directory(std::string_view path);
std::string file_extension(std::string_view path);
std::string_view weekday_name(int day_of_week);

// Encoding built from training patches only.
struct FeatureSchema {
  std::vector<std::string> authors;
  std::vector<std::string> top_dirs;
  std::vector<std::string> file_types;
  std::array<double, 5> continuous_min{};
  std::array<double, 5> continuous_max{};
  FeatureMask enabled;

  std::size_t dimension() const;
};

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

FeatureSchema build_schema(std::span<const PatchRecord* const> training, FeatureMask mask = FeatureMask::all());
FeatureSchema build_schema(std::span<const PatchRecord> training, FeatureMask mask = FeatureMask::all());

FeatureVector extract(const FeatureSchema& schema, const PatchRecord& p);
FeatureVector extract(const FeatureSchema& schema, const PatchAttributes& attrs);

}  // namespace patchleak
