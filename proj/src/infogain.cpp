#include "patchleak/infogain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "patchleak/errors.hpp"

namespace patchleak {

double entropy_of_counts(std::span<const std::size_t> counts) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) throw EmptyInput("entropy of an empty multiset");
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double entropy(std::size_t positives, std::size_t total) {
  const std::array<std::size_t, 2> counts = {positives, total - positives};
  return entropy_of_counts(counts);
}

double entropy(const std::vector<bool>& labels) {
  return entropy(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)), labels.size());
}

namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t total = 0;
};

// Shared by the nominal and threshold paths so both evaluate identical expressions.
double gain_from_partition(ClassCounts all, std::span<const ClassCounts> parts) {
  double conditional = 0.0;
  for (const ClassCounts& part : parts)
    conditional += (static_cast<double>(part.total) / static_cast<double>(all.total)) *
                   entropy(part.positives, part.total);
  return std::max(0.0, entropy(all.positives, all.total) - conditional);
}

double split_information(std::span<const ClassCounts> parts) {
  std::vector<std::size_t> sizes;
  sizes.reserve(parts.size());
  for (const ClassCounts& p : parts) sizes.push_back(p.total);
  return entropy_of_counts(sizes);
}

std::vector<ClassCounts> partition(const std::vector<std::string>& values, const std::vector<bool>& labels,
                                   ClassCounts& all) {
  if (values.size() != labels.size()) throw DimensionMismatch("values and labels differ in length");
  if (values.empty()) throw EmptyInput("information gain of an empty dataset");
  std::map<std::string, ClassCounts> by_value;
  all = {};
  for (std::size_t i = 0; i < values.size(); ++i) {
    ClassCounts& c = by_value[values[i]];
    ++c.total;
    ++all.total;
    if (labels[i]) {
      ++c.positives;
      ++all.positives;
    }
  }
  std::vector<ClassCounts> parts;
  parts.reserve(by_value.size());
  for (const auto& [value, counts] : by_value) parts.push_back(counts);
  return parts;
}

}  // namespace

double info_gain(const std::vector<std::string>& values, const std::vector<bool>& labels) {
  ClassCounts all;
  const auto parts = partition(values, labels, all);
  return gain_from_partition(all, parts);
}

double gain_ratio(const std::vector<std::string>& values, const std::vector<bool>& labels) {
  ClassCounts all;
  const auto parts = partition(values, labels, all);
  if (parts.size() < 2) throw ZeroSplitInformation("feature takes a single value; split information is zero");
  return gain_from_partition(all, parts) / split_information(parts);
}

ThresholdSplit continuous_gain_ratio(const std::vector<double>& values, const std::vector<bool>& labels,
                                     ThresholdRule rule) {
  if (values.size() != labels.size()) throw DimensionMismatch("values and labels differ in length");
  if (values.empty()) throw EmptyInput("information gain of an empty dataset");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  ClassCounts all{static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)), values.size()};
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (values[order[i]] != values[order[i - 1]]) ++distinct;
  if (distinct < 2) throw DegenerateFeature("continuous feature takes a single value");

  // C4.5 (release 8) charges log2(#candidate thresholds)/|S| for choosing a threshold.
  const double penalty =
      rule == ThresholdRule::c45 ? std::log2(static_cast<double>(distinct - 1)) / static_cast<double>(all.total) : 0.0;

  std::optional<ThresholdSplit> best;
  double best_key = 0.0;
  ClassCounts left;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    ++left.total;
    if (labels[order[i]]) ++left.positives;
    const double lo = values[order[i]];
    const double hi = values[order[i + 1]];
    if (lo == hi) continue;
    const std::array<ClassCounts, 2> parts = {
        left, ClassCounts{all.positives - left.positives, all.total - left.total}};
    const double gain = gain_from_partition(all, parts);
    const double split = split_information(parts);
    ThresholdSplit cand{gain, gain / split, (lo + hi) / 2.0};
    const double key = rule == ThresholdRule::max_ratio ? cand.gain_ratio : cand.gain;
    if (!best || key > best_key) {
      best = cand;
      best_key = key;
    }
  }
  if (rule == ThresholdRule::c45) {
    const std::size_t n_left = static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [&](double v) { return v <= best->threshold; }));
    const std::array<std::size_t, 2> sizes = {n_left, all.total - n_left};
    best->gain = std::max(0.0, best->gain - penalty);
    best->gain_ratio = best->gain / entropy_of_counts(sizes);
  }
  return *best;
}

std::vector<FeatureScore> rank_features(const Corpus& corpus, ThresholdRule rule) {
  std::vector<PatchAttributes> attrs;
  std::vector<bool> labels;
  attrs.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    attrs.push_back(describe(corpus.patch(i)));
    labels.push_back(corpus.is_security(i));
  }

  std::vector<FeatureScore> scores;
  if (attrs.empty()) return scores;
  for (Feature f : kAllFeatures) {
    FeatureScore s;
    s.feature = f;
    if (is_continuous(f)) {
      const std::size_t slot = static_cast<std::size_t>(
          std::find(kContinuousFeatures.begin(), kContinuousFeatures.end(), f) - kContinuousFeatures.begin());
      std::vector<double> values;
      values.reserve(attrs.size());
      for (const PatchAttributes& a : attrs) values.push_back(a.continuous[slot]);
      try {
        const ThresholdSplit split = continuous_gain_ratio(values, labels, rule);
        s.gain = split.gain;
        s.gain_ratio = split.gain_ratio;
        s.threshold = split.threshold;
      } catch (const DegenerateFeature&) {
      }
    } else {
      std::vector<std::string> values;
      values.reserve(attrs.size());
      for (const PatchAttributes& a : attrs) {
        switch (f) {
          case Feature::author: values.push_back(a.author); break;
          case Feature::top_dir: values.push_back(a.top_dir); break;
          case Feature::file_type: values.push_back(a.file_type); break;
          default: values.emplace_back(weekday_name(a.day_of_week)); break;
        }
      }
      s.gain = info_gain(values, labels);
      try {
        s.gain_ratio = gain_ratio(values, labels);
      } catch (const ZeroSplitInformation&) {
        s.gain_ratio = 0.0;
      }
    }
    scores.push_back(s);
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const FeatureScore& a, const FeatureScore& b) { return a.gain_ratio > b.gain_ratio; });
  return scores;
}

}  // namespace patchleak
