#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchleak/corpus.hpp"
#include "patchleak/features.hpp"

namespace patchleak {

// Shannon entropy in bits of a distribution given by counts; 0 log 0 := 0.
double entropy_of_counts(std::span<const std::size_t> counts);
double entropy(std::size_t positives, std::size_t total);
double entropy(const std::vector<bool>& labels);

// Gain(S,F) = Ent(S_l) - sum_x |S_l,x|/|S| Ent(S_l,x) for a nominal feature.
double info_gain(const std::vector<std::string>& values, const std::vector<bool>& labels);
// Gain divided by the split information Ent(S_F).
double gain_ratio(const std::vector<std::string>& values, const std::vector<bool>& labels);

struct ThresholdSplit {
  double gain = 0.0;
  double gain_ratio = 0.0;
  double threshold = 0.0;  // examples with value <= threshold go left
};

enum class ThresholdRule {
  max_ratio,  // threshold maximising the gain ratio over every virtual binary feature
  c45,        // threshold maximising MDL-corrected gain, ratio reported at that threshold
};

// Best virtual binary feature over midpoints of consecutive distinct values.
ThresholdSplit continuous_gain_ratio(const std::vector<double>& values, const std::vector<bool>& labels,
                                     ThresholdRule rule = ThresholdRule::max_ratio);

struct FeatureScore {
  Feature feature;
  double gain = 0.0;
  double gain_ratio = 0.0;
  std::optional<double> threshold;  // continuous features only
};

// Scores every metadata feature against ground-truth labels, sorted by decreasing gain ratio.
std::vector<FeatureScore> rank_features(const Corpus& corpus, ThresholdRule rule = ThresholdRule::c45);

}  // namespace patchleak
