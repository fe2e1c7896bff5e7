#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "patchleak/corpus.hpp"

namespace patchleak {

// How strongly each metadata attribute of a security patch departs from the ordinary patch
// distribution. 0 leaves security patches indistinguishable on that attribute; 1 is maximal.
struct LeakStrengths {
  double author = 0.0;
  double top_dir = 0.0;
  double diff_size = 0.0;
  double file_type = 0.0;
  double time_of_day = 0.0;
  double day_of_week = 0.0;

  bool operator==(const LeakStrengths&) const = default;
};

struct SynthConfig {
  int days = 300;
  double daily_rate = 38.6;
  double security_fraction = 0.0085;
  int n_authors = 516;
  int n_security_authors = 4;
  LeakStrengths leaks{0.6, 0.5, 0.5, 0.0, 0.0, 0.0};
  int update_every = 31;
  int disclosure_lag = 0;  // extra days after the next security update
  std::array<double, 4> severity_mix{0.10, 0.25, 0.35, 0.30};  // low, moderate, high, critical
  std::uint64_t seed = 1;
  std::string start_date = "2008-06-17";

  bool operator==(const SynthConfig&) const = default;
  void validate() const;
};

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& config);

Corpus generate(const SynthConfig& config);

}  // namespace patchleak
