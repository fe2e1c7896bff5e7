#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "patchleak/corpus.hpp"

namespace patchleak {

// Bug references recognised in patch descriptions: the keyword "bug" (any case) followed by
// optional separators and a run of digits, or a bare leading number such as "495875 - ...".
struct BugIdPattern {
  int min_digits = 4;
  int max_digits = 9;
};

std::vector<std::uint64_t> extract_bug_ids(std::string_view description, const BugIdPattern& pattern = {});

struct EvidenceOptions {
  // Treat bugs missing from the snapshot like an access-denied tracker page.
  bool absent_means_restricted = false;
};

class BugIndex {
 public:
  explicit BugIndex(const std::vector<BugEventLog>& logs);
  const BugEventLog* find(std::uint64_t bug_id) const;

 private:
  std::unordered_map<std::uint64_t, const BugEventLog*> by_id_;
};

// True iff some referenced bug shows, before the end of `day`, either an access restriction that
// has not been lifted or any core-security flag change.
bool is_security_evident(std::span<const std::uint64_t> bug_ids, const BugIndex& bugs, Day day,
                         const EvidenceOptions& options = {});

struct LinkAttackDay {
  Day day;
  std::size_t pool_size = 0;
  std::size_t found_count = 0;                    // security patches in the pool flagged as evident
  std::optional<std::string> first_found_patch_id;  // earliest-landed flagged security patch
  std::int64_t window_contribution_days = 0;
  std::size_t lookups = 0;                        // tracker queries, one per referenced bug in the pool
};

struct LinkAttackSeries {
  int k = 1;
  std::vector<LinkAttackDay> days;

  std::int64_t total_window_days() const;
  std::size_t total_lookups() const;
};

struct LinkAttackOptions {
  BugIdPattern pattern;
  EvidenceOptions evidence;
};

// Day-by-day bug-link attack. A day is satisfied when at least k flagged security patches are in
// the pool; the first satisfied day of a segment contributes (segment end - day) window days.
LinkAttackSeries link_attack_daily(const Corpus& corpus, int k, const LinkAttackOptions& options = {});

}  // namespace patchleak
