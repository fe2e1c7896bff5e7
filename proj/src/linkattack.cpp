#include "patchleak/linkattack.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_set>

#include "patchleak/errors.hpp"

namespace patchleak {

namespace {

std::optional<std::uint64_t> as_bug_id(const std::string& digits, const BugIdPattern& pattern) {
  const auto n = static_cast<int>(digits.size());
  if (n < pattern.min_digits || n > pattern.max_digits) return std::nullopt;
  const std::uint64_t id = std::stoull(digits);
  if (id == 0) return std::nullopt;
  return id;
}

}  // namespace

std::vector<std::uint64_t> extract_bug_ids(std::string_view description, const BugIdPattern& pattern) {
  // Greedy digit runs so that a 10-digit number is rejected rather than truncated.
  static const std::regex keyword(R"((?:^|[^a-z0-9])bug[\s#:=_-]*([0-9]+))", std::regex::icase);
  static const std::regex leading(R"(^\s*([0-9]+)\s*(?:-|:|\xE2\x80\x94|\xE2\x80\x93))");

  std::vector<std::uint64_t> ids;
  std::unordered_set<std::uint64_t> seen;
  auto add = [&](const std::string& digits) {
    if (auto id = as_bug_id(digits, pattern); id && seen.insert(*id).second) ids.push_back(*id);
  };

  const std::string text(description);
  std::smatch m;
  if (std::regex_search(text, m, leading)) add(m[1].str());
  for (auto it = std::sregex_iterator(text.begin(), text.end(), keyword); it != std::sregex_iterator(); ++it)
    add((*it)[1].str());
  return ids;
}

BugIndex::BugIndex(const std::vector<BugEventLog>& logs) {
  by_id_.reserve(logs.size());
  for (const BugEventLog& log : logs) by_id_.emplace(log.bug_id, &log);
}

const BugEventLog* BugIndex::find(std::uint64_t bug_id) const {
  auto it = by_id_.find(bug_id);
  return it == by_id_.end() ? nullptr : it->second;
}

bool is_security_evident(std::span<const std::uint64_t> bug_ids, const BugIndex& bugs, Day day,
                         const EvidenceOptions& options) {
  const Timestamp horizon = end_of(day);
  for (std::uint64_t id : bug_ids) {
    const BugEventLog* log = bugs.find(id);
    if (!log) {
      if (options.absent_means_restricted) return true;
      continue;
    }
    bool restricted = false;
    for (const BugEvent& e : log->events) {
      if (!(e.at < horizon)) break;
      switch (e.kind) {
        case BugEventKind::restricted: restricted = true; break;
        case BugEventKind::unrestricted: restricted = false; break;
        case BugEventKind::core_security_added:
        case BugEventKind::core_security_removed: return true;
      }
    }
    if (restricted) return true;
  }
  return false;
}

std::int64_t LinkAttackSeries::total_window_days() const {
  std::int64_t total = 0;
  for (const LinkAttackDay& d : days) total += d.window_contribution_days;
  return total;
}

std::size_t LinkAttackSeries::total_lookups() const {
  std::size_t total = 0;
  for (const LinkAttackDay& d : days) total += d.lookups;
  return total;
}

LinkAttackSeries link_attack_daily(const Corpus& corpus, int k, const LinkAttackOptions& options) {
  if (k < 1) throw InvalidConfig("k must be positive");
  if (!corpus.bug_events()) throw MissingBugEvents("corpus has no bug_events.jsonl");
  const BugIndex bugs(*corpus.bug_events());

  std::vector<std::vector<std::uint64_t>> refs(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    refs[i] = extract_bug_ids(corpus.patch(i).description, options.pattern);

  LinkAttackSeries series;
  series.k = k;
  const ReleaseTimeline& timeline = corpus.timeline();
  for (const Segment& seg : timeline.segments()) {
    bool satisfied = false;
    for (Day d = seg.begin; d < seg.end; d += std::chrono::days{1}) {
      LinkAttackDay rec;
      rec.day = d;
      const std::vector<std::size_t> pool = corpus.pool_indices(d);
      rec.pool_size = pool.size();
      for (std::size_t i : pool) {
        rec.lookups += refs[i].size();
        if (!corpus.is_security(i) || !is_security_evident(refs[i], bugs, d, options.evidence)) continue;
        if (rec.found_count++ == 0) rec.first_found_patch_id = corpus.patch(i).id;
      }
      if (!satisfied && rec.found_count >= static_cast<std::size_t>(k)) {
        satisfied = true;
        rec.window_contribution_days = days_between(d, seg.end);
      }
      series.days.push_back(std::move(rec));
    }
  }
  return series;
}

}  // namespace patchleak
