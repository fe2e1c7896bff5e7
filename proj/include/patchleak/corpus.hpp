#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "patchleak/time.hpp"

namespace patchleak {

// One patch landed on the trunk repository.
struct PatchRecord {
  std::string id;
  Timestamp landed_at;
  std::string author;
  std::string description;  // empty models a fully obfuscated description
  std::vector<std::string> files;
  std::int64_t diff_chars = 0;
  std::int64_t diff_lines = 0;
  std::int64_t diff_files = 0;
  double avg_file_size = 0.0;

  bool operator==(const PatchRecord&) const = default;
};

enum class Severity { low, moderate, high, critical };

std::string_view to_string(Severity s);
Severity parse_severity(std::string_view text);
inline bool is_severe(Severity s) { return s == Severity::high || s == Severity::critical; }

struct VulnerabilityLabel {
  std::string patch_id;
  bool is_security = false;
  std::optional<Timestamp> disclosed_at;  // present iff is_security
  std::optional<Severity> severity;       // present iff is_security

  bool operator==(const VulnerabilityLabel&) const = default;
};

// A half-open run of days [begin, end) between consecutive security updates.
struct Segment {
  Day begin;
  Day end;

  std::int64_t length() const { return days_between(begin, end); }
  bool contains(Day d) const { return begin <= d && d < end; }
};

struct ReleaseTimeline {
  Day period_start;
  Day period_end;  // last simulated day, inclusive
  std::vector<Day> security_updates;

  bool operator==(const ReleaseTimeline&) const = default;

  void validate() const;
  bool contains(Day d) const { return period_start <= d && d <= period_end; }

  // security_updates.size() + 1 segments. The last one closes the day after period_end.
  std::vector<Segment> segments() const;
  Segment segment_of(Day d) const;

  // Most recent security update on or before d, if any.
  std::optional<Day> last_update_on_or_before(Day d) const;
  // First day of the patch pool that is current on day d.
  Day pool_start(Day d) const;
};

enum class BugEventKind { restricted, unrestricted, core_security_added, core_security_removed };

std::string_view to_string(BugEventKind k);
BugEventKind parse_bug_event_kind(std::string_view text);

struct BugEvent {
  Timestamp at;
  BugEventKind kind;

  bool operator==(const BugEvent&) const = default;
};

struct BugEventLog {
  std::uint64_t bug_id = 0;
  std::vector<BugEvent> events;  // sorted by timestamp

  bool operator==(const BugEventLog&) const = default;
};

// Immutable, validated collection of patches, ground truth, timeline and bug history.
class Corpus {
 public:
  Corpus(std::vector<PatchRecord> patches, std::vector<VulnerabilityLabel> labels, ReleaseTimeline timeline,
         std::optional<std::vector<BugEventLog>> bug_events = std::nullopt);

  const std::vector<PatchRecord>& patches() const { return patches_; }
  const std::vector<VulnerabilityLabel>& labels() const { return labels_; }
  const ReleaseTimeline& timeline() const { return timeline_; }
  const std::optional<std::vector<BugEventLog>>& bug_events() const { return bug_events_; }

  const PatchRecord& patch(std::size_t index) const { return patches_[index]; }
  std::size_t size() const { return patches_.size(); }

  // Ground truth (ignores disclosure timing).
  bool is_security(std::size_t patch_index) const;
  const VulnerabilityLabel* label_of(std::size_t patch_index) const;
  std::size_t security_count() const;

  // Patch indices ordered by (landed_at, input order).
  const std::vector<std::size_t>& by_landing() const { return by_landing_; }

  // Indices of patches in the pool on `day`: landed on or after the pool start and no later
  // than the end of `day`, ordered by landing time.
  std::vector<std::size_t> pool_indices(Day day) const;
  // Indices of patches landed before the most recent security update on or before `day`.
  std::vector<std::size_t> training_indices(Day day) const;
  // Training label visible on `day`: security and disclosed before the day starts.
  bool visible_label(std::size_t patch_index, Day day) const;

  bool operator==(const Corpus& other) const;

 private:
  void validate();
  std::size_t landed_before(Timestamp t) const;  // count of patches with landed_at < t

  std::vector<PatchRecord> patches_;
  std::vector<VulnerabilityLabel> labels_;
  ReleaseTimeline timeline_;
  std::optional<std::vector<BugEventLog>> bug_events_;

  std::vector<std::optional<std::size_t>> label_index_;
  std::vector<std::size_t> by_landing_;
  std::vector<Timestamp> landing_times_;  // parallel to by_landing_
};

Corpus load_corpus(const std::filesystem::path& dir);
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Hex SHA-256 over the corpus files present in `dir`, each prefixed by its name and size.
std::string corpus_digest(const std::filesystem::path& dir);

// Views returning records rather than indices.
std::vector<PatchRecord> patches_in_pool(const Corpus& corpus, Day day);
std::vector<std::pair<PatchRecord, bool>> labeled_training_set(const Corpus& corpus, Day day);

}  // namespace patchleak
