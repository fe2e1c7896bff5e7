#include "patchleak/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <openssl/evp.h>

#include "json.hpp"

#include "patchleak/errors.hpp"

namespace patchleak {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::low: return "low";
    case Severity::moderate: return "moderate";
    case Severity::high: return "high";
    case Severity::critical: return "critical";
  }
  return "?";
}

Severity parse_severity(std::string_view text) {
  if (text == "low") return Severity::low;
  if (text == "moderate") return Severity::moderate;
  if (text == "high") return Severity::high;
  if (text == "critical") return Severity::critical;
  throw ParseError("unknown severity '" + std::string(text) + "'");
}

std::string_view to_string(BugEventKind k) {
  switch (k) {
    case BugEventKind::restricted: return "restricted";
    case BugEventKind::unrestricted: return "unrestricted";
    case BugEventKind::core_security_added: return "core_security_added";
    case BugEventKind::core_security_removed: return "core_security_removed";
  }
  return "?";
}

BugEventKind parse_bug_event_kind(std::string_view text) {
  if (text == "restricted") return BugEventKind::restricted;
  if (text == "unrestricted") return BugEventKind::unrestricted;
  if (text == "core_security_added") return BugEventKind::core_security_added;
  if (text == "core_security_removed") return BugEventKind::core_security_removed;
  throw ParseError("unknown bug event kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// ReleaseTimeline

void ReleaseTimeline::validate() const {
  if (!(period_start < period_end)) throw TimelineViolation("period_start must precede period_end");
  for (std::size_t i = 0; i < security_updates.size(); ++i) {
    const Day u = security_updates[i];
    if (u < period_start || u > period_end)
      throw TimelineViolation("security update " + format_day(u) + " outside the period");
    if (i > 0 && !(security_updates[i - 1] < u))
      throw TimelineViolation("security updates must be strictly increasing");
  }
}

std::vector<Segment> ReleaseTimeline::segments() const {
  std::vector<Segment> out;
  Day begin = period_start;
  for (Day u : security_updates) {
    out.push_back({begin, u});
    begin = u;
  }
  out.push_back({begin, period_end + std::chrono::days{1}});
  return out;
}

Segment ReleaseTimeline::segment_of(Day d) const {
  if (!contains(d)) throw DayOutOfRange(format_day(d) + " is outside the timeline period");
  for (const Segment& s : segments())
    if (s.contains(d)) return s;
  throw DayOutOfRange(format_day(d) + " is not covered by any segment");
}

std::optional<Day> ReleaseTimeline::last_update_on_or_before(Day d) const {
  auto it = std::upper_bound(security_updates.begin(), security_updates.end(), d);
  if (it == security_updates.begin()) return std::nullopt;
  return *std::prev(it);
}

Day ReleaseTimeline::pool_start(Day d) const { return last_update_on_or_before(d).value_or(period_start); }

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<PatchRecord> patches, std::vector<VulnerabilityLabel> labels, ReleaseTimeline timeline,
               std::optional<std::vector<BugEventLog>> bug_events)
    : patches_(std::move(patches)),
      labels_(std::move(labels)),
      timeline_(std::move(timeline)),
      bug_events_(std::move(bug_events)) {
  validate();
}

void Corpus::validate() {
  timeline_.validate();

  std::unordered_map<std::string_view, std::size_t> index_of;
  index_of.reserve(patches_.size());
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    const PatchRecord& p = patches_[i];
    if (p.id.empty()) throw InvariantViolation("patch with empty id");
    if (!index_of.emplace(p.id, i).second) throw InvariantViolation("duplicate patch id '" + p.id + "'");
    if (p.diff_chars < 0 || p.diff_lines < 0 || p.diff_files < 0 || p.avg_file_size < 0)
      throw InvariantViolation("patch '" + p.id + "' has negative diff statistics");
    if (!p.files.empty() && p.diff_files != static_cast<std::int64_t>(p.files.size()))
      throw InvariantViolation("patch '" + p.id + "': diff_files does not match the file list");
    if (p.diff_lines > p.diff_chars) throw InvariantViolation("patch '" + p.id + "': diff_lines exceeds diff_chars");
    if (!timeline_.contains(day_of(p.landed_at)))
      throw TimelineViolation("patch '" + p.id + "' landed " + format_timestamp(p.landed_at) + " outside the period");
  }

  label_index_.assign(patches_.size(), std::nullopt);
  for (std::size_t li = 0; li < labels_.size(); ++li) {
    const VulnerabilityLabel& l = labels_[li];
    auto it = index_of.find(l.patch_id);
    if (it == index_of.end()) throw DanglingLabel("label references unknown patch '" + l.patch_id + "'");
    if (label_index_[it->second]) throw InvariantViolation("patch '" + l.patch_id + "' labeled twice");
    if (l.is_security != l.severity.has_value())
      throw InvariantViolation("label '" + l.patch_id + "': severity must be present iff is_security");
    if (l.is_security != l.disclosed_at.has_value())
      throw InvariantViolation("label '" + l.patch_id + "': disclosed_at must be present iff is_security");
    if (l.disclosed_at && *l.disclosed_at < patches_[it->second].landed_at)
      throw InvariantViolation("label '" + l.patch_id + "' disclosed before the patch landed");
    label_index_[it->second] = li;
  }

  if (bug_events_) {
    std::unordered_set<std::uint64_t> seen;
    for (const BugEventLog& log : *bug_events_) {
      if (log.bug_id == 0) throw InvariantViolation("bug id must be positive");
      if (!seen.insert(log.bug_id).second)
        throw InvariantViolation("duplicate bug id " + std::to_string(log.bug_id));
      if (!std::is_sorted(log.events.begin(), log.events.end(),
                          [](const BugEvent& a, const BugEvent& b) { return a.at < b.at; }))
        throw InvariantViolation("events of bug " + std::to_string(log.bug_id) + " are not sorted");
    }
  }

  by_landing_.resize(patches_.size());
  std::iota(by_landing_.begin(), by_landing_.end(), std::size_t{0});
  std::stable_sort(by_landing_.begin(), by_landing_.end(),
                   [&](std::size_t a, std::size_t b) { return patches_[a].landed_at < patches_[b].landed_at; });
  landing_times_.resize(patches_.size());
  for (std::size_t i = 0; i < by_landing_.size(); ++i) landing_times_[i] = patches_[by_landing_[i]].landed_at;
}

bool Corpus::is_security(std::size_t patch_index) const {
  const auto& li = label_index_[patch_index];
  return li && labels_[*li].is_security;
}

const VulnerabilityLabel* Corpus::label_of(std::size_t patch_index) const {
  const auto& li = label_index_[patch_index];
  return li ? &labels_[*li] : nullptr;
}

std::size_t Corpus::security_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels_.begin(), labels_.end(), [](const VulnerabilityLabel& l) { return l.is_security; }));
}

std::size_t Corpus::landed_before(Timestamp t) const {
  return static_cast<std::size_t>(std::lower_bound(landing_times_.begin(), landing_times_.end(), t) -
                                  landing_times_.begin());
}

std::vector<std::size_t> Corpus::pool_indices(Day day) const {
  if (!timeline_.contains(day)) throw DayOutOfRange(format_day(day) + " is outside the timeline period");
  const std::size_t first = landed_before(start_of(timeline_.pool_start(day)));
  const std::size_t last = landed_before(end_of(day));
  return {by_landing_.begin() + static_cast<std::ptrdiff_t>(first),
          by_landing_.begin() + static_cast<std::ptrdiff_t>(std::max(first, last))};
}

std::vector<std::size_t> Corpus::training_indices(Day day) const {
  if (!timeline_.contains(day)) throw DayOutOfRange(format_day(day) + " is outside the timeline period");
  const auto cut = timeline_.last_update_on_or_before(day);
  if (!cut) return {};
  const std::size_t n = landed_before(start_of(*cut));
  return {by_landing_.begin(), by_landing_.begin() + static_cast<std::ptrdiff_t>(n)};
}

bool Corpus::visible_label(std::size_t patch_index, Day day) const {
  const VulnerabilityLabel* l = label_of(patch_index);
  return l && l->is_security && *l->disclosed_at < start_of(day);
}

bool Corpus::operator==(const Corpus& other) const {
  return patches_ == other.patches_ && labels_ == other.labels_ && timeline_ == other.timeline_ &&
         bug_events_ == other.bug_events_;
}

std::vector<PatchRecord> patches_in_pool(const Corpus& corpus, Day day) {
  std::vector<PatchRecord> out;
  for (std::size_t i : corpus.pool_indices(day)) out.push_back(corpus.patch(i));
  return out;
}

std::vector<std::pair<PatchRecord, bool>> labeled_training_set(const Corpus& corpus, Day day) {
  std::vector<std::pair<PatchRecord, bool>> out;
  for (std::size_t i : corpus.training_indices(day)) out.emplace_back(corpus.patch(i), corpus.visible_label(i, day));
  return out;
}

// ---------------------------------------------------------------------------
// On-disk formats

namespace {

struct RecordReader {
  std::string file;
  std::size_t line;
  const json& obj;

  const json& field(const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) throw MalformedRecord(file, line, name, "missing");
    return *it;
  }
  bool has_value(const char* name) const {
    auto it = obj.find(name);
    return it != obj.end() && !it->is_null();
  }
  std::string string(const char* name) const {
    const json& v = field(name);
    if (!v.is_string()) throw MalformedRecord(file, line, name, "expected a string");
    return v.get<std::string>();
  }
  std::int64_t non_negative_int(const char* name) const {
    const json& v = field(name);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
      throw MalformedRecord(file, line, name, "expected a non-negative integer");
    return v.get<std::int64_t>();
  }
  double non_negative_real(const char* name) const {
    const json& v = field(name);
    if (!v.is_number() || v.get<double>() < 0) throw MalformedRecord(file, line, name, "expected a non-negative number");
    return v.get<double>();
  }
  bool boolean(const char* name) const {
    const json& v = field(name);
    if (!v.is_boolean()) throw MalformedRecord(file, line, name, "expected a boolean");
    return v.get<bool>();
  }
  template <class F>
  auto convert(const char* name, F&& parse) const {
    const std::string text = string(name);
    try {
      return parse(text);
    } catch (const ParseError& e) {
      throw MalformedRecord(file, line, name, e.what());
    }
  }
};

template <class F>
void for_each_jsonl(const std::filesystem::path& path, F&& on_record) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(path.string(), line, "<line>", e.what());
    }
    if (!obj.is_object()) throw MalformedRecord(path.string(), line, "<line>", "expected a JSON object");
    on_record(RecordReader{path.string(), line, obj});
  }
}

PatchRecord read_patch(const RecordReader& r) {
  PatchRecord p;
  p.id = r.string("id");
  if (p.id.empty()) throw MalformedRecord(r.file, r.line, "id", "empty");
  p.landed_at = r.convert("landed_at", parse_timestamp);
  p.author = r.string("author");
  p.description = r.string("description");
  const json& files = r.field("files");
  if (!files.is_array()) throw MalformedRecord(r.file, r.line, "files", "expected an array");
  for (const json& f : files) {
    if (!f.is_string()) throw MalformedRecord(r.file, r.line, "files", "expected string paths");
    p.files.push_back(f.get<std::string>());
  }
  p.diff_chars = r.non_negative_int("diff_chars");
  p.diff_lines = r.non_negative_int("diff_lines");
  p.diff_files = r.non_negative_int("diff_files");
  p.avg_file_size = r.non_negative_real("avg_file_size");
  if (!p.files.empty() && p.diff_files != static_cast<std::int64_t>(p.files.size()))
    throw MalformedRecord(r.file, r.line, "diff_files", "does not match the length of files");
  if (p.diff_lines > p.diff_chars) throw MalformedRecord(r.file, r.line, "diff_lines", "exceeds diff_chars");
  return p;
}

VulnerabilityLabel read_label(const RecordReader& r) {
  VulnerabilityLabel l;
  l.patch_id = r.string("id");
  l.is_security = r.boolean("is_security");
  if (r.has_value("disclosed_at")) l.disclosed_at = r.convert("disclosed_at", parse_timestamp);
  if (r.has_value("severity")) l.severity = r.convert("severity", parse_severity);
  if (l.is_security && !l.disclosed_at) throw MalformedRecord(r.file, r.line, "disclosed_at", "required for security");
  if (l.is_security && !l.severity) throw MalformedRecord(r.file, r.line, "severity", "required for security");
  if (!l.is_security && l.severity) throw MalformedRecord(r.file, r.line, "severity", "only allowed for security");
  if (!l.is_security && l.disclosed_at)
    throw MalformedRecord(r.file, r.line, "disclosed_at", "only allowed for security");
  return l;
}

BugEventLog read_bug_log(const RecordReader& r) {
  BugEventLog log;
  const json& id = r.field("bug_id");
  if (!id.is_number_integer() || id.get<std::int64_t>() <= 0)
    throw MalformedRecord(r.file, r.line, "bug_id", "expected a positive integer");
  log.bug_id = id.get<std::uint64_t>();
  const json& events = r.field("events");
  if (!events.is_array()) throw MalformedRecord(r.file, r.line, "events", "expected an array");
  for (const json& e : events) {
    if (!e.is_object()) throw MalformedRecord(r.file, r.line, "events", "expected objects");
    RecordReader er{r.file, r.line, e};
    log.events.push_back({er.convert("at", parse_timestamp), er.convert("kind", parse_bug_event_kind)});
  }
  for (std::size_t i = 1; i < log.events.size(); ++i)
    if (log.events[i].at < log.events[i - 1].at) throw MalformedRecord(r.file, r.line, "events", "not sorted by time");
  return log;
}

ReleaseTimeline read_timeline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json obj;
  try {
    obj = json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(path.string(), 1, "<document>", e.what());
  }
  if (!obj.is_object()) throw MalformedRecord(path.string(), 1, "<document>", "expected a JSON object");
  RecordReader r{path.string(), 1, obj};
  ReleaseTimeline t;
  t.period_start = r.convert("period_start", parse_day);
  t.period_end = r.convert("period_end", parse_day);
  const json& updates = r.field("security_updates");
  if (!updates.is_array()) throw MalformedRecord(r.file, 1, "security_updates", "expected an array");
  for (const json& u : updates) {
    if (!u.is_string()) throw MalformedRecord(r.file, 1, "security_updates", "expected date strings");
    try {
      t.security_updates.push_back(parse_day(u.get<std::string>()));
    } catch (const ParseError& e) {
      throw MalformedRecord(r.file, 1, "security_updates", e.what());
    }
  }
  return t;
}

void write_lines(const std::filesystem::path& path, const std::vector<ojson>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const ojson& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<PatchRecord> patches;
  for_each_jsonl(dir / "patches.jsonl", [&](const RecordReader& r) { patches.push_back(read_patch(r)); });
  std::vector<VulnerabilityLabel> labels;
  for_each_jsonl(dir / "labels.jsonl", [&](const RecordReader& r) { labels.push_back(read_label(r)); });
  ReleaseTimeline timeline = read_timeline(dir / "timeline.json");
  std::optional<std::vector<BugEventLog>> bugs;
  if (std::filesystem::exists(dir / "bug_events.jsonl")) {
    bugs.emplace();
    for_each_jsonl(dir / "bug_events.jsonl", [&](const RecordReader& r) { bugs->push_back(read_bug_log(r)); });
  }
  return Corpus(std::move(patches), std::move(labels), std::move(timeline), std::move(bugs));
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::vector<ojson> patches;
  for (const PatchRecord& p : corpus.patches()) {
    ojson o;
    o["id"] = p.id;
    o["landed_at"] = format_timestamp(p.landed_at);
    o["author"] = p.author;
    o["description"] = p.description;
    o["files"] = p.files;
    o["diff_chars"] = p.diff_chars;
    o["diff_lines"] = p.diff_lines;
    o["diff_files"] = p.diff_files;
    o["avg_file_size"] = p.avg_file_size;
    patches.push_back(std::move(o));
  }
  write_lines(dir / "patches.jsonl", patches);

  std::vector<ojson> labels;
  for (const VulnerabilityLabel& l : corpus.labels()) {
    ojson o;
    o["id"] = l.patch_id;
    o["is_security"] = l.is_security;
    o["disclosed_at"] = l.disclosed_at ? ojson(format_timestamp(*l.disclosed_at)) : ojson(nullptr);
    o["severity"] = l.severity ? ojson(std::string(to_string(*l.severity))) : ojson(nullptr);
    labels.push_back(std::move(o));
  }
  write_lines(dir / "labels.jsonl", labels);

  const ReleaseTimeline& t = corpus.timeline();
  ojson tl;
  tl["period_start"] = format_day(t.period_start);
  tl["period_end"] = format_day(t.period_end);
  tl["security_updates"] = ojson::array();
  for (Day u : t.security_updates) tl["security_updates"].push_back(format_day(u));
  {
    std::ofstream out(dir / "timeline.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "timeline.json").string());
    out << tl.dump(2) << '\n';
  }

  if (corpus.bug_events()) {
    std::vector<ojson> bugs;
    for (const BugEventLog& log : *corpus.bug_events()) {
      ojson o;
      o["bug_id"] = log.bug_id;
      o["events"] = ojson::array();
      for (const BugEvent& e : log.events) {
        ojson ev;
        ev["at"] = format_timestamp(e.at);
        ev["kind"] = std::string(to_string(e.kind));
        o["events"].push_back(std::move(ev));
      }
      bugs.push_back(std::move(o));
    }
    write_lines(dir / "bug_events.jsonl", bugs);
  }
}

std::string corpus_digest(const std::filesystem::path& dir) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 unavailable");
  bool any = false;
  for (const char* name : {"patches.jsonl", "labels.jsonl", "timeline.json", "bug_events.jsonl"}) {
    const std::filesystem::path path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string prefix = std::string(name) + '\n' + std::to_string(content.size()) + '\n';
    EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size());
    EVP_DigestUpdate(ctx.get(), content.data(), content.size());
    any = true;
  }
  if (!any) throw IoError("no corpus files in " + dir.string());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

}  // namespace patchleak
