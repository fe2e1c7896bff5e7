#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "patchleak/errors.hpp"
#include "patchleak/synthgen.hpp"

using namespace patchleak;
using fixtures::patch;
using fixtures::security_label;
using fixtures::TempDir;

namespace {

Corpus three_patch_corpus() {
  std::vector<PatchRecord> patches = {patch("p1", "2008-06-17T10:00:00Z"), patch("p2", "2008-06-18T11:00:00Z"),
                                      patch("p3", "2008-06-20T09:30:00Z")};
  std::vector<VulnerabilityLabel> labels = {security_label("p2", "2008-07-01T00:00:00Z")};
  return Corpus(patches, labels, fixtures::timeline("2008-06-17", "2008-08-31", {"2008-06-20", "2008-07-15"}));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("corpus with three patches and one security label") {
  const Corpus c = three_patch_corpus();
  CHECK(c.size() == 3);
  CHECK(c.security_count() == 1);
  CHECK(c.is_security(1));
  CHECK_FALSE(c.is_security(0));
}

TEST_CASE("label referencing an unknown patch is rejected") {
  std::vector<PatchRecord> patches = {patch("p1", "2008-06-17T10:00:00Z")};
  std::vector<VulnerabilityLabel> labels = {security_label("ghost", "2008-07-01T00:00:00Z")};
  CHECK_THROWS_AS(Corpus(patches, labels, fixtures::timeline("2008-06-17", "2008-08-31", {})), DanglingLabel);
}

TEST_CASE("patch landing outside the period is rejected") {
  std::vector<PatchRecord> patches = {patch("p1", "2008-09-01T10:00:00Z")};
  CHECK_THROWS_AS(Corpus(patches, {}, fixtures::timeline("2008-06-17", "2008-08-31", {})), TimelineViolation);
}

TEST_CASE("record invariants are enforced") {
  const auto tl = fixtures::timeline("2008-06-17", "2008-08-31", {});
  SUBCASE("duplicate id") {
    std::vector<PatchRecord> p = {patch("p1", "2008-06-17T10:00:00Z"), patch("p1", "2008-06-18T10:00:00Z")};
    CHECK_THROWS_AS(Corpus(p, {}, tl), InvariantViolation);
  }
  SUBCASE("diff_lines above diff_chars") {
    std::vector<PatchRecord> p = {patch("p1", "2008-06-17T10:00:00Z", "dev", {"a/b.c"}, 10, 11)};
    CHECK_THROWS_AS(Corpus(p, {}, tl), InvariantViolation);
  }
  SUBCASE("disclosure before landing") {
    std::vector<PatchRecord> p = {patch("p1", "2008-06-17T10:00:00Z")};
    std::vector<VulnerabilityLabel> l = {security_label("p1", "2008-06-17T09:00:00Z")};
    CHECK_THROWS_AS(Corpus(p, l, tl), InvariantViolation);
  }
  SUBCASE("severity without security") {
    std::vector<PatchRecord> p = {patch("p1", "2008-06-17T10:00:00Z")};
    std::vector<VulnerabilityLabel> l = {{"p1", false, std::nullopt, Severity::low}};
    CHECK_THROWS_AS(Corpus(p, l, tl), InvariantViolation);
  }
}

TEST_CASE("timeline validation") {
  CHECK_THROWS_AS(fixtures::timeline("2008-06-17", "2008-06-17", {}).validate(), TimelineViolation);
  CHECK_THROWS_AS(fixtures::timeline("2008-06-17", "2008-08-31", {"2008-07-01", "2008-07-01"}).validate(),
                  TimelineViolation);
  CHECK_THROWS_AS(fixtures::timeline("2008-06-17", "2008-08-31", {"2008-09-01"}).validate(), TimelineViolation);
  const auto tl = fixtures::timeline("2008-06-17", "2008-08-31", {"2008-07-01", "2008-08-01"});
  const auto segs = tl.segments();
  REQUIRE(segs.size() == 3);
  CHECK(segs[0].begin == parse_day("2008-06-17"));
  CHECK(segs[1].begin == parse_day("2008-07-01"));
  CHECK(segs[2].end == parse_day("2008-09-01"));
  CHECK(tl.segment_of(parse_day("2008-07-31")).begin == parse_day("2008-07-01"));
}

TEST_CASE("pool boundaries") {
  std::vector<PatchRecord> patches = {
      patch("a", "2008-06-17T12:00:00Z"), patch("b", "2008-06-19T23:59:59Z"), patch("c", "2008-06-20T00:00:00Z"),
      patch("d", "2008-06-20T08:00:00Z"), patch("e", "2008-06-21T08:00:00Z")};
  const Corpus c(patches, {}, fixtures::timeline("2008-06-16", "2008-08-31", {"2008-06-20"}));

  SUBCASE("day before the first landing is empty") { CHECK(patches_in_pool(c, parse_day("2008-06-16")).empty()); }
  SUBCASE("update day holds only that day's landings") {
    const auto pool = patches_in_pool(c, parse_day("2008-06-20"));
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].id == "c");
    CHECK(pool[1].id == "d");
  }
  SUBCASE("pool grows through the segment") {
    CHECK(patches_in_pool(c, parse_day("2008-06-19")).size() == 2);
    CHECK(patches_in_pool(c, parse_day("2008-06-21")).size() == 3);
  }
  SUBCASE("day outside the period") {
    CHECK_THROWS_AS(patches_in_pool(c, parse_day("2008-09-01")), DayOutOfRange);
    CHECK_THROWS_AS(labeled_training_set(c, parse_day("2008-06-15")), DayOutOfRange);
  }
}

TEST_CASE("pool of 39 patches a day reaches 117 on the third day") {
  std::vector<PatchRecord> patches;
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 39; ++i) {
      char ts[32];
      std::snprintf(ts, sizeof ts, "2008-07-%02dT%02d:%02d:00Z", 1 + d, i / 2, (i % 2) * 30);
      patches.push_back(patch("d" + std::to_string(d) + "-" + std::to_string(i), ts));
    }
  const Corpus c(patches, {}, fixtures::timeline("2008-06-17", "2008-08-31", {"2008-07-01"}));
  CHECK(patches_in_pool(c, parse_day("2008-07-03")).size() == 117);
}

TEST_CASE("training labels follow disclosure") {
  // Landed day 10, disclosed day 40; updates on days 20 and 35 (day 0 = 2008-06-01).
  std::vector<PatchRecord> patches = {patch("old", "2008-06-02T00:00:00Z"), patch("sec", "2008-06-11T00:00:00Z")};
  std::vector<VulnerabilityLabel> labels = {security_label("sec", "2008-07-11T00:00:00Z")};
  const Corpus c(patches, labels, fixtures::timeline("2008-06-01", "2008-08-31", {"2008-06-21", "2008-07-06"}));

  CHECK(labeled_training_set(c, parse_day("2008-06-20")).empty());
  const auto day30 = labeled_training_set(c, parse_day("2008-07-01"));
  REQUIRE(day30.size() == 2);
  CHECK_FALSE(day30[1].second);
  const auto day41 = labeled_training_set(c, parse_day("2008-07-12"));
  REQUIRE(day41.size() == 2);
  CHECK(day41[1].first.id == "sec");
  CHECK(day41[1].second);
  // Disclosure at 00:00 of a day becomes visible the following day only.
  CHECK_FALSE(labeled_training_set(c, parse_day("2008-07-11"))[1].second);
}

TEST_CASE("pool and training set never overlap and pools grow within a segment") {
  SynthConfig cfg;
  cfg.days = 120;
  cfg.seed = 11;
  const Corpus c = generate(cfg);
  const ReleaseTimeline& tl = c.timeline();
  std::size_t previous = 0;
  for (Day d = tl.period_start; d <= tl.period_end; d += std::chrono::days{1}) {
    const auto pool = c.pool_indices(d);
    const auto train = c.training_indices(d);
    std::vector<std::size_t> a = pool, b = train;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    CHECK(both.empty());
    const bool reset = d == tl.period_start || std::binary_search(tl.security_updates.begin(),
                                                                  tl.security_updates.end(), d);
    if (!reset) CHECK(pool.size() >= previous);
    previous = pool.size();
  }
}

TEST_CASE("write and load round trip") {
  TempDir dir("roundtrip");
  SynthConfig cfg;
  cfg.days = 40;
  const Corpus c = generate(cfg);
  write_corpus(c, dir.path());
  const Corpus back = load_corpus(dir.path());
  CHECK(back == c);
  CHECK(corpus_digest(dir.path()) == corpus_digest(dir.path()));
  CHECK(corpus_digest(dir.path()).size() == 64);
}

TEST_CASE("firefox-scale corpus loads") {
  // 14,416 ordinary and 125 security patches with 12 security updates.
  std::vector<PatchRecord> patches;
  std::vector<VulnerabilityLabel> labels;
  const Day start = parse_day("2008-06-17");
  const int total = 14416 + 125;
  for (int i = 0; i < total; ++i) {
    const Timestamp t = start_of(start) + std::chrono::seconds{static_cast<std::int64_t>(i) * 1790};
    patches.push_back(patch("p" + std::to_string(i), format_timestamp(t)));
    if (i % 116 == 5 && labels.size() < 125)
      labels.push_back(security_label(patches.back().id, format_timestamp(t + std::chrono::hours{24 * 40})));
  }
  REQUIRE(labels.size() == 125);
  ReleaseTimeline tl;
  tl.period_start = start;
  tl.period_end = start + std::chrono::days{340};
  for (int u = 1; u <= 12; ++u) tl.security_updates.push_back(start + std::chrono::days{26 * u});
  TempDir dir("scale");
  write_corpus(Corpus(patches, labels, tl), dir.path());
  const Corpus back = load_corpus(dir.path());
  CHECK(back.size() == 14541);
  CHECK(back.security_count() == 125);
  CHECK(back.timeline().security_updates.size() == 12);
}

TEST_CASE("malformed records name the file, line and field") {
  TempDir dir("malformed");
  SynthConfig cfg;
  cfg.days = 10;
  write_corpus(generate(cfg), dir.path());
  std::ifstream in(dir.path() / "patches.jsonl");
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  in.close();
  const auto pos = second.find("\"author\"");
  REQUIRE(pos != std::string::npos);
  second.replace(pos, 8, "\"writer\"");
  write_text(dir.path() / "patches.jsonl", first + "\n" + second + "\n");
  try {
    load_corpus(dir.path());
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "author");
    CHECK(e.file().find("patches.jsonl") != std::string::npos);
  }
}

TEST_CASE("missing directory is an I/O error") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/patchleak/corpus"), IoError);
}
