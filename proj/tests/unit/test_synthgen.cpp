#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "patchleak/errors.hpp"
#include "patchleak/synthgen.hpp"

using namespace patchleak;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("same seed, same bytes") {
  SynthConfig cfg;
  cfg.days = 60;
  fixtures::TempDir a("synth-a"), b("synth-b");
  write_corpus(generate(cfg), a.path());
  write_corpus(generate(cfg), b.path());
  for (const char* f : {"patches.jsonl", "labels.jsonl", "timeline.json", "bug_events.jsonl"})
    CHECK(slurp(a.path() / f) == slurp(b.path() / f));
  cfg.seed = 2;
  CHECK_FALSE(generate(cfg) == generate(SynthConfig{.days = 60}));
}

TEST_CASE("generated corpora load back and honour the timeline") {
  SynthConfig cfg;
  cfg.days = 100;
  cfg.update_every = 20;
  const Corpus c = generate(cfg);
  fixtures::TempDir dir("synth-load");
  write_corpus(c, dir.path());
  CHECK(load_corpus(dir.path()) == c);
  CHECK(c.timeline().security_updates.size() == 4);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Day d = day_of(c.patch(i).landed_at);
    CHECK(d >= c.timeline().period_start);
    CHECK(d <= c.timeline().period_end);
  }
  REQUIRE(c.bug_events());
}

TEST_CASE("security fraction and volume match the configuration") {
  SynthConfig cfg;
  cfg.days = 300;
  const Corpus c = generate(cfg);
  const double n = static_cast<double>(c.size());
  const double expected_n = cfg.days * cfg.daily_rate;
  CHECK(std::abs(n - expected_n) <= 3 * std::sqrt(expected_n));
  const double p = cfg.security_fraction;
  CHECK(std::abs(static_cast<double>(c.security_count()) - n * p) <= 3 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("author leak concentrates security fixes on a few developers") {
  SynthConfig cfg;
  cfg.days = 300;
  cfg.leaks = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  const Corpus c = generate(cfg);
  std::map<std::string, std::size_t> security_by_author;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.is_security(i)) security_by_author[c.patch(i).author]++;
  CHECK(security_by_author.size() <= static_cast<std::size_t>(cfg.n_security_authors));

  cfg.leaks = {};
  const Corpus null = generate(cfg);
  std::map<std::string, std::size_t> spread;
  for (std::size_t i = 0; i < null.size(); ++i)
    if (null.is_security(i)) spread[null.patch(i).author]++;
  CHECK(spread.size() > 20);
}

TEST_CASE("config json") {
  SynthConfig cfg;
  cfg.days = 77;
  cfg.leaks.time_of_day = 0.25;
  cfg.severity_mix = {1, 2, 3, 4};
  CHECK(synth_config_from_json(synth_config_to_json(cfg)) == cfg);
  CHECK(synth_config_from_json("{}") == SynthConfig{});
  CHECK(synth_config_from_json(R"({"leak_strengths": {"author": 0.9}})").leaks.top_dir == SynthConfig{}.leaks.top_dir);
  CHECK_THROWS_AS(synth_config_from_json(R"({"dayz": 3})"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json(R"({"leak_strengths": {"colour": 1}})"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json(R"({"days": "many"})"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json(R"({"days": 0})"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json(R"({"leak_strengths": {"author": 1.5}})"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json("[1,2]"), InvalidConfig);
  CHECK_THROWS_AS(synth_config_from_json("{"), InvalidConfig);
}
