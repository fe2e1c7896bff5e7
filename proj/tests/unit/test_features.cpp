#include "doctest.h"
#include "fixtures.hpp"
#include "patchleak/errors.hpp"
#include "patchleak/features.hpp"

using namespace patchleak;
using fixtures::patch;

TEST_CASE("majority directory and extension") {
  CHECK(describe(patch("x", "2008-07-01T00:00:00Z", "a", {"a/x.cpp", "a/y.h", "b/z.cpp"})).top_dir == "a");
  CHECK(describe(patch("x", "2008-07-01T00:00:00Z", "a", {"a/x.cpp", "b/y.cpp"})).top_dir == "a");
  CHECK(describe(patch("x", "2008-07-01T00:00:00Z", "a", {"b/x.cpp", "a/y.cpp"})).top_dir == "a");
  CHECK(describe(patch("x", "2008-07-01T00:00:00Z", "a", {"a/x.cpp", "b/x.cpp", "c/y.idl"})).file_type == ".cpp");
  CHECK(top_level_directory("Makefile.in") == "(root)");
  CHECK(file_extension("dom/Makefile") == "(none)");
  CHECK(file_extension("dom/.hidden") == "(none)");
  CHECK(file_extension("a.b/c.tar.gz") == ".gz");
}

TEST_CASE("time of day and weekday come from the landing timestamp") {
  const PatchAttributes a = describe(patch("x", "2008-07-01T03:15:20Z"));  // a Tuesday
  CHECK(a.continuous[4] == doctest::Approx(3 * 3600 + 15 * 60 + 20));
  CHECK(a.day_of_week == 2);
  CHECK(weekday_name(a.day_of_week) == "Tue");
}

TEST_CASE("schema layout") {
  std::vector<PatchRecord> training = {patch("1", "2008-07-01T00:00:00Z", "a"),
                                       patch("2", "2008-07-02T00:00:00Z", "b", {"gfx/x.c"})};
  const FeatureSchema s = build_schema(std::span<const PatchRecord>(training));
  CHECK(s.authors == std::vector<std::string>{"a", "b"});
  CHECK(s.top_dirs == std::vector<std::string>{"dom", "gfx"});
  CHECK(s.dimension() == 2 + 2 + 2 + 5 + 7);

  const FeatureSchema no_author = build_schema(std::span<const PatchRecord>(training), FeatureMask::all().without(Feature::author));
  CHECK(no_author.authors.empty());
  CHECK(no_author.dimension() == s.dimension() - 2);
  CHECK_THROWS_AS(build_schema(std::span<const PatchRecord>()), EmptyTrainingSet);
}

TEST_CASE("author block width equals the number of distinct authors") {
  std::vector<PatchRecord> training;
  for (int i = 0; i < 516; ++i) training.push_back(patch("p" + std::to_string(i), "2008-07-01T00:00:00Z", "dev" + std::to_string(i)));
  training.push_back(patch("dup", "2008-07-01T00:00:00Z", "dev7"));
  const FeatureSchema full = build_schema(std::span<const PatchRecord>(training));
  CHECK(full.authors.size() == 516);
}

TEST_CASE("one-hot blocks and scaling") {
  std::vector<PatchRecord> training = {patch("1", "2008-07-01T00:00:00Z", "a", {"dom/x.cpp"}, 100, 10),
                                       patch("2", "2008-07-02T12:00:00Z", "b", {"gfx/x.h"}, 300, 30)};
  const FeatureSchema s = build_schema(std::span<const PatchRecord>(training));
  const FeatureVector v = extract(s, training[1]);
  REQUIRE(v.size() == s.dimension());
  // author block [a b], dir [dom gfx], type [.cpp .h]
  CHECK(v.values[0] == 0.0);
  CHECK(v.values[1] == 1.0);
  CHECK(v.values[3] == 1.0);
  CHECK(v.values[5] == 1.0);
  CHECK(v.values[6] == 1.0);  // diff_chars at the training maximum

  SUBCASE("unseen categories encode as zeros and values clamp") {
    const FeatureVector u = extract(s, patch("3", "2008-07-03T00:00:00Z", "zed", {"js/q.py"}, 5000, 40));
    CHECK(u.values[0] + u.values[1] == 0.0);
    CHECK(u.values[2] + u.values[3] == 0.0);
    CHECK(u.values[4] + u.values[5] == 0.0);
    CHECK(u.values[6] == 1.0);
  }
  SUBCASE("deterministic") { CHECK(extract(s, training[0]) == extract(s, training[0])); }
  SUBCASE("every one-hot block holds at most one 1 and values stay in [0,1]") {
    for (const PatchRecord& p : training) {
      const FeatureVector x = extract(s, p);
      for (double value : x.values) CHECK((value >= 0.0 && value <= 1.0));
      CHECK(x.values[0] + x.values[1] == 1.0);
      double week = 0.0;
      for (std::size_t i = x.size() - 7; i < x.size(); ++i) week += x.values[i];
      CHECK(week == 1.0);
    }
  }
}

TEST_CASE("ablation groups") {
  CHECK(ablation_group("author") == std::vector<Feature>{Feature::author});
  CHECK(ablation_group("diff_size").size() == 4);
  CHECK(ablation_group("time_of_day") == std::vector<Feature>{Feature::time_of_day});
  CHECK_THROWS_AS(ablation_group("diff_chars"), InvalidConfig);
  CHECK_THROWS_AS(ablation_group("colour"), InvalidConfig);
  CHECK(parse_feature("top_dir") == Feature::top_dir);
  CHECK_FALSE(parse_feature("nope").has_value());
}
