#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "patchleak/corpus.hpp"
#include "patchleak/time.hpp"

namespace fixtures {

using namespace patchleak;

inline PatchRecord patch(std::string id, const std::string& landed, std::string author = "dev",
                         std::vector<std::string> files = {"dom/a.cpp"}, std::int64_t chars = 400,
                         std::int64_t lines = 20) {
  PatchRecord p;
  p.id = std::move(id);
  p.landed_at = parse_timestamp(landed);
  p.author = std::move(author);
  p.description = "Bug 100000 - change, r=reviewer";
  p.diff_files = static_cast<std::int64_t>(files.size());
  p.files = std::move(files);
  p.diff_chars = chars;
  p.diff_lines = lines;
  p.avg_file_size = 1000.0;
  return p;
}

inline VulnerabilityLabel security_label(std::string id, const std::string& disclosed,
                                         Severity severity = Severity::high) {
  return {std::move(id), true, parse_timestamp(disclosed), severity};
}

inline ReleaseTimeline timeline(const std::string& start, const std::string& end,
                                const std::vector<std::string>& updates) {
  ReleaseTimeline t;
  t.period_start = parse_day(start);
  t.period_end = parse_day(end);
  for (const std::string& u : updates) t.security_updates.push_back(parse_day(u));
  return t;
}

// Fresh scratch directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("patchleak-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
