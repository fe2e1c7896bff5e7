#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace patchleak {

// RFC 4180 field: quoted when it contains a comma, quote, CR or LF; quotes doubled.
std::string csv_field(std::string_view text);
// Nine significant digits, enough for bit-stable golden files without noise digits.
std::string format_real(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

// Parses RFC 4180 text into rows of fields. The header, if any, is the first row.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace patchleak
