#include "patchleak/time.hpp"

#include <charconv>
#include <cstdio>

#include "patchleak/errors.hpp"

namespace patchleak {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t width, std::string_view whole) {
  if (pos + width > text.size()) throw ParseError("truncated time value '" + std::string(whole) + "'");
  int value = 0;
  const char* first = text.data() + pos;
  const char* last = first + width;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ParseError("bad time value '" + std::string(whole) + "'");
  return value;
}

void expect(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) throw ParseError("bad time value '" + std::string(whole) + "'");
}

Day checked_day(int y, int m, int d, std::string_view whole) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ParseError("invalid calendar date '" + std::string(whole) + "'");
  return Day{ymd};
}

}  // namespace

Day parse_day(std::string_view text) {
  if (text.size() != 10) throw ParseError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  const int y = read_int(text, 0, 4, text);
  expect(text, 4, '-', text);
  const int m = read_int(text, 5, 2, text);
  expect(text, 7, '-', text);
  const int d = read_int(text, 8, 2, text);
  return checked_day(y, m, d, text);
}

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() != 20) throw ParseError("expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(text) + "'");
  const Day day = parse_day(text.substr(0, 10));
  expect(text, 10, 'T', text);
  const int hh = read_int(text, 11, 2, text);
  expect(text, 13, ':', text);
  const int mm = read_int(text, 14, 2, text);
  expect(text, 16, ':', text);
  const int ss = read_int(text, 17, 2, text);
  expect(text, 19, 'Z', text);
  if (hh > 23 || mm > 59 || ss > 59) throw ParseError("time of day out of range in '" + std::string(text) + "'");
  return start_of(day) + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

std::string format_day(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const Day d = day_of(t);
  const std::int64_t secs = (t - start_of(d)).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60));
  return format_day(d) + buf;
}

}  // namespace patchleak
