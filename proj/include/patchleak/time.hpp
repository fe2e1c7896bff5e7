#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace patchleak {

// All timestamps are UTC; a "day" is a UTC calendar date.
using Timestamp = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

Timestamp parse_timestamp(std::string_view text);  // "YYYY-MM-DDTHH:MM:SSZ"
Day parse_day(std::string_view text);              // "YYYY-MM-DD"

std::string format_timestamp(Timestamp t);
std::string format_day(Day d);

inline Day day_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }
inline Timestamp start_of(Day d) { return Timestamp{d}; }
inline Timestamp end_of(Day d) { return Timestamp{d + std::chrono::days{1}}; }

inline std::int64_t days_between(Day from, Day to) { return (to - from).count(); }

// Seconds elapsed since 00:00 UTC of the landing day.
inline std::int64_t seconds_into_day(Timestamp t) { return (t - start_of(day_of(t))).count(); }

}  // namespace patchleak
