#pragma once

#include <cstdint>
#include <string>

namespace tollcast {

// Timestamps are timezone-naive local seconds counted from 1970-01-01 00:00:00.
// All data for one deployment lives in a single zone, so no DST handling.
using Timestamp = std::int64_t;

constexpr int kSecondsPerDay = 86'400;
constexpr int kMinutesPerDay = 1'440;

std::int64_t days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(std::int64_t days, int& year, unsigned& month, unsigned& day);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0,
                         int minute = 0, int second = 0);

/// Parses "YYYY-MM-DD HH:MM:SS". Throws std::invalid_argument on bad input.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp t);

/// Parses "YYYY-MM-DD" into a day number (days since 1970-01-01).
std::int64_t parse_date(const std::string& text);
std::string format_date(std::int64_t day_number);

inline std::int64_t day_number(Timestamp t) {
  // floor division; timestamps may predate the epoch in tests
  return (t >= 0) ? t / kSecondsPerDay : (t - kSecondsPerDay + 1) / kSecondsPerDay;
}

inline int seconds_into_day(Timestamp t) {
  return static_cast<int>(t - day_number(t) * kSecondsPerDay);
}

/// ISO day of week: 1 = Monday ... 7 = Sunday.
int day_of_week(std::int64_t day_number);

inline bool is_weekend_day(int dow) { return dow == 6 || dow == 7; }

}  // namespace tollcast
