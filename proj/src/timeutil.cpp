#include "tollcast/timeutil.hpp"

#include <cstdio>
#include <stdexcept>

namespace tollcast {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, unsigned& month, unsigned& day) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  day = doy - (153 * mp + 2) / 5 + 1;
  month = mp + (mp < 10 ? 3 : -9);
  year = static_cast<int>(y + (month <= 2));
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour,
                         int minute, int second) {
  return days_from_civil(year, month, day) * kSecondsPerDay + hour * 3600 +
         minute * 60 + second;
}

Timestamp parse_timestamp(const std::string& text) {
  int y, h, mi, s;
  unsigned mo, d;
  char sep;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c%d:%d:%d", &y, &mo, &d, &sep, &h,
                  &mi, &s) != 7 ||
      (sep != ' ' && sep != 'T')) {
    throw std::invalid_argument("bad timestamp: " + text);
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || s < 0 || s > 60) {
    throw std::invalid_argument("timestamp out of range: " + text);
  }
  return make_timestamp(y, mo, d, h, mi, s);
}

std::string format_timestamp(Timestamp t) {
  int year, h, mi, s;
  unsigned month, day;
  civil_from_days(day_number(t), year, month, day);
  int sod = seconds_into_day(t);
  h = sod / 3600;
  mi = (sod % 3600) / 60;
  s = sod % 60;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", year, month,
                day, h, mi, s);
  return buf;
}

std::int64_t parse_date(const std::string& text) {
  int y;
  unsigned mo, d;
  if (std::sscanf(text.c_str(), "%d-%u-%u", &y, &mo, &d) != 3 || mo < 1 ||
      mo > 12 || d < 1 || d > 31) {
    throw std::invalid_argument("bad date: " + text);
  }
  return days_from_civil(y, mo, d);
}

std::string format_date(std::int64_t dn) {
  int year;
  unsigned month, day;
  civil_from_days(dn, year, month, day);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year, month, day);
  return buf;
}

int day_of_week(std::int64_t dn) {
  // 1970-01-01 was a Thursday (ISO 4).
  std::int64_t dow = (dn + 3) % 7;
  if (dow < 0) dow += 7;
  return static_cast<int>(dow) + 1;
}

}  // namespace tollcast
