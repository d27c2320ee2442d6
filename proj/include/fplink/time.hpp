#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "fplink/error.hpp"

namespace fplink {

inline constexpr std::int64_t kSecondsPerDay = 86400;

namespace detail {

// Howard Hinnant's civil-date algorithms; proleptic Gregorian, no time zones.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

}  // namespace detail

// Parses "YYYY-MM-DD HH:MM:SS" (UTC) into seconds since the Unix epoch.
inline std::int64_t parse_timestamp(std::string_view s) {
  int year = 0, month = 0, day = 0, hh = 0, mm = 0, ss = 0;
  char tail = 0;
  std::string buf(s);
  int got = std::sscanf(buf.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%c", &year, &month, &day, &hh,
                        &mm, &ss, &tail);
  if (got != 6 || s.size() != 19) throw Error("bad timestamp: \"" + buf + "\"");
  if (month < 1 || month > 12 || day < 1 || day > 31 || hh > 23 || mm > 59 || ss > 60) {
    throw Error("bad timestamp: \"" + buf + "\"");
  }
  return detail::days_from_civil(year, static_cast<unsigned>(month),
                                 static_cast<unsigned>(day)) *
             kSecondsPerDay +
         hh * 3600 + mm * 60 + ss;
}

inline std::string format_timestamp(std::int64_t t) {
  std::int64_t days = t / kSecondsPerDay;
  std::int64_t sec = t % kSecondsPerDay;
  if (sec < 0) {
    sec += kSecondsPerDay;
    days -= 1;
  }
  const auto cd = detail::civil_from_days(days);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld",
                static_cast<long long>(cd.year), cd.month, cd.day,
                static_cast<long long>(sec / 3600), static_cast<long long>((sec / 60) % 60),
                static_cast<long long>(sec % 60));
  return buf;
}

inline std::int64_t add_days(std::int64_t t, std::int64_t days) {
  return t + days * kSecondsPerDay;
}

}  // namespace fplink
