#include "avianrisk/timeutil.hpp"

#include <array>
#include <cctype>
#include <cstdio>

namespace avianrisk::timeutil {
namespace {

// Howard Hinnant's branchless civil-date algorithms (public domain).
// Shift the epoch to 0000-03-01 so leap days fall at era boundaries.

constexpr std::int64_t kDaysPerEra = 146097;

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (const char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

std::optional<int> parse_int(std::string_view s) {
  if (!all_digits(s)) return std::nullopt;
  int v = 0;
  for (const char c : s) {
    if (v > 100000000) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> k = {31, 28, 31, 30, 31, 30,
                                            31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap_year(y)) return 29;
  return k[m - 1];
}

} // namespace

bool is_leap_year(int y) {
  return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = floor_div(y, 400);
  const int yoe = static_cast<int>(y - era * 400);
  const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * kDaysPerEra + doe - 719468;
}

void civil_from_days(std::int64_t days, int& y, int& m, int& d) {
  days += 719468;
  const std::int64_t era = floor_div(days, kDaysPerEra);
  const int doe = static_cast<int>(days - era * kDaysPerEra);
  const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = yoe + era * 400;
  const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

int weekday(std::int64_t days) {
  // 1970-01-01 was a Thursday.
  return static_cast<int>(floor_mod(days + 3, 7)) + 1;
}

int day_of_year(std::int64_t days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  return static_cast<int>(days - days_from_civil(y, 1, 1)) + 1;
}

IsoWeek iso_week(std::int64_t days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  const int doy = static_cast<int>(days - days_from_civil(y, 1, 1)) + 1;
  const int dow = weekday(days);
  // Week of the year's first Thursday is week 1.
  const auto weeks_in = [](int year) {
    const auto p = [](int yy) {
      return (yy + yy / 4 - yy / 100 + yy / 400) % 7;
    };
    return 52 + (p(year) == 4 || p(year - 1) == 3 ? 1 : 0);
  };
  int week = (doy - dow + 10) / 7;
  if (week < 1) return {y - 1, weeks_in(y - 1)};
  if (week > weeks_in(y)) return {y + 1, 1};
  return {y, week};
}

std::optional<std::int64_t> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto y = parse_int(s.substr(0, 4));
  const auto m = parse_int(s.substr(5, 2));
  const auto d = parse_int(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  if (*m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m))
    return std::nullopt;
  return days_from_civil(*y, *m, *d);
}

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  if (s.size() < 19) return std::nullopt;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  const auto days = parse_date(s.substr(0, 10));
  if (!days) return std::nullopt;
  if (s[13] != ':' || s[16] != ':') return std::nullopt;
  const auto hh = parse_int(s.substr(11, 2));
  const auto mm = parse_int(s.substr(14, 2));
  const auto ss = parse_int(s.substr(17, 2));
  if (!hh || !mm || !ss) return std::nullopt;
  if (*hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;
  const int sec = *ss == 60 ? 59 : *ss; // clamp leap seconds

  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest[0] == '.') {
    std::size_t i = 1;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i])))
      ++i;
    if (i == 1) return std::nullopt;
    rest = rest.substr(i);
  }

  std::int64_t offset = 0;
  if (!rest.empty()) {
    if (rest == "Z" || rest == "z") {
      // UTC
    } else if (rest[0] == '+' || rest[0] == '-') {
      const int sign = rest[0] == '+' ? 1 : -1;
      std::string_view z = rest.substr(1);
      std::optional<int> oh, om;
      if (z.size() == 5 && z[2] == ':') {
        oh = parse_int(z.substr(0, 2));
        om = parse_int(z.substr(3, 2));
      } else if (z.size() == 4) {
        oh = parse_int(z.substr(0, 2));
        om = parse_int(z.substr(2, 2));
      } else if (z.size() == 2) {
        oh = parse_int(z);
        om = 0;
      } else {
        return std::nullopt;
      }
      if (!oh || !om || *oh > 18 || *om > 59) return std::nullopt;
      offset = sign * (*oh * kSecsPerHour + *om * 60);
    } else {
      return std::nullopt;
    }
  }

  return *days * kSecsPerDay + *hh * kSecsPerHour + *mm * 60 + sec - offset;
}

std::string format_date(std::int64_t days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

std::string format_timestamp(std::int64_t secs) {
  const std::int64_t days = day_of_timestamp(secs);
  const int sod = second_of_day(secs);
  char buf[24];
  int y, m, d;
  civil_from_days(days, y, m, d);
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                sod / 3600, (sod / 60) % 60, sod % 60);
  return buf;
}

} // namespace avianrisk::timeutil
