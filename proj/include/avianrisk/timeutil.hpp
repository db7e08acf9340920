#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Calendar and timestamp helpers. Instants are seconds since the Unix epoch
// (UTC); dates are whole days since 1970-01-01, proleptic Gregorian.

namespace avianrisk::timeutil {

constexpr std::int64_t kSecsPerDay = 86400;
constexpr std::int64_t kSecsPerHour = 3600;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a % b < 0) != (b < 0)));
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t days, int& y, int& m, int& d);

bool is_leap_year(int y);

// Monday = 1 .. Sunday = 7.
int weekday(std::int64_t days);

// 1-based ordinal day within the calendar year.
int day_of_year(std::int64_t days);

struct IsoWeek {
  int year;
  int week; // 1..53
};

IsoWeek iso_week(std::int64_t days);

// "YYYY-MM-DD" only.
std::optional<std::int64_t> parse_date(std::string_view s);

// "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds (truncated) and an
// optional zone suffix: "Z", "+HH:MM", "+HHMM", or "+HH". A space may stand in
// for the 'T'. No suffix means UTC. Result is normalized to UTC seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view s);

std::string format_date(std::int64_t days);
std::string format_timestamp(std::int64_t secs); // "YYYY-MM-DDTHH:MM:SSZ"

inline std::int64_t day_of_timestamp(std::int64_t secs) {
  return floor_div(secs, kSecsPerDay);
}

inline int second_of_day(std::int64_t secs) {
  return static_cast<int>(floor_mod(secs, kSecsPerDay));
}

} // namespace avianrisk::timeutil
