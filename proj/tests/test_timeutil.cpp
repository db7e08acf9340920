#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "avianrisk/timeutil.hpp"

using namespace avianrisk::timeutil;

TEST_CASE("civil conversion round-trips across four centuries") {
  // Walk every day of a 400-year Gregorian cycle by stepping the serial and
  // re-deriving the calendar date. Catches all leap-rule branches.
  int y = 0, m = 0, d = 0;
  const std::int64_t start = days_from_civil(1900, 1, 1);
  const std::int64_t end = days_from_civil(2300, 1, 1);
  int prev_doy = 0;
  for (std::int64_t day = start; day < end; ++day) {
    civil_from_days(day, y, m, d);
    CHECK(days_from_civil(y, m, d) == day);
    const int doy = day_of_year(day);
    if (m == 1 && d == 1) {
      CHECK(doy == 1);
    } else {
      CHECK(doy == prev_doy + 1);
    }
    prev_doy = doy;
  }
}

TEST_CASE("known anchors") {
  CHECK(days_from_civil(1970, 1, 1) == 0);
  CHECK(days_from_civil(2000, 3, 1) == 11017);
  CHECK(weekday(0) == 4);                          // 1970-01-01 was a Thursday
  CHECK(weekday(days_from_civil(2024, 1, 1)) == 1); // a Monday
  CHECK(is_leap_year(2000));
  CHECK(!is_leap_year(1900));
  CHECK(is_leap_year(2024));
  CHECK(!is_leap_year(2023));
  CHECK(day_of_year(days_from_civil(2024, 12, 31)) == 366);
  CHECK(day_of_year(days_from_civil(2023, 12, 31)) == 365);
}

TEST_CASE("iso week matches published edge cases") {
  // Year-boundary oddities: early January belonging to the previous ISO
  // year, late December belonging to the next, and week-53 years.
  struct Case { int y, m, d, iso_year, iso_week; };
  const Case cases[] = {
      {2005, 1, 1, 2004, 53}, {2005, 1, 2, 2004, 53}, {2005, 12, 31, 2005, 52},
      {2007, 1, 1, 2007, 1},  {2007, 12, 30, 2007, 52}, {2007, 12, 31, 2008, 1},
      {2008, 1, 1, 2008, 1},  {2008, 12, 28, 2008, 52}, {2008, 12, 29, 2009, 1},
      {2009, 12, 31, 2009, 53}, {2010, 1, 1, 2009, 53}, {2010, 1, 3, 2009, 53},
      {2010, 1, 4, 2010, 1},  {2020, 12, 31, 2020, 53}, {2021, 1, 1, 2020, 53},
      {2021, 1, 4, 2021, 1},  {2024, 2, 29, 2024, 9},
  };
  for (const auto& c : cases) {
    const auto w = iso_week(days_from_civil(c.y, c.m, c.d));
    CHECK(w.year == c.iso_year);
    CHECK(w.week == c.iso_week);
  }
}

TEST_CASE("iso week is self-consistent over a long span") {
  // Week number changes exactly at Mondays, and every ISO year has 52 or 53
  // whole weeks.
  const std::int64_t start = days_from_civil(1995, 1, 1);
  const std::int64_t end = days_from_civil(2035, 1, 1);
  for (std::int64_t day = start; day < end; ++day) {
    const auto a = iso_week(day);
    const auto b = iso_week(day + 1);
    if (weekday(day + 1) == 1) {
      CHECK((b.week == a.week + 1 || b.week == 1));
      if (b.week == 1) CHECK(b.year == a.year + 1);
    } else {
      CHECK(a.year == b.year);
      CHECK(a.week == b.week);
    }
    CHECK(a.week >= 1);
    CHECK(a.week <= 53);
  }
}

TEST_CASE("date parsing") {
  CHECK(parse_date("1970-01-01") == 0);
  CHECK(parse_date("2021-02-28") == days_from_civil(2021, 2, 28));
  CHECK(!parse_date("2021-02-29").has_value()); // not a leap year
  CHECK(parse_date("2020-02-29") == days_from_civil(2020, 2, 29));
  CHECK(!parse_date("2021-13-01").has_value());
  CHECK(!parse_date("2021-00-10").has_value());
  CHECK(!parse_date("2021-01-32").has_value());
  CHECK(!parse_date("2021-1-02").has_value());
  CHECK(!parse_date("21-01-02").has_value());
  CHECK(!parse_date("2021/01/02").has_value());
  CHECK(!parse_date("").has_value());
  CHECK(!parse_date("2021-01-02x").has_value());
}

TEST_CASE("timestamp parsing normalizes zones to UTC") {
  const auto base = parse_timestamp("2021-06-01T12:30:45Z");
  REQUIRE(base.has_value());
  CHECK(*base == days_from_civil(2021, 6, 1) * kSecsPerDay + 12 * 3600 +
                     30 * 60 + 45);
  CHECK(parse_timestamp("2021-06-01T12:30:45") == base);
  CHECK(parse_timestamp("2021-06-01 12:30:45Z") == base);
  CHECK(parse_timestamp("2021-06-01T12:30:45.750Z") == base);
  CHECK(parse_timestamp("2021-06-01T14:30:45+02:00") == base);
  CHECK(parse_timestamp("2021-06-01T14:30:45+0200") == base);
  CHECK(parse_timestamp("2021-06-01T14:30:45+02") == base);
  CHECK(parse_timestamp("2021-06-01T07:00:45-05:30") == base);
  CHECK(parse_timestamp("2021-06-01T00:00:45-12:30") == base);
  CHECK(!parse_timestamp("2021-06-01T24:00:00Z").has_value());
  CHECK(!parse_timestamp("2021-06-01T12:60:00Z").has_value());
  CHECK(!parse_timestamp("2021-06-01T12:00:61Z").has_value());
  CHECK(!parse_timestamp("2021-06-01").has_value());
  CHECK(!parse_timestamp("garbage").has_value());
}

TEST_CASE("formatting round-trips") {
  for (const std::int64_t day : {std::int64_t(0), days_from_civil(1999, 12, 31),
                                 days_from_civil(2024, 2, 29),
                                 days_from_civil(2100, 6, 15)}) {
    CHECK(parse_date(format_date(day)) == day);
  }
  const std::int64_t t = days_from_civil(2022, 11, 5) * kSecsPerDay + 81234;
  CHECK(format_timestamp(t) == "2022-11-05T22:33:54Z");
  CHECK(parse_timestamp(format_timestamp(t)) == t);
}

TEST_CASE("floored division helpers") {
  CHECK(floor_div(7, 2) == 3);
  CHECK(floor_div(-7, 2) == -4);
  CHECK(floor_div(-4, 2) == -2);
  CHECK(floor_mod(-7, 2) == 1);
  CHECK(floor_mod(7, 2) == 1);
  CHECK(day_of_timestamp(-1) == -1);
  CHECK(second_of_day(-1) == 86399);
}
