#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace lsti {

inline constexpr int kMinutesPerDay = 1440;

/// Civil calendar date (proleptic Gregorian).
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  /// Days since 1970-01-01.
  std::int64_t to_days() const;
  static Date from_days(std::int64_t days);
  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;
  Date plus_days(std::int64_t n) const { return from_days(to_days() + n); }

  /// Parses "YYYY-MM-DD"; throws FormatError.
  static Date parse(std::string_view text);
  std::string to_string() const;
};

/// Absolute instant in whole minutes since the epoch.
using Instant = std::int64_t;

inline Instant make_instant(const Date& date, int minute_of_day) {
  return date.to_days() * kMinutesPerDay + minute_of_day;
}

inline Date instant_date(Instant t) {
  auto days = t >= 0 ? t / kMinutesPerDay : -((-t + kMinutesPerDay - 1) / kMinutesPerDay);
  return Date::from_days(days);
}

inline int instant_minute(Instant t) {
  auto m = t % kMinutesPerDay;
  return static_cast<int>(m < 0 ? m + kMinutesPerDay : m);
}

/// "HH:MM" for a minute-of-day value.
std::string format_clock(int minute_of_day);

}  // namespace lsti
