#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace shopbench {

/// Calendar datetime with minute precision, stored as minutes since
/// 1970-01-01 00:00 (no time zone; the environment has a single clock).
struct Timestamp {
  std::int64_t minutes = 0;

  static constexpr Timestamp from_civil(int y, unsigned mo, unsigned d, int h = 0, int mi = 0) {
    namespace c = std::chrono;
    const c::sys_days date = c::year{y} / c::month{mo} / c::day{d};
    return Timestamp{static_cast<std::int64_t>(date.time_since_epoch().count()) * 1440 + h * 60 + mi};
  }

  /// "YYYY-MM-DD HH:MM"; throws std::invalid_argument on anything else.
  static Timestamp parse(std::string_view text);
  std::string to_string() const;

  constexpr Timestamp plus_hours(std::int64_t h) const { return Timestamp{minutes + h * 60}; }
  constexpr Timestamp truncated_to_hour() const {
    std::int64_t m = minutes - (((minutes % 60) + 60) % 60);
    return Timestamp{m};
  }

  int year() const;
  unsigned month() const;
  unsigned day() const;
  int hour() const { return static_cast<int>(((minutes % 1440) + 1440) % 1440 / 60); }
  int minute() const { return static_cast<int>(((minutes % 60) + 60) % 60); }

  constexpr auto operator<=>(const Timestamp&) const = default;
};

/// The environment clock. Never wall-clock time.
inline constexpr Timestamp kSystemNow = Timestamp::from_civil(2025, 6, 12, 0, 0);

inline constexpr std::int64_t kMinutesPerDay = 1440;

}  // namespace shopbench
