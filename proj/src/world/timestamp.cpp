#include "shopbench/timestamp.hpp"

#include <cstdio>
#include <stdexcept>

namespace shopbench {

namespace {

std::chrono::year_month_day civil(const Timestamp& t) {
  using namespace std::chrono;
  std::int64_t days = t.minutes / kMinutesPerDay;
  if (t.minutes % kMinutesPerDay < 0) --days;
  return year_month_day{sys_days{std::chrono::days{days}}};
}

int two_digits(std::string_view s, std::size_t pos) {
  const char a = s[pos], b = s[pos + 1];
  if (a < '0' || a > '9' || b < '0' || b > '9') throw std::invalid_argument("bad timestamp: " + std::string(s));
  return (a - '0') * 10 + (b - '0');
}

}  // namespace

Timestamp Timestamp::parse(std::string_view s) {
  if (s.size() != 16 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':')
    throw std::invalid_argument("bad timestamp: " + std::string(s));
  const int y = two_digits(s, 0) * 100 + two_digits(s, 2);
  const int mo = two_digits(s, 5), d = two_digits(s, 8), h = two_digits(s, 11), mi = two_digits(s, 14);
  namespace c = std::chrono;
  const c::year_month_day ymd{c::year{y}, c::month{static_cast<unsigned>(mo)}, c::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59) throw std::invalid_argument("bad timestamp: " + std::string(s));
  return from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi);
}

std::string Timestamp::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d", year(), month(), day(), hour(), minute());
  return buf;
}

int Timestamp::year() const { return static_cast<int>(civil(*this).year()); }
unsigned Timestamp::month() const { return static_cast<unsigned>(civil(*this).month()); }
unsigned Timestamp::day() const { return static_cast<unsigned>(civil(*this).day()); }

}  // namespace shopbench
