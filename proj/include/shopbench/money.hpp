#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace shopbench {

/// Parses a non-negative or negative decimal literal ("12.5", "0.800", "-3")
/// into an integer scaled by 10^places. More fractional digits than `places`
/// is an error rather than a silent rounding.
std::int64_t parse_decimal(std::string_view text, int places);

/// Inverse of parse_decimal; always prints exactly `places` fractional digits.
std::string format_decimal(std::int64_t scaled, int places);

/// RMB amount in fen (hundredths). All stored amounts are integral fen.
struct Money {
  std::int64_t fen = 0;

  static constexpr Money from_fen(std::int64_t f) { return Money{f}; }
  static constexpr Money from_yuan(std::int64_t y) { return Money{y * 100}; }
  static Money parse(std::string_view text) { return Money{parse_decimal(text, 2)}; }

  /// Canonical storage rendering, two decimals: "12.50".
  std::string to_string() const { return format_decimal(fen, 2); }
  /// One decimal place, half-up: used for advance-shipping answers ("3.0").
  std::string one_decimal() const;
  /// Whole RMB, truncated toward zero: used for red-envelope amounts ("7").
  std::string whole_yuan() const { return std::to_string(fen / 100); }

  constexpr Money operator+(Money o) const { return Money{fen + o.fen}; }
  constexpr Money operator-(Money o) const { return Money{fen - o.fen}; }
  constexpr Money operator*(std::int64_t k) const { return Money{fen * k}; }
  constexpr auto operator<=>(const Money&) const = default;
};

}  // namespace shopbench
