#include "shopbench/money.hpp"

#include <charconv>
#include <stdexcept>

namespace shopbench {

std::int64_t parse_decimal(std::string_view text, int places) {
  const std::string original(text);
  if (text.empty()) throw std::invalid_argument("empty decimal");
  bool negative = false;
  if (text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() || (dot != std::string_view::npos && frac.empty()))
    throw std::invalid_argument("malformed decimal: " + original);
  if (static_cast<int>(frac.size()) > places)
    throw std::invalid_argument("too many fractional digits: " + original);

  auto digits = [&](std::string_view s) {
    std::int64_t v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw std::invalid_argument("malformed decimal: " + original);
      if (v > (INT64_MAX - 9) / 10) throw std::invalid_argument("decimal out of range: " + original);
      v = v * 10 + (c - '0');
    }
    return v;
  };

  std::int64_t scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  std::int64_t frac_value = digits(frac);
  for (auto i = frac.size(); i < static_cast<std::size_t>(places); ++i) frac_value *= 10;
  const std::int64_t value = digits(whole) * scale + frac_value;
  return negative ? -value : value;
}

std::string format_decimal(std::int64_t scaled, int places) {
  std::int64_t scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  const bool negative = scaled < 0;
  const std::uint64_t mag = negative ? 0ULL - static_cast<std::uint64_t>(scaled) : static_cast<std::uint64_t>(scaled);
  std::string out = negative ? "-" : "";
  out += std::to_string(mag / static_cast<std::uint64_t>(scale));
  if (places > 0) {
    std::string frac = std::to_string(mag % static_cast<std::uint64_t>(scale));
    out += '.';
    out.append(static_cast<std::size_t>(places) - frac.size(), '0');
    out += frac;
  }
  return out;
}

std::string Money::one_decimal() const {
  // half away from zero at the fen->jiao boundary
  const std::int64_t jiao = fen >= 0 ? (fen + 5) / 10 : -((-fen + 5) / 10);
  return format_decimal(jiao, 1);
}

}  // namespace shopbench
