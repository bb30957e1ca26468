#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

namespace evsens::fmt {

/// Fixed-point rendering with a given number of decimals. Negative zero is
/// printed as zero so that reports stay byte-stable.
inline std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf);
  if (out.front() == '-' &&
      out.find_first_not_of("-0.") == std::string::npos) {
    out.erase(0, 1);
  }
  return out;
}

/// Shortest decimal text that round-trips to the same double.
inline std::string shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

/// Number of decimals in the shortest representation of `value`
/// (0.94 -> 2, 2.132 -> 3, 2.0 -> 0).
inline int decimals_of(double value) {
  const std::string text = shortest(value);
  if (text.find_first_of("eE") != std::string::npos) return 3;
  const auto dot = text.find('.');
  return dot == std::string::npos ? 0 : static_cast<int>(text.size() - dot - 1);
}

/// E-value display precision: two decimals when the input ratio was given
/// to at most two, otherwise three.
inline int evalue_display_decimals(double input_value) {
  return decimals_of(input_value) <= 2 ? 2 : 3;
}

/// Strict decimal parse of the whole string; no locale, no trailing junk.
inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace evsens::fmt
