#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "perflod/errors.hpp"

namespace perflod {

/// Parses "2^-p", "2^p" or a plain decimal number.
inline double parse_length(const std::string& text) {
  std::string s;
  for (char c : text)
    if (c != ' ') s.push_back(c);
  if (s.empty()) throw ConfigError("empty length value");

  const auto caret = s.find('^');
  if (caret != std::string::npos) {
    const std::string base = s.substr(0, caret);
    const std::string expo = s.substr(caret + 1);
    char* end = nullptr;
    const double b = std::strtod(base.c_str(), &end);
    if (end == base.c_str() || *end != '\0') throw ConfigError("malformed length '" + text + "'");
    const long e = std::strtol(expo.c_str(), &end, 10);
    if (end == expo.c_str() || *end != '\0') throw ConfigError("malformed length '" + text + "'");
    return std::pow(b, static_cast<double>(e));
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("malformed length '" + text + "'");
  return v;
}

/// Returns p such that value == 2^-p exactly, or throws.
inline int dyadic_exponent(double value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ConfigError("length must be a positive power of two, got " + std::to_string(value));
  int exp = 0;
  const double mant = std::frexp(value, &exp);
  if (mant != 0.5) throw ConfigError("length is not a power of two: " + std::to_string(value));
  return 1 - exp;
}

inline bool is_dyadic(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) return false;
  int exp = 0;
  return std::frexp(value, &exp) == 0.5;
}

/// Formats a dyadic length as "2^-p" and anything else as a short decimal.
inline std::string format_length(double value) {
  if (is_dyadic(value)) return "2^" + std::to_string(-dyadic_exponent(value));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

} // namespace perflod
