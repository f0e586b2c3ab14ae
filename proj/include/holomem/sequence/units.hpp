#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "holomem/constants.hpp"
#include "holomem/sequence/ast.hpp"

namespace holomem::seq {

enum class Unit { None, Pi, Rad, Deg, MilliTeslaPerMeter, TeslaPerMeter, Ns, Us, Ms, PhaseSymbol };

/// A literal reduced to SI (radians, T/m, seconds).
struct Quantity {
  Unit unit = Unit::None;
  double value = 0.0;

  bool is_angle() const { return unit == Unit::Pi || unit == Unit::Rad || unit == Unit::Deg; }
  bool is_phase() const { return unit == Unit::PhaseSymbol || unit == Unit::Deg; }
  bool is_gradient() const {
    return unit == Unit::MilliTeslaPerMeter || unit == Unit::TeslaPerMeter;
  }
  bool is_duration() const { return unit == Unit::Ns || unit == Unit::Us || unit == Unit::Ms; }
};

namespace detail {

// Length of the longest prefix of s that is a decimal real
// [+-]? (digits [. digits?] | . digits) ([eE] [+-]? digits)?
inline std::size_t real_prefix(std::string_view s, std::size_t& mantissa_end) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  }
  if (digits == 0) return 0;
  mantissa_end = i;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    const std::size_t exp_start = j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j > exp_start) i = j;
  }
  return i;
}

// Parses `real` and multiplies by 10^shift with a single rounding.
inline double scaled_decimal(std::string_view real, std::size_t mantissa_end, int shift,
                             SourceSpan at) {
  long long exponent = 0;
  if (mantissa_end < real.size()) {
    std::string_view e = real.substr(mantissa_end + 1);
    if (!e.empty() && e.front() == '+') e.remove_prefix(1);
    const auto [p, ec] = std::from_chars(e.data(), e.data() + e.size(), exponent);
    if (ec != std::errc() || p != e.data() + e.size() || std::llabs(exponent) > 100000)
      throw SequenceError(ErrorKind::Range, at, "exponent out of range");
  }
  std::string text(real.substr(0, mantissa_end));
  if (!text.empty() && text.front() == '+') text.erase(0, 1);
  text += "e" + std::to_string(exponent + shift);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc::result_out_of_range || !std::isfinite(v))
    throw SequenceError(ErrorKind::Range, at, "number out of range");
  if (ec != std::errc() || p != text.data() + text.size())
    throw SequenceError(ErrorKind::Syntax, at, "malformed number");
  return v;
}

}  // namespace detail

inline Quantity parse_quantity(std::string_view text, SourceSpan at) {
  if (text == "+x") return {Unit::PhaseSymbol, 0.0};
  if (text == "-x") return {Unit::PhaseSymbol, pi};
  if (text == "+y") return {Unit::PhaseSymbol, 0.5 * pi};
  if (text == "-y") return {Unit::PhaseSymbol, 1.5 * pi};

  std::size_t mantissa_end = 0;
  const std::size_t n = detail::real_prefix(text, mantissa_end);
  if (n == 0)
    throw SequenceError(ErrorKind::Syntax, at, "expected a number, got '" + std::string(text) + "'");
  const std::string_view real = text.substr(0, n);
  const std::string_view suffix = text.substr(n);

  struct Scale {
    std::string_view name;
    Unit unit;
    int shift;
  };
  static constexpr Scale decimal_units[] = {
      {"", Unit::None, 0},  {"rad", Unit::Rad, 0}, {"mT/m", Unit::MilliTeslaPerMeter, -3},
      {"T/m", Unit::TeslaPerMeter, 0}, {"ns", Unit::Ns, -9}, {"us", Unit::Us, -6},
      {"ms", Unit::Ms, -3}};
  for (const auto& u : decimal_units)
    if (suffix == u.name) return {u.unit, detail::scaled_decimal(real, mantissa_end, u.shift, at)};
  if (suffix == "pi")
    return {Unit::Pi, detail::scaled_decimal(real, mantissa_end, 0, at) * pi};
  if (suffix == "deg")
    return {Unit::Deg, detail::scaled_decimal(real, mantissa_end, 0, at) * (pi / 180.0)};
  throw SequenceError(ErrorKind::Unit, at, "unknown unit '" + std::string(suffix) + "'",
                      {"pi", "rad", "deg", "mT/m", "T/m", "ns", "us", "ms"});
}

}  // namespace holomem::seq
