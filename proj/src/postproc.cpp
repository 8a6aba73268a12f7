#include "mwp/postproc.hpp"

#include "mwp/error.hpp"

#include <cctype>

namespace mwp {

void NormalizationConfig::validate() const {
  if (decimal_places < 0) {
    throw Error(ErrorCode::InvalidArgument, "decimal_places must be >= 0");
  }
}

const char* to_string(RoundingMode mode) noexcept {
  switch (mode) {
    case RoundingMode::HalfAwayFromZero: return "half-away-from-zero";
    case RoundingMode::HalfEven: return "half-even";
  }
  return "?";
}

RoundingMode parse_rounding_mode(std::string_view name) {
  if (name == "half-away-from-zero") return RoundingMode::HalfAwayFromZero;
  if (name == "half-even") return RoundingMode::HalfEven;
  throw Error(ErrorCode::InvalidArgument, "unknown rounding mode '" + std::string(name) + "'");
}

AnswerValue AnswerValue::from(Rational value, const NormalizationConfig& config, bool approximate) {
  AnswerValue out;
  out.canonical = postproc::normalize_answer(value, config).canonical;
  out.value = std::move(value);
  out.approximate = approximate;
  return out;
}

namespace postproc {

NormalizedAnswer normalize_answer(const Rational& value, const NormalizationConfig& config) {
  config.validate();
  const auto places = static_cast<unsigned>(config.decimal_places);
  const BigInt scale = pow10(places);

  Rational scaled = value * scale;
  const bool negative = scaled < 0;
  const BigInt num = abs(numerator(scaled));
  const BigInt den = denominator(scaled);
  BigInt q = num / den;
  const BigInt twice_rem = 2 * (num % den);
  if (twice_rem > den) {
    ++q;
  } else if (twice_rem == den) {
    if (config.rounding == RoundingMode::HalfAwayFromZero || q % 2 == 1) ++q;
  }

  std::string digits = q.str();
  if (places > 0) {
    if (digits.size() <= places) {
      digits.insert(0, places + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - places, 1, '.');
    if (config.strip_trailing_zeros) {
      while (digits.back() == '0') digits.pop_back();
      if (digits.back() == '.') digits.pop_back();
    }
  }

  NormalizedAnswer out;
  const bool zero = q == 0;
  out.canonical = (negative && !zero) ? "-" + digits : digits;
  out.rounded = Rational(negative ? BigInt(-q) : q, scale);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

// Unsigned decimal: "12", "12.5", ".5".
bool parse_unsigned_decimal(std::string_view s, Rational& out) {
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (dot != std::string_view::npos) {
    if (!frac.empty() && !all_digits(frac)) return false;
    if (frac.empty()) return false;
    if (!whole.empty() && !all_digits(whole)) return false;
  } else if (!all_digits(whole)) {
    return false;
  }
  BigInt int_part = whole.empty() ? BigInt(0) : parse_digits(whole);
  Rational value(int_part);
  if (!frac.empty()) {
    value += Rational(parse_digits(frac), pow10(static_cast<unsigned>(frac.size())));
  }
  out = value;
  return true;
}

// "a/b" or a plain decimal, without sign.
bool parse_unsigned_quotient(std::string_view s, Rational& out) {
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return parse_unsigned_decimal(s, out);
  Rational a, b;
  if (!parse_unsigned_decimal(trim(s.substr(0, slash)), a)) return false;
  if (!parse_unsigned_decimal(trim(s.substr(slash + 1)), b)) return false;
  if (b == 0) return false;
  out = a / b;
  return true;
}

bool parse_unsigned_literal(std::string_view s, Rational& out) {
  if (s.empty()) return false;
  if (s.back() == '%') {
    Rational v;
    if (!parse_unsigned_literal(trim(s.substr(0, s.size() - 1)), v)) return false;
    out = v / 100;
    return true;
  }
  auto open = s.find('(');
  if (open != std::string_view::npos) {
    if (s.back() != ')') return false;
    std::string_view inner = trim(s.substr(open + 1, s.size() - open - 2));
    if (inner.find('/') == std::string_view::npos) return false;
    Rational frac;
    if (!parse_unsigned_quotient(inner, frac)) return false;
    std::string_view whole = trim(s.substr(0, open));
    if (whole.empty()) {
      out = frac;
      return true;
    }
    if (!all_digits(whole)) return false;
    out = Rational(parse_digits(whole)) + frac;
    return true;
  }
  return parse_unsigned_quotient(s, out);
}

}  // namespace

AnswerValue parse_answer_literal(std::string_view text, const NormalizationConfig& config) {
  std::string_view s = trim(text);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s = trim(s.substr(1));
  }
  Rational value;
  if (!parse_unsigned_literal(s, value)) {
    throw Error(ErrorCode::Format, "unparseable answer literal '" + std::string(text) + "'");
  }
  return AnswerValue::from(negative ? Rational(-value) : value, config);
}

bool answers_equal(const Rational& a, const Rational& b, double tolerance) {
  Rational bound = abs(b);
  if (bound < 1) bound = 1;
  return abs(a - b) <= exact_rational(tolerance) * bound;
}

bool answers_equal(const AnswerValue& a, const AnswerValue& b, double tolerance) {
  return answers_equal(a.value, b.value, tolerance);
}

}  // namespace postproc
}  // namespace mwp
