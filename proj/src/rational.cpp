#include "mwp/rational.hpp"

#include "mwp/error.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace mwp {

BigInt pow10(unsigned exponent) {
  return boost::multiprecision::pow(BigInt(10), exponent);
}

std::string to_exact_literal(const Rational& r) {
  BigInt num = numerator(r);
  BigInt den = denominator(r);
  BigInt rest = den;
  unsigned twos = 0, fives = 0;
  while (rest % 2 == 0) { rest /= 2; ++twos; }
  while (rest % 5 == 0) { rest /= 5; ++fives; }
  if (rest != 1) {
    return num.str() + "/" + den.str();
  }
  unsigned places = std::max(twos, fives);
  bool negative = num < 0;
  BigInt scaled = abs(num) * (pow10(places) / den);
  std::string digits = scaled.str();
  if (places > 0) {
    if (digits.size() <= places) {
      digits.insert(0, places + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - places, 1, '.');
  }
  return negative ? "-" + digits : digits;
}

BigInt parse_digits(std::string_view digits) {
  BigInt out = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::Format, "not a digit string: '" + std::string(digits) + "'");
    }
    out = out * 10 + (c - '0');
  }
  return out;
}

Rational exact_rational(double d) {
  if (!std::isfinite(d)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite value has no rational form");
  }
  return Rational(d);
}

Rational rational_from_double(double d) {
  if (!std::isfinite(d)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite value has no rational form");
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::scientific);
  if (res.ec != std::errc{}) {
    throw Error(ErrorCode::Internal, "to_chars failed");
  }
  std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  bool negative = false;
  if (!text.empty() && text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  auto e = text.find('e');
  std::string_view mantissa = text.substr(0, e);
  int exponent = std::stoi(std::string(text.substr(e + 1)));
  std::string digits;
  int frac_digits = 0;
  for (std::size_t i = 0; i < mantissa.size(); ++i) {
    if (mantissa[i] == '.') {
      frac_digits = static_cast<int>(mantissa.size() - i - 1);
    } else {
      digits.push_back(mantissa[i]);
    }
  }
  int scale = exponent - frac_digits;
  Rational value(parse_digits(digits));
  if (scale >= 0) {
    value *= pow10(static_cast<unsigned>(scale));
  } else {
    value /= pow10(static_cast<unsigned>(-scale));
  }
  return negative ? Rational(-value) : value;
}

}  // namespace mwp
