#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace mwp {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

BigInt pow10(unsigned exponent);

// Exact textual form: a terminating decimal when the denominator only has the
// prime factors 2 and 5 ("0.9", "-12.125"), otherwise "n/d". Parses back to
// the identical value with parse_answer_literal.
std::string to_exact_literal(const Rational& r);

// Value of the shortest decimal string that round-trips the double, so 23.9
// becomes 239/10 rather than its binary expansion.
Rational rational_from_double(double d);

// Exact value of the double's binary representation.
Rational exact_rational(double d);

// Unsigned decimal digits to an integer; the input must be all ASCII digits.
BigInt parse_digits(std::string_view digits);

}  // namespace mwp
