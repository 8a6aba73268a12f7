#pragma once

#include "mwp/rational.hpp"

#include <string>
#include <string_view>

namespace mwp {

inline constexpr double kDefaultTolerance = 1e-4;

enum class RoundingMode { HalfAwayFromZero, HalfEven };

struct NormalizationConfig {
  int decimal_places = 2;
  bool strip_trailing_zeros = true;
  RoundingMode rounding = RoundingMode::HalfAwayFromZero;

  void validate() const;
};

const char* to_string(RoundingMode mode) noexcept;
RoundingMode parse_rounding_mode(std::string_view name);

// An exact answer together with its display form. `approximate` marks values
// that went through floating point (non-integer exponents).
struct AnswerValue {
  Rational value;
  std::string canonical;
  bool approximate = false;

  static AnswerValue from(Rational value, const NormalizationConfig& config = {},
                          bool approximate = false);

  friend bool operator==(const AnswerValue& a, const AnswerValue& b) {
    return a.value == b.value && a.approximate == b.approximate;
  }
};

namespace postproc {

struct NormalizedAnswer {
  std::string canonical;
  Rational rounded;
};

// Round to config.decimal_places, then drop trailing zeros and a bare
// trailing point. Negative zero prints as "0".
NormalizedAnswer normalize_answer(const Rational& value, const NormalizationConfig& config = {});

// Accepts integers, decimals, "20%", "3/4", "(3/4)" and Math23K mixed numbers
// such as "1(1/2)". Throws Error(Format) for anything else.
AnswerValue parse_answer_literal(std::string_view text, const NormalizationConfig& config = {});

// |a - b| <= tolerance * max(1, |b|), evaluated exactly.
bool answers_equal(const Rational& a, const Rational& b, double tolerance = kDefaultTolerance);
bool answers_equal(const AnswerValue& a, const AnswerValue& b,
                   double tolerance = kDefaultTolerance);

}  // namespace postproc
}  // namespace mwp
