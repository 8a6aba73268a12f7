#pragma once

#include "mwp/postproc.hpp"
#include "mwp/rational.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mwp::eqtree {

enum class Operator { Add, Sub, Mul, Div, Pow };

char symbol(Operator op) noexcept;
std::optional<Operator> operator_from_symbol(std::string_view s) noexcept;

struct EqToken {
  enum class Kind { Operator, Number, PercentNumber, OpenParen, CloseParen };

  Kind kind;
  Operator op = Operator::Add;  // Kind::Operator only
  Rational value;               // Number / PercentNumber; percent already divided by 100
  std::string surface;
};

// "x = <expr>" or "x=<expr>" to tokens. Recognizes + - * / ^ × ÷, parentheses
// and square brackets, decimals, a trailing % and a minus sign directly in
// front of a literal.
std::vector<EqToken> tokenize_equation(std::string_view text);

// Same, for an expression without the "x =" prefix.
std::vector<EqToken> tokenize_expression(std::string_view expr);

// Immutable binary expression tree. Subtrees are shared, so copies are cheap.
class EquationTree {
 public:
  explicit EquationTree(Rational leaf);
  EquationTree(Operator op, EquationTree left, EquationTree right);

  bool is_leaf() const noexcept { return std::holds_alternative<Rational>(node_); }
  const Rational& number() const;
  Operator op() const;
  const EquationTree& left() const;
  const EquationTree& right() const;

  std::size_t leaf_count() const;
  std::size_t internal_count() const;

  friend bool operator==(const EquationTree& a, const EquationTree& b);

 private:
  struct Branch {
    Operator op;
    std::shared_ptr<const EquationTree> left;
    std::shared_ptr<const EquationTree> right;
  };
  std::variant<Rational, Branch> node_;
};

// S-expression, for diagnostics: (/ (* 450 2) 1000)
std::string to_sexpr(const EquationTree& tree);

// Precedence ^ > {*, /} > {+, -}; ^ is right-associative, the rest left.
EquationTree parse_equation(std::span<const EqToken> tokens);
EquationTree parse_equation_text(std::string_view text);

using PreorderToken = std::variant<Operator, Rational>;

// Root-left-right token list. May hold an ill-formed sequence; from_preorder
// rejects those.
struct PreorderSeq {
  std::vector<PreorderToken> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool well_formed() const noexcept;

  // Space separated: "/ * 450 2 1000". Numbers use exact literals.
  std::string to_string() const;
  // Accepts the to_string form, optionally wrapped in [ ], with × and ÷ as
  // operator aliases and number tokens in any parse_answer_literal form.
  static PreorderSeq parse(std::string_view text);

  friend bool operator==(const PreorderSeq&, const PreorderSeq&) = default;
};

PreorderSeq to_preorder(const EquationTree& tree);
EquationTree from_preorder(const PreorderSeq& seq);

struct EvalOptions {
  // Any intermediate numerator or denominator reaching 10^max_digits is
  // treated as a pathological equation.
  std::size_t max_digits = 512;
  NormalizationConfig normalization;
};

AnswerValue evaluate(const EquationTree& tree, const EvalOptions& options = {});

}  // namespace mwp::eqtree
