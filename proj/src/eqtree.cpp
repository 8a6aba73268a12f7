#include "mwp/eqtree.hpp"

#include "mwp/error.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace mwp::eqtree {

char symbol(Operator op) noexcept {
  switch (op) {
    case Operator::Add: return '+';
    case Operator::Sub: return '-';
    case Operator::Mul: return '*';
    case Operator::Div: return '/';
    case Operator::Pow: return '^';
  }
  return '?';
}

std::optional<Operator> operator_from_symbol(std::string_view s) noexcept {
  if (s == "+") return Operator::Add;
  if (s == "-" || s == "\xE2\x88\x92") return Operator::Sub;  // U+2212
  if (s == "*" || s == "\xC3\x97") return Operator::Mul;      // ×
  if (s == "/" || s == "\xC3\xB7") return Operator::Div;      // ÷
  if (s == "^") return Operator::Pow;
  return std::nullopt;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

Error tokenize_error(std::string_view expr, std::size_t pos, const std::string& what) {
  return Error(ErrorCode::Format,
               what + " at offset " + std::to_string(pos) + " in '" + std::string(expr) + "'");
}

bool operand_expected(const std::vector<EqToken>& out) {
  return out.empty() || out.back().kind == EqToken::Kind::Operator ||
         out.back().kind == EqToken::Kind::OpenParen;
}

}  // namespace

std::vector<EqToken> tokenize_expression(std::string_view expr) {
  std::vector<EqToken> out;
  std::size_t i = 0;
  while (i < expr.size()) {
    const char c = expr[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(' || c == '[') {
      out.push_back({EqToken::Kind::OpenParen, {}, {}, std::string(1, c)});
      ++i;
      continue;
    }
    if (c == ')' || c == ']') {
      out.push_back({EqToken::Kind::CloseParen, {}, {}, std::string(1, c)});
      ++i;
      continue;
    }

    // Operators, including the two-byte UTF-8 forms of × and ÷ and the
    // three-byte U+2212 minus sign.
    std::size_t op_len = 0;
    std::optional<Operator> op;
    for (std::size_t len : {std::size_t{3}, std::size_t{2}, std::size_t{1}}) {
      if (i + len <= expr.size()) {
        if ((op = operator_from_symbol(expr.substr(i, len)))) {
          op_len = len;
          break;
        }
      }
    }

    std::size_t start = i;
    bool negative = false;
    if (op && *op == Operator::Sub && operand_expected(out)) {
      std::size_t j = i + op_len;
      while (j < expr.size() && expr[j] == ' ') ++j;
      if (j < expr.size() && (is_digit(expr[j]) || expr[j] == '.')) {
        negative = true;
        i = j;
      } else {
        throw tokenize_error(expr, i, "unary minus is only supported on a number literal");
      }
    } else if (op) {
      if (operand_expected(out)) {
        throw tokenize_error(expr, i, std::string("operator '") + symbol(*op) +
                                          "' is missing its left operand");
      }
      out.push_back({EqToken::Kind::Operator, *op, {}, std::string(expr.substr(i, op_len))});
      i += op_len;
      continue;
    }

    if (is_digit(expr[i]) || expr[i] == '.') {
      std::size_t j = i;
      while (j < expr.size() && is_digit(expr[j])) ++j;
      std::size_t whole_end = j;
      if (j < expr.size() && expr[j] == '.') {
        ++j;
        std::size_t frac_start = j;
        while (j < expr.size() && is_digit(expr[j])) ++j;
        if (j == frac_start) throw tokenize_error(expr, i, "malformed number");
      }
      if (whole_end == i && (j == i || expr[i] != '.')) {
        throw tokenize_error(expr, i, "malformed number");
      }
      std::string_view digits = expr.substr(i, j - i);
      auto dot = digits.find('.');
      Rational value(dot == 0 ? BigInt(0) : parse_digits(digits.substr(0, dot)));
      if (dot != std::string_view::npos) {
        auto frac = digits.substr(dot + 1);
        value += Rational(parse_digits(frac), pow10(static_cast<unsigned>(frac.size())));
      }
      if (negative) value = -value;
      EqToken tok{EqToken::Kind::Number, {}, std::move(value), {}};
      if (j < expr.size() && expr[j] == '%') {
        tok.kind = EqToken::Kind::PercentNumber;
        tok.value /= 100;
        ++j;
      }
      tok.surface = std::string(expr.substr(start, j - start));
      out.push_back(std::move(tok));
      i = j;
      continue;
    }

    throw tokenize_error(expr, i, std::string("unrecognized character '") + c + "'");
  }
  if (out.empty()) {
    throw Error(ErrorCode::Format, "empty expression");
  }
  return out;
}

std::vector<EqToken> tokenize_equation(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i >= text.size() || text[i] != 'x') {
    throw Error(ErrorCode::Format, "equation must start with 'x =': '" + std::string(text) + "'");
  }
  ++i;
  while (i < text.size() && text[i] == ' ') ++i;
  if (i >= text.size() || text[i] != '=') {
    throw Error(ErrorCode::Format, "equation must start with 'x =': '" + std::string(text) + "'");
  }
  return tokenize_expression(text.substr(i + 1));
}

EquationTree::EquationTree(Rational leaf) : node_(std::move(leaf)) {}

EquationTree::EquationTree(Operator op, EquationTree left, EquationTree right)
    : node_(Branch{op, std::make_shared<const EquationTree>(std::move(left)),
                   std::make_shared<const EquationTree>(std::move(right))}) {}

const Rational& EquationTree::number() const {
  if (!is_leaf()) throw Error(ErrorCode::InvalidArgument, "not a leaf");
  return std::get<Rational>(node_);
}

Operator EquationTree::op() const {
  if (is_leaf()) throw Error(ErrorCode::InvalidArgument, "leaf has no operator");
  return std::get<Branch>(node_).op;
}

const EquationTree& EquationTree::left() const {
  if (is_leaf()) throw Error(ErrorCode::InvalidArgument, "leaf has no children");
  return *std::get<Branch>(node_).left;
}

const EquationTree& EquationTree::right() const {
  if (is_leaf()) throw Error(ErrorCode::InvalidArgument, "leaf has no children");
  return *std::get<Branch>(node_).right;
}

std::size_t EquationTree::leaf_count() const {
  return is_leaf() ? 1 : left().leaf_count() + right().leaf_count();
}

std::size_t EquationTree::internal_count() const {
  return is_leaf() ? 0 : 1 + left().internal_count() + right().internal_count();
}

bool operator==(const EquationTree& a, const EquationTree& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.number() == b.number();
  return a.op() == b.op() && a.left() == b.left() && a.right() == b.right();
}

std::string to_sexpr(const EquationTree& tree) {
  if (tree.is_leaf()) return to_exact_literal(tree.number());
  return std::string("(") + symbol(tree.op()) + " " + to_sexpr(tree.left()) + " " +
         to_sexpr(tree.right()) + ")";
}

namespace {

constexpr int kMaxNesting = 256;

int precedence(Operator op) {
  switch (op) {
    case Operator::Add:
    case Operator::Sub: return 1;
    case Operator::Mul:
    case Operator::Div: return 2;
    case Operator::Pow: return 3;
  }
  return 0;
}

class Parser {
 public:
  explicit Parser(std::span<const EqToken> tokens) : tokens_(tokens) {}

  EquationTree parse() {
    if (tokens_.empty()) throw Error(ErrorCode::Format, "empty expression");
    EquationTree tree = expression(1, 0);
    if (pos_ < tokens_.size()) {
      const EqToken& tok = tokens_[pos_];
      if (tok.kind == EqToken::Kind::CloseParen) fail("unbalanced parentheses: unmatched '" + tok.surface + "'");
      fail("unexpected token '" + tok.surface + "'");
    }
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Format, what + " (token " + std::to_string(pos_) + ")");
  }

  EquationTree expression(int min_prec, int depth) {
    EquationTree lhs = primary(depth);
    while (pos_ < tokens_.size() && tokens_[pos_].kind == EqToken::Kind::Operator) {
      Operator op = tokens_[pos_].op;
      int prec = precedence(op);
      if (prec < min_prec) break;
      ++pos_;
      int next_min = op == Operator::Pow ? prec : prec + 1;
      EquationTree rhs = expression(next_min, depth);
      lhs = EquationTree(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  EquationTree primary(int depth) {
    if (pos_ >= tokens_.size()) {
      fail(pos_ == 0 ? "empty expression" : "dangling operator: missing right operand");
    }
    const EqToken& tok = tokens_[pos_];
    switch (tok.kind) {
      case EqToken::Kind::Number:
      case EqToken::Kind::PercentNumber:
        ++pos_;
        return EquationTree(tok.value);
      case EqToken::Kind::OpenParen: {
        if (depth >= kMaxNesting) fail("parentheses nested too deeply");
        ++pos_;
        if (pos_ < tokens_.size() && tokens_[pos_].kind == EqToken::Kind::CloseParen) {
          fail("empty sub-expression");
        }
        EquationTree inner = expression(1, depth + 1);
        if (pos_ >= tokens_.size() || tokens_[pos_].kind != EqToken::Kind::CloseParen) {
          fail("unbalanced parentheses: missing close for '" + tok.surface + "'");
        }
        const char want = tok.surface == "(" ? ')' : ']';
        if (tokens_[pos_].surface[0] != want) {
          fail("mismatched brackets '" + tok.surface + "' and '" + tokens_[pos_].surface + "'");
        }
        ++pos_;
        return inner;
      }
      case EqToken::Kind::CloseParen:
        fail("empty sub-expression before '" + tok.surface + "'");
      case EqToken::Kind::Operator:
        fail(std::string("dangling operator '") + symbol(tok.op) + "'");
    }
    fail("unexpected token");
  }

  std::span<const EqToken> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

EquationTree parse_equation(std::span<const EqToken> tokens) { return Parser(tokens).parse(); }

EquationTree parse_equation_text(std::string_view text) {
  auto tokens = tokenize_equation(text);
  return parse_equation(tokens);
}

bool PreorderSeq::well_formed() const noexcept {
  // Running count of operand slots still to fill; must hit zero exactly at
  // the last token.
  long need = 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (need <= 0) return false;
    need += std::holds_alternative<Operator>(tokens[i]) ? 1 : -1;
  }
  return !tokens.empty() && need == 0;
}

std::string PreorderSeq::to_string() const {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty()) out.push_back(' ');
    if (const auto* op = std::get_if<Operator>(&tok)) {
      out.push_back(symbol(*op));
    } else {
      out += to_exact_literal(std::get<Rational>(tok));
    }
  }
  return out;
}

PreorderSeq PreorderSeq::parse(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw Error(ErrorCode::Format, "unterminated '[' in pre-order sequence");
    s = s.substr(1, s.size() - 2);
  }
  PreorderSeq seq;
  std::istringstream in{std::string(s)};
  std::string word;
  while (in >> word) {
    if (auto op = operator_from_symbol(word)) {
      seq.tokens.emplace_back(*op);
    } else {
      seq.tokens.emplace_back(postproc::parse_answer_literal(word).value);
    }
  }
  return seq;
}

namespace {

void preorder_walk(const EquationTree& t, std::vector<PreorderToken>& out) {
  if (t.is_leaf()) {
    out.emplace_back(t.number());
    return;
  }
  out.emplace_back(t.op());
  preorder_walk(t.left(), out);
  preorder_walk(t.right(), out);
}

EquationTree build_preorder(const std::vector<PreorderToken>& toks, std::size_t& pos) {
  if (pos >= toks.size()) {
    throw Error(ErrorCode::Format, "pre-order sequence too short for a single tree");
  }
  const PreorderToken& tok = toks[pos++];
  if (const auto* num = std::get_if<Rational>(&tok)) return EquationTree(*num);
  Operator op = std::get<Operator>(tok);
  EquationTree left = build_preorder(toks, pos);
  EquationTree right = build_preorder(toks, pos);
  return EquationTree(op, std::move(left), std::move(right));
}

struct Partial {
  Rational value;
  bool approximate = false;
};

class Evaluator {
 public:
  explicit Evaluator(const EvalOptions& options) : limit_(pow10(static_cast<unsigned>(options.max_digits))), max_digits_(options.max_digits) {}

  Partial eval(const EquationTree& t) {
    if (t.is_leaf()) return {t.number(), false};
    Partial a = eval(t.left());
    Partial b = eval(t.right());
    Partial out;
    out.approximate = a.approximate || b.approximate;
    switch (t.op()) {
      case Operator::Add: out.value = a.value + b.value; break;
      case Operator::Sub: out.value = a.value - b.value; break;
      case Operator::Mul: out.value = a.value * b.value; break;
      case Operator::Div:
        if (b.value == 0) {
          throw EvalError(EvalError::Kind::DivisionByZero, "division by zero in " + to_sexpr(t));
        }
        out.value = a.value / b.value;
        break;
      case Operator::Pow: {
        bool approx = false;
        out.value = power(a.value, b.value, approx, t);
        out.approximate = out.approximate || approx;
        break;
      }
    }
    check_bounds(out.value, t);
    return out;
  }

 private:
  void check_bounds(const Rational& v, const EquationTree& t) const {
    if (abs(numerator(v)) >= limit_ || denominator(v) >= limit_) {
      throw EvalError(EvalError::Kind::Overflow,
                      "intermediate value exceeds " + std::to_string(max_digits_) +
                          " digits in " + to_sexpr(t));
    }
  }

  Rational power(const Rational& base, const Rational& exponent, bool& approximate,
                 const EquationTree& t) const {
    if (is_integer(exponent)) {
      const BigInt e = numerator(exponent);
      if (base == 0) {
        if (e < 0) {
          throw EvalError(EvalError::Kind::ZeroToNegativePower,
                          "zero raised to a negative power in " + to_sexpr(t));
        }
        return e == 0 ? Rational(1) : Rational(0);
      }
      if (base == 1) return 1;
      if (base == -1) return e % 2 == 0 ? Rational(1) : Rational(-1);
      const BigInt mag = abs(e);
      // log2(10) < 3.33; both parts have magnitude >= 2 bits once |base| != 1.
      const std::size_t bits =
          std::max(msb(abs(numerator(base))), msb(denominator(base))) + 1;
      const double estimated_bits = static_cast<double>(bits - 1) * mag.convert_to<double>();
      if (estimated_bits > static_cast<double>(max_digits_) * 3.33 + 8) {
        throw EvalError(EvalError::Kind::Overflow, "power too large in " + to_sexpr(t));
      }
      const auto n = mag.convert_to<unsigned>();
      Rational r(boost::multiprecision::pow(numerator(base), n),
                 boost::multiprecision::pow(denominator(base), n));
      return e < 0 ? Rational(1 / r) : r;
    }
    approximate = true;
    const double result = std::pow(base.convert_to<double>(), exponent.convert_to<double>());
    if (std::isnan(result)) {
      throw EvalError(EvalError::Kind::Domain, "power has no real value in " + to_sexpr(t));
    }
    if (!std::isfinite(result)) {
      throw EvalError(EvalError::Kind::Overflow, "power overflows in " + to_sexpr(t));
    }
    return exact_rational(result);
  }

  BigInt limit_;
  std::size_t max_digits_;
};

}  // namespace

PreorderSeq to_preorder(const EquationTree& tree) {
  PreorderSeq seq;
  preorder_walk(tree, seq.tokens);
  return seq;
}

EquationTree from_preorder(const PreorderSeq& seq) {
  if (!seq.well_formed()) {
    // Distinguish the two failure modes for the message.
    long need = 1;
    for (const auto& tok : seq.tokens) {
      if (need <= 0) break;
      need += std::holds_alternative<Operator>(tok) ? 1 : -1;
    }
    throw Error(ErrorCode::Format, need > 0 ? "pre-order sequence too short for a single tree: '" + seq.to_string() + "'"
                                            : "pre-order sequence too long for a single tree: '" + seq.to_string() + "'");
  }
  std::size_t pos = 0;
  return build_preorder(seq.tokens, pos);
}

AnswerValue evaluate(const EquationTree& tree, const EvalOptions& options) {
  Partial p = Evaluator(options).eval(tree);
  return AnswerValue::from(std::move(p.value), options.normalization, p.approximate);
}

}  // namespace mwp::eqtree
