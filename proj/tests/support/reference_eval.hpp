#pragma once

// Independent reference evaluator: shunting-yard to postfix, then a stack
// machine. Shares no code with the library parser. A minus sign directly in
// front of a digit, at the start or after an operator or open bracket, is
// part of the number.

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace refimpl {

using Q = boost::multiprecision::cpp_rational;
using Z = boost::multiprecision::cpp_int;

struct RefError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tok {
  enum Kind { Num, Op, LParen, RParen } kind;
  Q value;
  char op = 0;
};

inline Q decimal_literal(std::string_view s) {
  // digits with optional fractional part
  Z whole = 0, scale = 1;
  bool frac = false;
  for (char c : s) {
    if (c == '.') {
      frac = true;
      continue;
    }
    whole = whole * 10 + (c - '0');
    if (frac) scale *= 10;
  }
  return Q(whole, scale);
}

inline std::vector<Tok> lex(std::string_view s) {
  std::vector<Tok> out;
  std::size_t i = 0;
  auto prev_allows_sign = [&] {
    return out.empty() || out.back().kind == Tok::Op || out.back().kind == Tok::LParen;
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ') {
      ++i;
      continue;
    }
    bool negative = false;
    if (c == '-' && prev_allows_sign() && i + 1 < s.size() && (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.')) {
      negative = true;
      ++i;
      c = s[i];
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      Q v = decimal_literal(s.substr(i, j - i));
      if (j < s.size() && s[j] == '%') {
        v /= 100;
        ++j;
      }
      out.push_back({Tok::Num, negative ? Q(-v) : v, 0});
      i = j;
      continue;
    }
    if (c == '(' || c == '[') {
      out.push_back({Tok::LParen, 0, c});
    } else if (c == ')' || c == ']') {
      out.push_back({Tok::RParen, 0, c});
    } else if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^') {
      out.push_back({Tok::Op, 0, c});
    } else {
      throw RefError(std::string("bad character ") + c);
    }
    ++i;
  }
  return out;
}

inline int prec(char op) { return op == '^' ? 3 : (op == '*' || op == '/') ? 2 : 1; }

inline std::vector<Tok> to_postfix(const std::vector<Tok>& toks) {
  std::vector<Tok> out, stack;
  for (const auto& t : toks) {
    switch (t.kind) {
      case Tok::Num:
        out.push_back(t);
        break;
      case Tok::Op:
        while (!stack.empty() && stack.back().kind == Tok::Op &&
               (prec(stack.back().op) > prec(t.op) || (prec(stack.back().op) == prec(t.op) && t.op != '^'))) {
          out.push_back(stack.back());
          stack.pop_back();
        }
        stack.push_back(t);
        break;
      case Tok::LParen:
        stack.push_back(t);
        break;
      case Tok::RParen:
        while (!stack.empty() && stack.back().kind != Tok::LParen) {
          out.push_back(stack.back());
          stack.pop_back();
        }
        if (stack.empty()) throw RefError("unbalanced");
        stack.pop_back();
        break;
    }
  }
  while (!stack.empty()) {
    if (stack.back().kind == Tok::LParen) throw RefError("unbalanced");
    out.push_back(stack.back());
    stack.pop_back();
  }
  return out;
}

inline Q power(const Q& base, const Q& exponent) {
  if (denominator(exponent) != 1) throw RefError("non-integer exponent");
  Z e = numerator(exponent);
  bool inverse = e < 0;
  if (inverse) e = -e;
  if (e > 4096) throw RefError("exponent too large");
  Q r = 1;
  for (Z k = 0; k < e; ++k) r *= base;
  if (inverse) {
    if (r == 0) throw RefError("zero to negative power");
    r = 1 / r;
  }
  return r;
}

// Throws RefError on division by zero, 0 to a negative power or malformed
// input.
inline Q evaluate(std::string_view expr) {
  std::vector<Q> st;
  for (const auto& t : to_postfix(lex(expr))) {
    if (t.kind == Tok::Num) {
      st.push_back(t.value);
      continue;
    }
    if (st.size() < 2) throw RefError("missing operand");
    Q b = st.back();
    st.pop_back();
    Q a = st.back();
    st.pop_back();
    switch (t.op) {
      case '+': st.push_back(a + b); break;
      case '-': st.push_back(a - b); break;
      case '*': st.push_back(a * b); break;
      case '/':
        if (b == 0) throw RefError("division by zero");
        st.push_back(a / b);
        break;
      case '^': st.push_back(power(a, b)); break;
    }
  }
  if (st.size() != 1) throw RefError("malformed");
  return st.back();
}

inline std::optional<Q> try_evaluate(std::string_view expr) {
  try {
    return evaluate(expr);
  } catch (const RefError&) {
    return std::nullopt;
  }
}

}  // namespace refimpl
