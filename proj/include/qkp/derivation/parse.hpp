#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "qkp/derivation/expr.hpp"

namespace qkp::derivation {

// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' exponent)?
//   exponent:= '-'? int | '(' '-'? int ('/' int)? ')'
//   atom    := int | 'V' | 'H' | 'eps' | field | '(' expr ')'
//   field   := ('D[' int ',' int ',' int ']')? '{' name ',' int '}'
// Division is by monomials in V and H only; eps takes exponents in Z/2 >= 0.

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ < s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ParseError(at + 1, what);
  }
  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  long long integer() {
    skip_ws();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      if (v > (1LL << 55)) fail("integer too large", start);
      v = v * 10 + (s_[pos_++] - '0');
    }
    if (pos_ == start) fail("expected integer");
    return v;
  }
  long long signed_integer() {
    const bool neg = accept('-');
    const long long v = integer();
    return neg ? -v : v;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+'))
        e += term();
      else if (accept('-'))
        e -= term();
      else
        return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) {
        e *= unary();
      } else if (peek('/')) {
        const std::size_t at = pos_++;
        Expr d = unary();
        if (d.is_zero()) fail("division by zero", at);
        try {
          e *= d.inverse_monomial();
        } catch (const InvalidParam&) {
          fail("divisor must be a monomial in V and H", at);
        }
      } else {
        return e;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    return power();
  }

  Expr power() {
    skip_ws();
    const std::size_t at = pos_;
    const bool is_eps = s_.substr(pos_, 3) == "eps";
    Expr base = atom();
    if (!accept('^')) return base;
    long long num, den = 1;
    if (accept('(')) {
      num = signed_integer();
      if (accept('/')) den = integer();
      expect(')');
    } else {
      num = signed_integer();
    }
    if (den == 0) fail("zero denominator in exponent", at);
    if (is_eps) {
      if (den != 1 && den != 2) fail("eps exponent must be a multiple of 1/2", at);
      const long long halves = num * (2 / den);
      if (halves < 0) fail("negative power of eps", at);
      return Expr::eps_half(static_cast<int>(halves));
    }
    if (den != 1) fail("fractional exponent on a non-eps base", at);
    try {
      return base.pow(static_cast<int>(num));
    } catch (const InvalidParam& e) {
      fail(e.what(), at);
    }
  }

  Expr atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      const std::size_t open = pos_++;
      skip_ws();
      if (pos_ >= s_.size()) fail("unbalanced '('", open);
      Expr e = expr();
      if (!accept(')')) fail("unbalanced '('", open);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return Expr(Rational(integer()));
    if (s_.substr(pos_, 3) == "eps") {
      pos_ += 3;
      return Expr::eps_half(2);
    }
    if (c == 'V') {
      ++pos_;
      return Expr::V();
    }
    if (c == 'H') {
      ++pos_;
      return Expr::H();
    }
    if (c == 'D' || c == '{') return field();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr field() {
    FieldSym sym{FieldName::n_i, 1};
    if (accept('D')) {
      expect('[');
      sym.d1 = static_cast<int>(integer());
      expect(',');
      sym.d2 = static_cast<int>(integer());
      expect(',');
      sym.dt = static_cast<int>(integer());
      expect(']');
    }
    expect('{');
    skip_ws();
    const std::size_t at = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    auto name = field_name_from(std::string(s_.substr(at, pos_ - at)));
    if (!name) fail("unknown field name", at);
    sym.name = *name;
    expect(',');
    const std::size_t kat = pos_;
    sym.order = static_cast<int>(integer());
    if (sym.order < 1) fail("expansion order must be >= 1", kat);
    expect('}');
    return Expr::field(sym);
  }
};

}  // namespace detail

/// Parse text in the grammar above. Throws ParseError with a 1-based column.
inline Expr parse_expr(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace qkp::derivation
