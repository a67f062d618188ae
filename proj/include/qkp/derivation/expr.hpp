#pragma once

#include <boost/rational.hpp>

#include <cmath>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkp/errors.hpp"

namespace qkp::derivation {

using Rational = boost::rational<long long>;
// Compare Rationals only against Rationals: under C++20 operator rewriting,
// boost's mixed int/rational equality recurses without end.

enum class FieldName : int { n_i, n_e, u_i1, u_i2, phi };

inline const char* field_name_str(FieldName f) {
  switch (f) {
    case FieldName::n_i: return "n_i";
    case FieldName::n_e: return "n_e";
    case FieldName::u_i1: return "u_i1";
    case FieldName::u_i2: return "u_i2";
    case FieldName::phi: return "phi";
  }
  return "?";
}

inline std::optional<FieldName> field_name_from(const std::string& s) {
  for (auto f : {FieldName::n_i, FieldName::n_e, FieldName::u_i1, FieldName::u_i2, FieldName::phi})
    if (s == field_name_str(f)) return f;
  return std::nullopt;
}

/// Expansion coefficient of one unknown, with an inert derivative multi-index.
struct FieldSym {
  FieldName name;
  int order;   // expansion order k >= 1
  int d1 = 0;  // x1 derivatives
  int d2 = 0;  // x2 derivatives
  int dt = 0;  // t derivatives
  auto operator<=>(const FieldSym&) const = default;
};

enum class Axis { x1, x2, t };

inline FieldSym differentiated(FieldSym f, Axis a, int times = 1) {
  (a == Axis::x1 ? f.d1 : a == Axis::x2 ? f.d2 : f.dt) += times;
  return f;
}

/// Product eps^(eps_half/2) * V^v * H^h * prod fields^e.
struct Monomial {
  int eps_half = 0;
  std::vector<std::pair<FieldSym, int>> fields;  // sorted by symbol, exponents > 0
  int h = 0;
  int v = 0;

  bool operator==(const Monomial&) const = default;

  bool has_fields() const { return !fields.empty(); }
  int field_degree() const {
    int d = 0;
    for (const auto& [s, e] : fields) d += e;
    return d;
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.eps_half = a.eps_half + b.eps_half;
    r.h = a.h + b.h;
    r.v = a.v + b.v;
    auto i = a.fields.begin(), j = b.fields.begin();
    while (i != a.fields.end() || j != b.fields.end()) {
      if (j == b.fields.end() || (i != a.fields.end() && i->first < j->first)) {
        r.fields.push_back(*i++);
      } else if (i == a.fields.end() || j->first < i->first) {
        r.fields.push_back(*j++);
      } else {
        r.fields.emplace_back(i->first, i->second + j->second);
        ++i, ++j;
      }
    }
    return r;
  }
};

/// Term order: grade ascending, then fields, then H ascending, then V descending.
struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const {
    if (a.eps_half != b.eps_half) return a.eps_half < b.eps_half;
    if (a.fields != b.fields) return a.fields < b.fields;
    if (a.h != b.h) return a.h < b.h;
    return a.v > b.v;
  }
};

/// Canonical polynomial: a map from monomials to nonzero rational coefficients.
/// Structurally equal expressions compare equal.
class Expr {
 public:
  using TermMap = std::map<Monomial, Rational, MonomialOrder>;

  Expr() = default;
  Expr(Rational c) { add_term(Monomial{}, c); }  // NOLINT: implicit constants read naturally
  Expr(long long c) : Expr(Rational(c)) {}       // NOLINT

  static Expr monomial(Monomial m, Rational c = 1) {
    Expr e;
    e.add_term(std::move(m), c);
    return e;
  }
  /// sqrt(eps)^n
  static Expr eps_half(int n) {
    if (n < 0) throw InvalidParam("negative power of eps");
    Monomial m;
    m.eps_half = n;
    return monomial(m);
  }
  static Expr V(int power = 1) {
    Monomial m;
    m.v = power;
    return monomial(m);
  }
  static Expr H(int power = 1) {
    Monomial m;
    m.h = power;
    return monomial(m);
  }
  static Expr field(FieldSym s, int power = 1) {
    Monomial m;
    m.fields.emplace_back(s, power);
    return monomial(m);
  }

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool operator==(const Expr& o) const { return terms_ == o.terms_; }

  void add_term(Monomial m, Rational c) {
    if (c.numerator() == 0) return;
    auto [it, inserted] = terms_.try_emplace(std::move(m), c);
    if (!inserted) {
      it->second += c;
      if (it->second.numerator() == 0) terms_.erase(it);
    }
  }

  Expr& operator+=(const Expr& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Expr& operator-=(const Expr& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend Expr operator+(Expr a, const Expr& b) { return a += b; }
  friend Expr operator-(Expr a, const Expr& b) { return a -= b; }
  friend Expr operator-(const Expr& a) { return Expr() - a; }

  /// Product keeping only terms with eps_half <= max_eps_half (negative: keep all).
  static Expr multiply(const Expr& a, const Expr& b, int max_eps_half = -1) {
    Expr r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        if (max_eps_half >= 0 && ma.eps_half + mb.eps_half > max_eps_half) continue;
        r.add_term(ma * mb, ca * cb);
      }
    return r;
  }
  friend Expr operator*(const Expr& a, const Expr& b) { return multiply(a, b); }
  Expr& operator*=(const Expr& o) { return *this = multiply(*this, o); }

  Expr pow(int n, int max_eps_half = -1) const {
    if (n < 0) {
      if (terms_.size() != 1) throw InvalidParam("negative power of a non-monomial");
      return inverse_monomial().pow(-n, max_eps_half);
    }
    Expr r(1);
    for (int i = 0; i < n; ++i) r = multiply(r, *this, max_eps_half);
    return r;
  }

  /// 1/e for a single monomial whose eps and field exponents are zero.
  Expr inverse_monomial() const {
    if (terms_.size() != 1) throw InvalidParam("only monomials are invertible");
    const auto& [m, c] = *terms_.begin();
    if (m.eps_half != 0 || m.has_fields()) throw InvalidParam("eps and field symbols are not invertible");
    Monomial inv;
    inv.v = -m.v;
    inv.h = -m.h;
    return monomial(inv, Rational(1) / c);
  }

  Expr truncated(int max_eps_half) const {
    Expr r;
    for (const auto& [m, c] : terms_)
      if (m.eps_half <= max_eps_half) r.add_term(m, c);
    return r;
  }

  /// Coefficient of sqrt(eps)^n (eps-free expression).
  Expr grade_slice(int eps_half) const {
    Expr r;
    for (const auto& [m, c] : terms_)
      if (m.eps_half == eps_half) {
        Monomial k = m;
        k.eps_half = 0;
        r.add_term(k, c);
      }
    return r;
  }

  int max_eps_half() const {
    int g = 0;
    for (const auto& [m, c] : terms_) g = std::max(g, m.eps_half);
    return g;
  }

  /// Total derivative; field symbols follow the Leibniz rule, V, H, eps are constants.
  Expr diff(Axis axis, int times = 1) const {
    Expr cur = *this;
    for (int n = 0; n < times; ++n) {
      Expr r;
      for (const auto& [m, c] : cur.terms_) {
        for (std::size_t i = 0; i < m.fields.size(); ++i) {
          const auto& [sym, e] = m.fields[i];
          Monomial rest = m;
          if (e == 1)
            rest.fields.erase(rest.fields.begin() + static_cast<long>(i));
          else
            rest.fields[i].second -= 1;
          Monomial d;
          d.fields.emplace_back(differentiated(sym, axis), 1);
          r.add_term(rest * d, c * e);
        }
      }
      cur = std::move(r);
    }
    return cur;
  }

  /// Replace field symbols for which `rule` returns a value; others stay.
  Expr substitute(const std::function<std::optional<Expr>(const FieldSym&)>& rule,
                  int max_eps_half = -1) const {
    Expr r;
    for (const auto& [m, c] : terms_) {
      Monomial kept = m;
      kept.fields.clear();
      Expr factor(1);
      for (const auto& [sym, e] : m.fields) {
        if (auto rep = rule(sym)) {
          factor = multiply(factor, rep->pow(e, max_eps_half), max_eps_half);
        } else {
          kept.fields.emplace_back(sym, e);
        }
      }
      r += multiply(monomial(kept, c), factor, max_eps_half);
    }
    return r;
  }

  /// Substitute a rational value for V.
  Expr with_V(Rational value) const {
    Expr r;
    for (const auto& [m, c] : terms_) {
      Monomial k = m;
      k.v = 0;
      Rational f = 1;
      const Rational base = m.v >= 0 ? value : Rational(1) / value;
      for (int i = 0; i < std::abs(m.v); ++i) f *= base;
      r.add_term(k, c * f);
    }
    return r;
  }

  /// Numeric value; throws if field symbols remain.
  double evaluate(double V, double H, double eps = 0.0) const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) {
      if (m.has_fields()) throw InvalidParam("cannot evaluate an expression with field symbols");
      s += boost::rational_cast<double>(c) * std::pow(V, m.v) * std::pow(H, m.h) *
           std::pow(eps, 0.5 * m.eps_half);
    }
    return s;
  }

  /// Sum of coefficient * V^v * H^h over terms whose eps and field part match `fields`.
  Expr coefficient_of(const std::vector<std::pair<FieldSym, int>>& fields) const {
    Expr r;
    for (const auto& [m, c] : terms_)
      if (m.eps_half == 0 && m.fields == fields) {
        Monomial k;
        k.v = m.v;
        k.h = m.h;
        r.add_term(k, c);
      }
    return r;
  }

  std::string str() const;

 private:
  TermMap terms_;
};

inline std::string rational_str(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline std::string field_str(const FieldSym& s) {
  std::string out;
  if (s.d1 || s.d2 || s.dt)
    out = "D[" + std::to_string(s.d1) + "," + std::to_string(s.d2) + "," + std::to_string(s.dt) + "]";
  return out + "{" + field_name_str(s.name) + "," + std::to_string(s.order) + "}";
}

inline std::string eps_str(int eps_half) {
  if (eps_half == 2) return "eps";
  if (eps_half % 2 == 0) return "eps^" + std::to_string(eps_half / 2);
  return "eps^(" + std::to_string(eps_half) + "/2)";
}

/// Factors in print order: eps, V, H, fields.
inline std::vector<std::string> monomial_factors(const Monomial& m) {
  std::vector<std::string> f;
  if (m.eps_half) f.push_back(eps_str(m.eps_half));
  if (m.v) f.push_back(m.v == 1 ? "V" : "V^" + std::to_string(m.v));
  if (m.h) f.push_back(m.h == 1 ? "H" : "H^" + std::to_string(m.h));
  for (const auto& [s, e] : m.fields) f.push_back(e == 1 ? field_str(s) : field_str(s) + "^" + std::to_string(e));
  return f;
}

inline std::string Expr::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    const bool neg = c < 0;
    const Rational mag = neg ? -c : c;
    if (first)
      out += neg ? "-" : "";
    else
      out += neg ? " - " : " + ";
    first = false;
    auto factors = monomial_factors(m);
    std::string body;
    if (mag != Rational(1) || factors.empty()) body = rational_str(mag);
    for (const auto& f : factors) body += (body.empty() ? "" : "*") + f;
    out += body;
  }
  return out;
}

}  // namespace qkp::derivation
