#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qkp/derivation/expr.hpp"

namespace qkp::derivation {

enum class Source { mass, momentum_x1, momentum_x2, poisson, potential };

inline const char* source_name(Source s) {
  switch (s) {
    case Source::mass: return "mass";
    case Source::momentum_x1: return "momentum_x1";
    case Source::momentum_x2: return "momentum_x2";
    case Source::poisson: return "poisson";
    case Source::potential: return "potential";
  }
  return "?";
}

inline constexpr std::array<Source, 5> kAllSources{Source::mass, Source::momentum_x1, Source::momentum_x2,
                                                   Source::poisson, Source::potential};

/// lhs = 0 at one power of eps. grade_half counts powers of sqrt(eps).
struct OrderEquation {
  int grade_half;
  Expr lhs;
  Source source;
  Rational grade() const { return Rational(grade_half, 2); }
};

inline int half_units(Rational grade) {
  const Rational twice = grade * 2;
  if (twice.denominator() != 1 || twice < 0) throw InvalidParam("grade must be a non-negative half-integer");
  return static_cast<int>(twice.numerator());
}

/// Generalized binomial coefficient C(p, j).
inline Rational binomial(Rational p, int j) {
  Rational r = 1;
  for (int i = 0; i < j; ++i) r *= (p - i) / Rational(i + 1);
  return r;
}

/// The scaled system after substituting the formal expansion, truncated at
/// sqrt(eps)^max_eps_half. The four field equations have phi eliminated;
/// `potential` keeps the phi series minus its closure.
struct ScaledSystem {
  int max_eps_half = 0;
  Expr mass, momentum_x1, momentum_x2, poisson, potential;
  std::vector<Expr> phi_closure;  // [k] = coefficient of eps^k in the potential closure; [0] unused

  const Expr& equation(Source s) const {
    switch (s) {
      case Source::mass: return mass;
      case Source::momentum_x1: return momentum_x1;
      case Source::momentum_x2: return momentum_x2;
      case Source::poisson: return poisson;
      case Source::potential: return potential;
    }
    return mass;
  }
};

inline ScaledSystem build_scaled_system(int max_eps_half) {
  if (max_eps_half < 0 || max_eps_half > 6) throw InvalidParam("max_grade must lie in [0, 3]");
  const int G = max_eps_half;
  const int K = std::max(1, G / 2);
  auto mul = [G](const Expr& a, const Expr& b) { return Expr::multiply(a, b, G); };
  auto x1 = [](const Expr& e, int n = 1) { return e.diff(Axis::x1, n); };
  auto x2 = [](const Expr& e, int n = 1) { return e.diff(Axis::x2, n); };
  auto t = [](const Expr& e) { return e.diff(Axis::t); };
  const Expr s = Expr::eps_half(1);
  const Expr s2 = Expr::eps_half(2);

  auto series = [&](FieldName name, int offset, Expr base) {
    for (int k = 1; 2 * k + offset <= std::max(G, 2 + offset); ++k)
      base += Expr::eps_half(2 * k + offset) * Expr::field({name, k});
    return base;
  };
  const Expr ni = series(FieldName::n_i, 0, 1);
  const Expr ne = series(FieldName::n_e, 0, 1);
  const Expr u1 = series(FieldName::u_i1, 0, 0);
  const Expr u2 = series(FieldName::u_i2, 1, 0);
  const Expr phi = series(FieldName::phi, 0, 0);
  const Expr V = Expr::V();

  // Closure: -1/2 + ne^2/2 - (H^2/2) (eps d1^2 + eps^2 d2^2) sqrt(ne) / sqrt(ne),
  // with sqrt(ne)^(+-1) replaced by binomial series in delta = ne - 1.
  const Expr delta = ne - Expr(1);
  Expr root(0), inv_root(0), delta_pow(1);
  for (int j = 0; j <= K; ++j) {
    root += Expr(binomial(Rational(1, 2), j)) * delta_pow;
    inv_root += Expr(binomial(Rational(-1, 2), j)) * delta_pow;
    delta_pow = mul(delta_pow, delta);
  }
  const Expr lap_root = mul(s2, x1(root, 2)) + mul(Expr::eps_half(4), x2(root, 2));
  const Expr closure = (Expr(Rational(-1, 2)) + Expr(Rational(1, 2)) * mul(ne, ne) -
                        Expr(Rational(1, 2)) * Expr::H(2) * mul(lap_root, inv_root))
                           .truncated(G);

  ScaledSystem sys;
  sys.max_eps_half = G;
  sys.phi_closure.assign(K + 1, Expr());
  for (int h = 0; h <= G; ++h) {
    Expr slice = closure.grade_slice(h);
    if (h % 2 == 1 || h == 0) {
      if (!slice.is_zero()) throw DerivationMismatch("potential closure has a term at eps^(" + std::to_string(h) + "/2)");
      continue;
    }
    sys.phi_closure[h / 2] = std::move(slice);
  }

  auto eliminate_phi = [&](const Expr& e) {
    return e.substitute(
        [&](const FieldSym& f) -> std::optional<Expr> {
          if (f.name != FieldName::phi) return std::nullopt;
          return sys.phi_closure.at(f.order).diff(Axis::x1, f.d1).diff(Axis::x2, f.d2).diff(Axis::t, f.dt);
        },
        G);
  };

  sys.mass = eliminate_phi((mul(s2, t(ni)) - V * x1(ni) + x1(mul(ni, u1)) + mul(s, x2(mul(ni, u2)))).truncated(G));
  sys.momentum_x1 = eliminate_phi(
      (mul(s2, t(u1)) - V * x1(u1) + mul(u1, x1(u1)) + mul(s, mul(u2, x2(u1))) + x1(phi)).truncated(G));
  sys.momentum_x2 = eliminate_phi(
      (mul(s2, t(u2)) - V * x1(u2) + mul(u1, x1(u2)) + mul(s, mul(u2, x2(u2))) + mul(s, x2(phi))).truncated(G));
  sys.poisson = eliminate_phi((mul(s2, x1(phi, 2)) + mul(Expr::eps_half(4), x2(phi, 2)) - ne + ni).truncated(G));
  sys.potential = (phi - closure).truncated(G);
  return sys;
}

/// Every non-trivial order equation of grade <= max_grade (at most 3), by grade then source.
inline std::vector<OrderEquation> expand_orders(Rational max_grade) {
  const int G = half_units(max_grade);
  if (G > 6) throw InvalidParam("max_grade must be <= 3");
  const ScaledSystem sys = build_scaled_system(G);
  std::vector<OrderEquation> out;
  for (int h = 0; h <= G; ++h)
    for (Source src : kAllSources) {
      Expr lhs = sys.equation(src).grade_slice(h);
      if (!lhs.is_zero()) out.push_back({h, std::move(lhs), src});
    }
  return out;
}

inline const OrderEquation& find_equation(const std::vector<OrderEquation>& eqs, int grade_half, Source src) {
  for (const auto& e : eqs)
    if (e.grade_half == grade_half && e.source == src) return e;
  throw DerivationMismatch(std::string("missing order equation: ") + source_name(src) + " at grade " +
                           rational_str(Rational(grade_half, 2)));
}

// ---------------------------------------------------------------------------
// Solvability

struct SoundSpeed {
  Expr characteristic;         // monic-sign polynomial in V
  std::vector<Rational> roots;  // distinct rational roots, ascending
  Rational V;                   // chosen branch (right-moving)
};

namespace detail {

/// Coefficients c[0..deg] of a polynomial in V with no other symbols.
inline std::vector<Rational> v_coefficients(const Expr& p) {
  std::vector<Rational> c;
  for (const auto& [m, coef] : p.terms()) {
    if (m.has_fields() || m.h != 0 || m.eps_half != 0 || m.v < 0)
      throw DerivationMismatch("characteristic polynomial is not a polynomial in V: " + p.str());
    if (static_cast<int>(c.size()) <= m.v) c.resize(m.v + 1, 0);
    c[m.v] += coef;
  }
  return c;
}

inline Rational eval_poly(const std::vector<Rational>& c, Rational x) {
  Rational r = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

inline std::vector<long long> divisors(long long n) {
  n = std::abs(n);
  std::vector<long long> d;
  for (long long i = 1; i <= n; ++i)
    if (n % i == 0) d.push_back(i);
  return d;
}

/// Rational roots by the rational root theorem.
inline std::vector<Rational> rational_roots(std::vector<Rational> c) {
  std::vector<Rational> roots;
  while (!c.empty() && c.back() == Rational(0)) c.pop_back();
  if (c.size() <= 1) return roots;
  if (c.front() == Rational(0)) {
    roots.push_back(0);
    while (c.front() == Rational(0)) c.erase(c.begin());
  }
  long long l = 1;
  for (const auto& x : c) l = std::lcm(l, x.denominator());
  std::vector<long long> ic;
  for (const auto& x : c) ic.push_back((x * l).numerator());
  for (long long p : divisors(ic.front()))
    for (long long q : divisors(ic.back()))
      for (Rational cand : {Rational(p, q), Rational(-p, q)})
        if (eval_poly(c, cand) == Rational(0) && std::find(roots.begin(), roots.end(), cand) == roots.end())
          roots.push_back(cand);
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline Expr det3(const std::array<std::array<Expr, 3>, 3>& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace detail

/// Determinant of the leading-order linear system in (n_i, u_i1, n_e), its
/// rational roots, and the positive branch.
inline SoundSpeed solve_sound_speed(const std::vector<OrderEquation>& eqs) {
  const std::array<Source, 3> rows{Source::mass, Source::momentum_x1, Source::poisson};
  const std::array<FieldName, 3> cols{FieldName::n_i, FieldName::u_i1, FieldName::n_e};
  std::array<std::array<Expr, 3>, 3> m;
  for (std::size_t r = 0; r < 3; ++r) {
    const Expr& lhs = find_equation(eqs, 2, rows[r]).lhs;
    int d1 = -1;
    for (const auto& [mono, coef] : lhs.terms()) {
      if (mono.fields.size() != 1 || mono.fields[0].second != 1 || mono.fields[0].first.order != 1)
        throw DerivationMismatch("leading-order equation is not linear in first-order unknowns");
      const FieldSym& f = mono.fields[0].first;
      if (f.d2 != 0 || f.dt != 0 || (d1 >= 0 && f.d1 != d1))
        throw DerivationMismatch("leading-order row mixes derivative orders");
      d1 = f.d1;
      const auto col = std::find(cols.begin(), cols.end(), f.name);
      if (col == cols.end()) throw DerivationMismatch("unexpected unknown in leading-order system");
      Monomial k = mono;
      k.fields.clear();
      m[r][col - cols.begin()].add_term(k, coef);
    }
  }
  SoundSpeed out;
  out.characteristic = detail::det3(m);
  auto c = detail::v_coefficients(out.characteristic);
  while (!c.empty() && c.back() == Rational(0)) c.pop_back();
  if (c.empty()) throw DerivationMismatch("leading-order system is singular for every V");
  if (c.back() < 0) out.characteristic = -out.characteristic;
  out.roots = detail::rational_roots(c);
  auto pos = std::find_if(out.roots.rbegin(), out.roots.rend(), [](Rational r) { return r > 0; });
  if (pos == out.roots.rend()) throw DerivationMismatch("no positive sound speed");
  out.V = *pos;
  return out;
}

inline SoundSpeed solve_sound_speed() { return solve_sound_speed(expand_orders(1)); }

// ---------------------------------------------------------------------------
// Rewrite rules and the KP equation for n_i^(1)

enum class Rule {
  profile,     // n_e^(1) -> n_i^(1), u_i1^(1) -> V n_i^(1)
  transverse,  // d1 u_i2^(1) -> V d2 n_i^(1)
};

inline Expr apply_rule(const Expr& e, Rule rule) {
  const Expr V = Expr::V();
  return e.substitute([&](const FieldSym& f) -> std::optional<Expr> {
    if (f.order != 1) return std::nullopt;
    FieldSym n{FieldName::n_i, 1, f.d1, f.d2, f.dt};
    if (rule == Rule::profile) {
      if (f.name == FieldName::n_e) return Expr::field(n);
      if (f.name == FieldName::u_i1) return V * Expr::field(n);
    } else if (f.name == FieldName::u_i2 && f.d1 >= 1) {
      n.d1 -= 1;
      n.d2 += 1;
      return V * Expr::field(n);
    }
    return std::nullopt;
  });
}

inline Expr apply_rules(Expr e, const std::array<Rule, 2>& order) {
  for (;;) {
    Expr next = e;
    for (Rule r : order) next = apply_rule(next, r);
    if (next == e) return e;
    e = std::move(next);
  }
}

/// Drops terms carrying unknowns of order >= 2 whose coefficient vanishes on
/// every root of the characteristic polynomial; anything else is an error.
inline Expr eliminate_higher_orders(const Expr& e, const std::vector<Rational>& roots) {
  Expr kept, higher;
  for (const auto& [m, c] : e.terms()) {
    const bool high = std::any_of(m.fields.begin(), m.fields.end(), [](const auto& f) { return f.first.order >= 2; });
    (high ? higher : kept).add_term(m, c);
  }
  std::map<std::vector<std::pair<FieldSym, int>>, Expr> groups;
  for (const auto& [m, c] : higher.terms()) {
    Monomial k = m;
    k.fields.clear();
    groups[m.fields].add_term(k, c);
  }
  for (const auto& [fields, coef] : groups)
    for (Rational r : roots)
      if (!coef.with_V(r).is_zero())
        throw DerivationMismatch("higher-order unknowns do not cancel: coefficient " + coef.str());
  return kept;
}

struct QkpDerivation {
  SoundSpeed sound;
  Expr evolution;  // d_t n + a n d1 n + b d1^3 n + (1/2) d2 u_i2 = 0
  Expr kp;         // d1(d_t n + a n d1 n + b d1^3 n) + c d2^2 n = 0
  Expr a, b, c;
};

namespace detail {

inline std::vector<std::pair<FieldSym, int>> n1(int d1, int d2 = 0, int dt = 0, int power = 1) {
  return {{FieldSym{FieldName::n_i, 1, d1, d2, dt}, power}};
}

inline std::vector<std::pair<FieldSym, int>> n1_times_n1(int d1a, int d1b) {
  FieldSym a{FieldName::n_i, 1, d1a}, b{FieldName::n_i, 1, d1b};
  if (a == b) return {{a, 2}};
  if (b < a) std::swap(a, b);
  return {{a, 1}, {b, 1}};
}

}  // namespace detail

/// Combines d1(Poisson) + V (mass) + momentum_x1 at grade 2, installs the
/// first-order profile relations, and reads off the KP coefficients.
inline QkpDerivation derive_qkp(std::array<Rule, 2> rule_order = {Rule::profile, Rule::transverse}) {
  const auto eqs = expand_orders(2);
  QkpDerivation out;
  out.sound = solve_sound_speed(eqs);
  const Expr V = Expr::V();

  Expr combined = V * find_equation(eqs, 4, Source::mass).lhs + find_equation(eqs, 4, Source::momentum_x1).lhs +
                  find_equation(eqs, 4, Source::poisson).lhs.diff(Axis::x1);
  combined = eliminate_higher_orders(apply_rules(combined, rule_order), out.sound.roots);

  const Expr lead = combined.coefficient_of(detail::n1(0, 0, 1));
  if (lead.terms().size() != 1) throw DerivationMismatch("time-derivative coefficient is not a monomial: " + lead.str());
  out.evolution = combined * lead.inverse_monomial();

  out.kp = apply_rules(out.evolution.diff(Axis::x1), rule_order);
  out.a = out.kp.coefficient_of(detail::n1_times_n1(0, 2));
  out.b = out.kp.coefficient_of(detail::n1(4));
  out.c = out.kp.coefficient_of(detail::n1(0, 2));

  const Expr n = Expr::field({FieldName::n_i, 1});
  const Expr inner = n.diff(Axis::t) + out.a * n * n.diff(Axis::x1) + out.b * n.diff(Axis::x1, 3);
  const Expr shape = inner.diff(Axis::x1) + out.c * n.diff(Axis::x2, 2);
  if (!(shape == out.kp) || out.a.is_zero() || out.c.is_zero())
    throw DerivationMismatch("combined equation does not reduce to the KP form: " + out.kp.str());
  return out;
}

/// Plain-text report: order equations, solvability condition, KP coefficients.
inline std::string derive_report(Rational max_grade) {
  std::ostringstream os;
  os << "# order equations up to grade " << rational_str(max_grade) << "\n";
  for (const auto& e : expand_orders(max_grade))
    os << "[" << rational_str(e.grade()) << "] " << source_name(e.source) << ": " << e.lhs.str() << " = 0\n";
  const QkpDerivation d = derive_qkp();
  os << "# solvability\n";
  os << "characteristic: " << d.sound.characteristic.str() << "\n";
  os << "roots:";
  for (std::size_t i = 0; i < d.sound.roots.size(); ++i)
    os << (i ? ", " : " ") << rational_str(d.sound.roots[i]);
  os << "\nV: " << rational_str(d.sound.V) << "\n";
  os << "# evolution\n" << d.evolution.str() << " = 0\n";
  os << "# kp\n" << d.kp.str() << " = 0\n";
  os << "# coefficients\n";
  os << "a: " << d.a.str() << "\n";
  os << "b: " << d.b.str() << "\n";
  os << "c: " << d.c.str() << "\n";
  return os.str();
}

}  // namespace qkp::derivation
