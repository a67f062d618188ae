#pragma once

#include <array>
#include <cmath>
#include <map>

#include "qkp/spectral.hpp"

namespace qkp {

enum class NormField { N_i, N_e, U1, U2 };

inline const char* norm_field_name(NormField f) {
  switch (f) {
    case NormField::N_i: return "N_i";
    case NormField::N_e: return "N_e";
    case NormField::U1: return "U1";
    case NormField::U2: return "U2";
  }
  return "?";
}

/// Highest total derivative order alpha + beta entering the triple norm.
inline int triple_norm_order(NormField f) {
  switch (f) {
    case NormField::N_i: return 3;
    case NormField::N_e: return 7;
    default: return 4;
  }
}

struct NormTerm {
  NormField field;
  int alpha, beta;
  auto operator<=>(const NormTerm&) const = default;
};

struct NormContribution {
  double weight;       // eps^(alpha + 2 beta)
  double seminorm_sq;  // ||d1^alpha d2^beta f||^2
  double value;        // weight * seminorm_sq
};

struct TripleNormReport {
  double eps = 0.0;
  std::map<NormTerm, NormContribution> contributions;
  double total = 0.0;  // sum of the stored values, in map order
};

/// ||d1^a d2^b f||^2 with continuum normalization, by Parseval.
inline double seminorm_sq(const Spectrum& s, int a, int b) {
  const Grid2D& g = s.g();
  double acc = 0.0;
  for (int j2 = 0; j2 < g.n2(); ++j2)
    for (int j1 = 0; j1 < g.n1_half(); ++j1)
      acc += hermitian_weight(g, j1) * std::norm(deriv_symbol(g, a, b, j1, j2) * s.at(j1, j2));
  const double n = static_cast<double>(g.size());
  return acc * g.l1() * g.l2() / (n * n);
}

inline TripleNormReport triple_norm(const RealField2D& n_i, const RealField2D& n_e, const RealField2D& u1,
                                   const RealField2D& u2, double eps) {
  if (!(eps > 0.0)) throw InvalidParam("eps must be positive");
  n_i.require_same_grid(n_e);
  n_i.require_same_grid(u1);
  n_i.require_same_grid(u2);
  TripleNormReport r;
  r.eps = eps;
  const std::array<std::pair<NormField, const RealField2D*>, 4> fields{
      {{NormField::N_i, &n_i}, {NormField::N_e, &n_e}, {NormField::U1, &u1}, {NormField::U2, &u2}}};
  for (const auto& [name, f] : fields) {
    const Spectrum s = forward(*f);
    const int top = triple_norm_order(name);
    for (int a = 0; a <= top; ++a)
      for (int b = 0; a + b <= top; ++b) {
        const double w = std::pow(eps, a + 2 * b), sn = seminorm_sq(s, a, b);
        r.contributions[{name, a, b}] = {w, sn, w * sn};
      }
  }
  for (const auto& [k, c] : r.contributions) r.total += c.value;
  return r;
}

/// (||f-g||^2 + ||d1(f-g)||^2 + ||d2(f-g)||^2)^(1/2).
inline double h1_error(const RealField2D& f, const RealField2D& g) {
  f.require_same_grid(g);
  const Spectrum s = forward(f - g);
  return std::sqrt(seminorm_sq(s, 0, 0) + seminorm_sq(s, 1, 0) + seminorm_sq(s, 0, 1));
}

}  // namespace qkp
