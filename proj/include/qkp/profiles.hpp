#pragma once

#include <cmath>

#include "qkp/qep.hpp"

namespace qkp {

/// First-order profiles of the expansion; everything follows from n1.
struct ProfileSet1 {
  RealField2D n1, ne1, ui1_1, ui2_1;
};

/// ne1 = n1, ui1_1 = V n1, ui2_1 = V d1^-1 d2 n1 (zero x1-mean representative).
inline ProfileSet1 build_profiles(const RealField2D& n1, double V) {
  check_zero_x1_means(n1);
  RealField2D ui2 = antideriv_x1(deriv(n1, 0, 1));
  ui2 *= V;
  return {n1, n1, V * n1, std::move(ui2)};
}

/// QEP data n_i = 1 + eps n1, u_i1 = eps V n1, u_i2 = eps^(3/2) ui2_1, with
/// (n_e, phi) solved from the constraint.
inline QepState build_wellprepared(const RealField2D& n1, const QepParams& p) {
  p.validate();
  const ProfileSet1 pr = build_profiles(n1, p.V);
  RealField2D ni = p.eps * pr.n1;
  ni += 1.0;
  return make_qep_state(std::move(ni), p.eps * pr.ui1_1, std::pow(p.eps, 1.5) * pr.ui2_1, p);
}

/// Unscaled time eps^(-3/2) tau covered by scaled time tau.
inline double lab_horizon(double tau, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidParam("eps must lie in (0, 1)");
  if (!(tau >= 0.0)) throw InvalidParam("tau must be non-negative");
  return tau / (eps * std::sqrt(eps));
}

}  // namespace qkp
