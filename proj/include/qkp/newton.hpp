#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "qkp/field.hpp"

namespace qkp {

using FieldOperator = std::function<RealField2D(const RealField2D&)>;
/// (x, v) -> J(x) v
using JacobianApply = std::function<RealField2D(const RealField2D&, const RealField2D&)>;

struct LinearSolveResult {
  RealField2D x;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Right-preconditioned BiCGSTAB for A x = b, stopping on ||b - A x||_2 <= tol.
inline LinearSolveResult bicgstab(const FieldOperator& apply_a, const RealField2D& b,
                                  const FieldOperator& precondition, double tol,
                                  int max_iter = 200) {
  auto prec = [&](const RealField2D& v) { return precondition ? precondition(v) : v; };
  LinearSolveResult out{RealField2D(b.grid_ptr()), 0, discrete_l2(b), false};
  if (out.residual_norm <= tol) {
    out.converged = true;
    return out;
  }
  RealField2D r = b;
  const RealField2D r_hat = b;
  RealField2D p(b.grid_ptr()), v(b.grid_ptr());
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const double rho_new = dot(r_hat, r);
    if (rho_new == 0.0) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    // p = r + beta (p - omega v)
    p.axpy(-omega, v);
    p *= beta;
    p += r;
    RealField2D p_prec = prec(p);
    v = apply_a(p_prec);
    const double denom = dot(r_hat, v);
    if (denom == 0.0) break;
    alpha = rho / denom;
    out.x.axpy(alpha, p_prec);
    RealField2D s = r;
    s.axpy(-alpha, v);
    out.iterations = it;
    if (discrete_l2(s) <= tol) {
      out.residual_norm = discrete_l2(s);
      out.converged = true;
      return out;
    }
    RealField2D s_prec = prec(s);
    RealField2D t = apply_a(s_prec);
    const double tt = dot(t, t);
    omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
    out.x.axpy(omega, s_prec);
    r = std::move(s);
    r.axpy(-omega, t);
    out.residual_norm = discrete_l2(r);
    if (out.residual_norm <= tol) {
      out.converged = true;
      return out;
    }
    if (omega == 0.0) break;
  }
  return out;
}

struct NewtonOptions {
  /// Applied to Krylov directions; identity when empty.
  FieldOperator precondition;
  /// Iterates failing this test are backtracked (e.g. positivity).
  std::function<bool(const RealField2D&)> admissible;
  int max_backtrack = 30;
  int max_linear_iter = 200;
};

struct NewtonResult {
  RealField2D x;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Thrown by newton_solve when backtracking cannot restore admissibility.
class InadmissibleIterate : public Error {
 public:
  explicit InadmissibleIterate(const RealField2D& last)
      : Error("newton iterate left the admissible set"), iterate(last) {}
  RealField2D iterate;
};

/// Inexact Newton iteration until ||residual(x)||_2 <= tol.
/// Each linear solve runs BiCGSTAB to an absolute tolerance of tol/10.
inline NewtonResult newton_solve(const FieldOperator& residual, const JacobianApply& jacobian_apply,
                                 const RealField2D& guess, double tol, int max_iter,
                                 const NewtonOptions& opts = {}) {
  if (!(tol > 0.0)) throw InvalidParam("newton tolerance must be positive");
  NewtonResult res{guess, 0, 0.0};
  RealField2D f = residual(res.x);
  res.residual_norm = discrete_l2(f);
  while (res.residual_norm > tol) {
    if (res.iterations >= max_iter) throw NoConvergence(res.iterations, res.residual_norm);
    const RealField2D x0 = res.x;
    auto apply_j = [&](const RealField2D& v) { return jacobian_apply(x0, v); };
    LinearSolveResult lin =
        bicgstab(apply_j, -f, opts.precondition, tol / 10.0, opts.max_linear_iter);

    double step = 1.0;
    RealField2D trial = x0 + lin.x;
    int backtracks = 0;
    while (opts.admissible && !opts.admissible(trial)) {
      if (++backtracks > opts.max_backtrack) throw InadmissibleIterate(trial);
      step *= 0.5;
      trial = x0;
      trial.axpy(step, lin.x);
    }
    RealField2D f_trial = residual(trial);
    double norm_trial = discrete_l2(f_trial);
    // Halve the step while the residual grows.
    while (!(norm_trial < res.residual_norm) && backtracks < opts.max_backtrack) {
      ++backtracks;
      step *= 0.5;
      RealField2D t2 = x0;
      t2.axpy(step, lin.x);
      if (opts.admissible && !opts.admissible(t2)) continue;
      RealField2D f2 = residual(t2);
      const double n2 = discrete_l2(f2);
      if (!std::isfinite(n2)) continue;
      trial = std::move(t2);
      f_trial = std::move(f2);
      norm_trial = n2;
    }
    ++res.iterations;
    if (!std::isfinite(norm_trial)) throw NoConvergence(res.iterations, norm_trial);
    res.x = std::move(trial);
    f = std::move(f_trial);
    res.residual_norm = norm_trial;
  }
  return res;
}

}  // namespace qkp
