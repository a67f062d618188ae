#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>

#include "qkp/newton.hpp"
#include "qkp/spectral.hpp"

namespace qkp {

struct QepParams {
  double eps = 0.1;
  double V = 1.0;
  double H = 1.0;
  /// Elliptic solves stop at ||F||_2 <= newton_tol * sqrt(gridpoints).
  double newton_tol = 1e-12;
  int max_newton = 50;

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidParam("eps must lie in (0, 1)");
    if (!(H > 0.0)) throw InvalidParam("H must be positive");
    if (!std::isfinite(V)) throw InvalidParam("V must be finite");
    if (!(newton_tol > 0.0)) throw InvalidParam("newton_tol must be positive");
  }
};

/// Densities outside this window set QepState::window_exit (a warning only).
inline constexpr double kWindowLow = 0.5;
inline constexpr double kWindowHigh = 1.5;

struct QepState {
  double t = 0.0;
  RealField2D n_i, u_i1, u_i2;
  RealField2D n_e, phi;  // slaved to n_i through solve_electron
  bool window_exit = false;
  int newton_iterations = 0;     // of the last elliptic solve
  double elliptic_residual = 0;  // ||F||_2 of the cached (n_e, phi)
};

namespace detail {

/// Applies eps d1^2 + eps^2 d2^2.
inline RealField2D scaled_laplacian(const RealField2D& f, double eps) {
  const Grid2D& g = f.grid();
  Spectrum s = forward(f);
  apply_symbol(s, [&](int j1, int j2) {
    const double k1 = g.k1()[j1], k2 = g.k2()[j2];
    return -(eps * k1 * k1 + eps * eps * k2 * k2);
  });
  return inverse(s);
}

inline double kappa(const Grid2D& g, double eps, int j1, int j2) {
  const double k1 = g.k1()[j1], k2 = g.k2()[j2];
  return eps * k1 * k1 + eps * eps * k2 * k2;
}

inline void require_positive(const RealField2D& f) {
  const double m = f.min();
  if (!(m > 0.0)) throw NonPositiveDensity(m);
}

}  // namespace detail

/// phi = -1/2 + n_e^2/2 - (H^2/2) (eps d1^2 + eps^2 d2^2) sqrt(n_e) / sqrt(n_e), products dealiased.
inline RealField2D bohm_potential(const RealField2D& n_e, double eps, double H) {
  detail::require_positive(n_e);
  const RealField2D s = n_e.map([](double v) { return std::sqrt(v); });
  const RealField2D lap = detail::scaled_laplacian(s, eps);
  RealField2D ratio = lap;
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] /= s[i];
  RealField2D phi = 0.5 * product(n_e, n_e);
  phi.axpy(-0.5 * H * H, dealias(ratio));
  phi += -0.5;
  return phi;
}

/// eps d1^2 phi + eps^2 d2^2 phi - n_e + n_i.
inline RealField2D elliptic_residual(const RealField2D& n_e, const RealField2D& phi, const RealField2D& n_i,
                                     double eps) {
  RealField2D r = detail::scaled_laplacian(phi, eps);
  r -= n_e;
  r += n_i;
  return r;
}

struct ElectronSolution {
  RealField2D n_e, phi;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton solve of eps d1^2 phi(n_e) + eps^2 d2^2 phi(n_e) = n_e - n_i for n_e.
inline ElectronSolution solve_electron(const RealField2D& n_i, const QepParams& p, const RealField2D& guess) {
  p.validate();
  n_i.require_same_grid(guess);
  detail::require_positive(n_i);
  detail::require_positive(guess);
  const Grid2D& g = n_i.grid();
  const double eps = p.eps, h2 = p.H * p.H;

  auto residual = [&](const RealField2D& ne) { return elliptic_residual(ne, bohm_potential(ne, eps, p.H), n_i, eps); };
  auto jacobian = [&](const RealField2D& ne, const RealField2D& d) {
    const RealField2D s = ne.map([](double v) { return std::sqrt(v); });
    const RealField2D ls = detail::scaled_laplacian(s, eps);
    RealField2D half = d;  // d / (2 s)
    for (std::size_t i = 0; i < half.size(); ++i) half[i] /= 2.0 * s[i];
    RealField2D bohm = detail::scaled_laplacian(half, eps);
    for (std::size_t i = 0; i < bohm.size(); ++i) bohm[i] = bohm[i] / s[i] - ls[i] * half[i] / (s[i] * s[i]);
    RealField2D dphi = product(ne, d);
    dphi.axpy(-0.5 * h2, dealias(bohm));
    RealField2D out = detail::scaled_laplacian(dphi, eps);
    out -= d;
    return out;
  };
  NewtonOptions opts;
  opts.precondition = [&](const RealField2D& r) {
    Spectrum s = forward(r);
    apply_symbol(s, [&](int j1, int j2) {
      const double k = detail::kappa(g, eps, j1, j2);
      return -1.0 / (1.0 + k + 0.25 * h2 * k * k);
    });
    return inverse(s);
  };
  opts.admissible = [](const RealField2D& ne) { return ne.min() > 0.0; };

  const double tol = p.newton_tol * std::sqrt(static_cast<double>(g.size()));
  NewtonResult res;
  try {
    res = newton_solve(residual, jacobian, guess, tol, p.max_newton, opts);
  } catch (const InadmissibleIterate& e) {
    throw NonPositiveDensity(e.iterate.min());
  }
  ElectronSolution out{res.x, bohm_potential(res.x, eps, p.H), res.iterations, res.residual_norm};
  return out;
}

/// State with slaved fields solved from n_i (guess: n_i itself).
inline QepState make_qep_state(RealField2D n_i, RealField2D u_i1, RealField2D u_i2, const QepParams& p,
                               double t = 0.0) {
  n_i.require_same_grid(u_i1);
  n_i.require_same_grid(u_i2);
  auto el = solve_electron(n_i, p, n_i);
  QepState s{t, std::move(n_i), std::move(u_i1), std::move(u_i2), std::move(el.n_e), std::move(el.phi)};
  s.newton_iterations = el.iterations;
  s.elliptic_residual = el.residual;
  return s;
}

struct QepRhs {
  RealField2D n_i, u_i1, u_i2;
};

/// Time derivatives of (n_i, u_i1, u_i2) from the cached (n_e, phi).
inline QepRhs qep_rhs(const QepState& s, const QepParams& p) {
  const double inv = 1.0 / p.eps, rs = std::sqrt(p.eps);
  const RealField2D d1u1 = deriv(s.u_i1, 1, 0), d2u1 = deriv(s.u_i1, 0, 1);
  const RealField2D d1u2 = deriv(s.u_i2, 1, 0), d2u2 = deriv(s.u_i2, 0, 1);

  RealField2D dn = p.V * deriv(s.n_i, 1, 0);
  dn -= deriv(product(s.n_i, s.u_i1), 1, 0);
  dn.axpy(-rs, deriv(product(s.n_i, s.u_i2), 0, 1));

  RealField2D du1 = p.V * d1u1;
  du1 -= product(s.u_i1, d1u1);
  du1.axpy(-rs, product(s.u_i2, d2u1));
  du1 -= deriv(s.phi, 1, 0);

  RealField2D du2 = p.V * d1u2;
  du2 -= product(s.u_i1, d1u2);
  du2.axpy(-rs, product(s.u_i2, d2u2));
  du2.axpy(-rs, deriv(s.phi, 0, 1));

  return {inv * dn, inv * du1, inv * du2};
}

namespace detail {

inline void refresh_electrons(QepState& s, const QepParams& p) {
  auto el = solve_electron(s.n_i, p, s.n_e);
  s.n_e = std::move(el.n_e);
  s.phi = std::move(el.phi);
  s.newton_iterations = el.iterations;
  s.elliptic_residual = el.residual;
}

inline QepState stage(const QepState& base, const QepRhs& k, double h, const QepParams& p) {
  QepState s = base;
  s.n_i.axpy(h, k.n_i);
  s.u_i1.axpy(h, k.u_i1);
  s.u_i2.axpy(h, k.u_i2);
  refresh_electrons(s, p);
  return s;
}

}  // namespace detail

/// Classical RK4; the electron constraint is re-solved at every stage.
inline QepState qep_step(const QepState& s, const QepParams& p, double dt) {
  if (!(dt > 0.0)) throw InvalidParam("dt must be positive");
  const QepRhs k1 = qep_rhs(s, p);
  const QepRhs k2 = qep_rhs(detail::stage(s, k1, 0.5 * dt, p), p);
  const QepRhs k3 = qep_rhs(detail::stage(s, k2, 0.5 * dt, p), p);
  const QepRhs k4 = qep_rhs(detail::stage(s, k3, dt, p), p);

  QepState out = s;
  const double w = dt / 6.0;
  for (auto [f, a, b, c, d] : {std::tuple{&out.n_i, &k1.n_i, &k2.n_i, &k3.n_i, &k4.n_i},
                               std::tuple{&out.u_i1, &k1.u_i1, &k2.u_i1, &k3.u_i1, &k4.u_i1},
                               std::tuple{&out.u_i2, &k1.u_i2, &k2.u_i2, &k3.u_i2, &k4.u_i2}}) {
    f->axpy(w, *a);
    f->axpy(2 * w, *b);
    f->axpy(2 * w, *c);
    f->axpy(w, *d);
  }
  out.t = s.t + dt;
  for (const RealField2D* f : {&out.n_i, &out.u_i1, &out.u_i2}) {
    const double m = f->max_abs();
    if (!std::isfinite(m) || m > 1e12) throw Blowup(out.t, m);
  }
  detail::refresh_electrons(out, p);
  for (const RealField2D* f : {&out.n_i, &out.n_e})
    if (f->min() <= kWindowLow || f->max() >= kWindowHigh) out.window_exit = true;
  return out;
}

/// min(advective limit, quantum cap); see the README for the formula.
inline double suggest_dt_qep(const QepState& s, const QepParams& p, double cfl) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw InvalidParam("cfl must lie in (0, 1]");
  const Grid2D& g = s.n_i.grid();
  const double umax = std::max(s.u_i1.max_abs(), s.u_i2.max_abs());
  const double sound = std::sqrt(std::max(s.n_i.max(), 0.0) * std::max(s.n_e.max(), 0.0));
  const double lambda = (std::abs(p.V) + umax + sound) / p.eps;
  const double adv = cfl / (lambda * g.k1max() + std::sqrt(p.eps) * lambda * g.k2max());
  const double quantum = cfl * p.eps / (1.0 + 0.5 * p.H * p.eps * g.k1max() * g.k1max());
  return std::min(adv, quantum);
}

}  // namespace qkp
