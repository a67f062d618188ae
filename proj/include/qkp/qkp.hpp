#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qkp/spectral.hpp"

namespace qkp {

enum class Regime { QKP_I, QKP_II, dKP };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::QKP_I: return "QKP-I";
    case Regime::QKP_II: return "QKP-II";
    case Regime::dKP: return "dKP";
  }
  return "?";
}

/// Exact comparison against 2: H is a declared parameter, not a measurement.
inline Regime classify_regime(double H) {
  if (!(H > 0.0)) throw InvalidParam("H must be positive");
  if (H > 2.0) return Regime::QKP_I;
  if (H < 2.0) return Regime::QKP_II;
  return Regime::dKP;
}

struct QkpCoefficients {
  double a, b, c;
};

inline QkpCoefficients qkp_coefficients(double V, double H) {
  if (V != 1.0 && V != -1.0) throw InvalidParam("V must be +1 or -1");
  if (!(H >= 0.0)) throw InvalidParam("H must be non-negative");
  return {1.5 * V + 0.5 / V, (1.0 - 0.25 * H * H) / (2.0 * V), 0.5 * V};
}

struct QkpParams {
  double V = 1.0;
  double H = 1.0;
  double a = 0.0, b = 0.0, c = 0.0;
  /// Drop the quadratic term (linearized equation).
  bool linear = false;

  QkpParams() : QkpParams(1.0, 1.0) {}
  QkpParams(double v, double h) : V(v), H(h) {
    const auto k = qkp_coefficients(v, h);
    a = k.a;
    b = k.b;
    c = k.c;
  }
};

struct QkpState {
  double t = 0.0;
  RealField2D u;
};

/// Overflow guard for the solution amplitude.
inline constexpr double kBlowupThreshold = 1e12;

namespace detail {

/// Symbol of b d1^3 + c d1^-1 d2^2 (purely imaginary; zero on the j1 = 0 and Nyquist columns).
inline cplx qkp_linear_symbol(const Grid2D& g, const QkpParams& p, int j1, int j2) {
  if (j1 == 0 || j1 == g.n1() / 2) return 0.0;
  const double k1 = g.k1()[j1], k2 = g.k2()[j2];
  return cplx(0.0, p.b * k1 * k1 * k1 - p.c * k2 * k2 / k1);
}

}  // namespace detail

/// -a u d1 u - b d1^3 u - c d1^-1 d2^2 u, dealiased. Requires zero x1-line means.
inline RealField2D qkp_rhs(const QkpState& s, const QkpParams& p) {
  check_zero_x1_means(s.u);
  const Grid2D& g = s.u.grid();
  Spectrum lin = forward(s.u);
  apply_symbol(lin, [&](int j1, int j2) { return detail::qkp_linear_symbol(g, p, j1, j2); });
  if (!p.linear) {
    Spectrum sq = forward(hadamard(s.u, s.u));
    for (int j2 = 0; j2 < g.n2(); ++j2)
      for (int j1 = 0; j1 < g.n1_half(); ++j1)
        lin.at(j1, j2) += -0.5 * p.a * deriv_symbol(g, 1, 0, j1, j2) * sq.at(j1, j2);
  }
  dealias_in_place(lin);
  return inverse(lin);
}

/// Fourth-order exponential time differencing (Kassam-Trefethen) for the QKP
/// equation. The state is held spectrally with the j1 = 0 column pinned to zero.
class QkpIntegrator {
 public:
  QkpIntegrator(const QkpParams& p, const QkpState& init) : p_(p), t_(init.t), v_(forward(init.u)) {
    for (int j2 = 0; j2 < grid().n2(); ++j2) v_.at(0, j2) = 0.0;
    if (!init.u.all_finite()) throw InvalidParam("initial data is not finite");
  }

  const Grid2D& grid() const { return *v_.grid; }
  const QkpParams& params() const { return p_; }
  double time() const { return t_; }
  const Spectrum& spectrum() const { return v_; }
  QkpState state() const { return {t_, inverse(v_)}; }

  /// Integral of u, read from the zero mode.
  double mass() const { return v_.at(0, 0).real() * grid().cell_area(); }
  double l2_sq() const { return spectral_l2_sq(v_); }

  void step(double dt) {
    if (!(dt > 0.0)) throw InvalidParam("dt must be positive");
    if (dt != dt_) prepare(dt);
    const Spectrum nv = nonlinear(v_);
    Spectrum a = combine(e2_, v_, q_, nv);
    const Spectrum na = nonlinear(a);
    Spectrum b = combine(e2_, v_, q_, na);
    const Spectrum nb = nonlinear(b);
    Spectrum c = a;
    const std::size_t m = v_.c.size();
    for (std::size_t i = 0; i < m; ++i) c.c[i] = e2_[i] * a.c[i] + q_[i] * (2.0 * nb.c[i] - nv.c[i]);
    const Spectrum nc = nonlinear(c);
    for (std::size_t i = 0; i < m; ++i)
      v_.c[i] = e_[i] * v_.c[i] + f1_[i] * nv.c[i] + 2.0 * f2_[i] * (na.c[i] + nb.c[i]) + f3_[i] * nc.c[i];
    t_ += dt;
    guard();
  }

  /// Steps of size dt up to t_end; the last step is shortened to land exactly.
  void advance_to(double t_end, double dt) {
    while (t_end - t_ > 1e-12 * std::max(1.0, std::abs(t_end))) step(std::min(dt, t_end - t_));
  }

 private:
  QkpParams p_;
  double t_;
  Spectrum v_;
  double dt_ = -1.0;
  std::vector<cplx> e_, e2_, q_, f1_, f2_, f3_;

  static Spectrum combine(const std::vector<cplx>& e, const Spectrum& v, const std::vector<cplx>& q,
                          const Spectrum& n) {
    Spectrum r = v;
    for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] = e[i] * v.c[i] + q[i] * n.c[i];
    return r;
  }

  /// -(a/2) d1 (u^2), dealiased.
  Spectrum nonlinear(const Spectrum& v) const {
    const Grid2D& g = grid();
    if (p_.linear) return Spectrum{v.grid, std::vector<cplx>(v.c.size(), 0.0)};
    RealField2D u = inverse(v);
    for (double& x : u.values()) x *= x;
    Spectrum s = forward(u);
    for (int j2 = 0; j2 < g.n2(); ++j2)
      for (int j1 = 0; j1 < g.n1_half(); ++j1)
        s.at(j1, j2) = dealiased_out(g, j1, j2) ? 0.0 : -0.5 * p_.a * deriv_symbol(g, 1, 0, j1, j2) * s.at(j1, j2);
    return s;
  }

  // ETDRK4 coefficient functions averaged over M points on a unit circle
  // around h*L, which avoids cancellation near L = 0.
  void prepare(double h) {
    constexpr int kM = 32;
    const Grid2D& g = grid();
    const std::size_t m = v_.c.size();
    e_.assign(m, 0.0), e2_.assign(m, 0.0), q_.assign(m, 0.0);
    f1_.assign(m, 0.0), f2_.assign(m, 0.0), f3_.assign(m, 0.0);
    std::vector<cplx> roots(kM);
    for (int k = 0; k < kM; ++k) roots[k] = std::polar(1.0, std::numbers::pi * (k + 0.5) / (kM / 2));
    for (int j2 = 0; j2 < g.n2(); ++j2)
      for (int j1 = 0; j1 < g.n1_half(); ++j1) {
        const std::size_t i = j1 + g.n1_half() * j2;
        const cplx hl = h * detail::qkp_linear_symbol(g, p_, j1, j2);
        e_[i] = std::exp(hl);
        e2_[i] = std::exp(0.5 * hl);
        cplx q = 0.0, a = 0.0, b = 0.0, c = 0.0;
        for (const cplx& z : roots) {
          const cplx r = hl + z, er = std::exp(r), r3 = r * r * r;
          q += (std::exp(0.5 * r) - 1.0) / r;
          a += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
          b += (2.0 + r + er * (r - 2.0)) / r3;
          c += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
        }
        q_[i] = h * q / double(kM);
        f1_[i] = h * a / double(kM);
        f2_[i] = h * b / double(kM);
        f3_[i] = h * c / double(kM);
      }
    dt_ = h;
  }

  void guard() const {
    // Parseval bound: max|u| <= sum |v_hat| * 2 / N.
    double bound = 0.0;
    for (const cplx& z : v_.c) bound += std::abs(z);
    bound *= 2.0 / static_cast<double>(grid().size());
    if (!std::isfinite(bound)) throw Blowup(t_, bound);
    if (bound > kBlowupThreshold) {
      const double m = inverse(v_).max_abs();
      if (!std::isfinite(m) || m > kBlowupThreshold) throw Blowup(t_, m);
    }
  }
};

/// One ETDRK4 step. Initial x1-line means are projected out.
inline QkpState qkp_step(const QkpState& s, const QkpParams& p, double dt) {
  QkpIntegrator it(p, s);
  it.step(dt);
  return it.state();
}

/// cfl * min(1 / (|a| ||u||_inf k1max), 0.1); the dispersive part is integrated exactly.
inline double suggest_dt(const QkpState& s, const QkpParams& p, double cfl) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw InvalidParam("cfl must lie in (0, 1]");
  constexpr double kCap = 0.1;
  const double rate = std::abs(p.a) * s.u.max_abs() * s.u.grid().k1max();
  return cfl * (rate > 0.0 ? std::min(1.0 / rate, kCap) : kCap);
}

}  // namespace qkp
