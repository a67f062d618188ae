#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "qkp/field.hpp"

namespace qkp {

using cplx = std::complex<double>;

/// Absolute tolerance on x1-line means for the anti-derivative precondition.
inline constexpr double kMeanTolerance = 1e-10;

/// Half-complex spectrum of a RealField2D (unnormalized FFTW convention).
struct Spectrum {
  GridPtr grid;
  std::vector<cplx> c;

  const Grid2D& g() const { return *grid; }
  cplx& at(int j1, int j2) { return c[j1 + grid->n1_half() * j2]; }
  cplx at(int j1, int j2) const { return c[j1 + grid->n1_half() * j2]; }
};

namespace detail {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  FftPlan(int n1, int n2) : n_(n1 * n2), m_(n2 * (n1 / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    in_ = fftw_alloc_real(n_);
    out_ = fftw_alloc_complex(m_);
    fwd_ = fftw_plan_dft_r2c_2d(n2, n1, in_, out_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_2d(n2, n1, out_, in_, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(in_);
    fftw_free(out_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(std::span<const double> x, std::vector<cplx>& y) {
    std::copy(x.begin(), x.end(), in_);
    fftw_execute(fwd_);
    y.resize(m_);
    auto* o = reinterpret_cast<cplx*>(out_);
    std::copy(o, o + m_, y.begin());
  }
  // c2r overwrites its input, hence the copy into out_.
  void inverse(const std::vector<cplx>& y, std::span<double> x) {
    std::copy(y.begin(), y.end(), reinterpret_cast<cplx*>(out_));
    fftw_execute(inv_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) x[i] = in_[i] * scale;
  }

 private:
  int n_, m_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

/// Per-thread transform workspace, one per grid shape.
inline FftPlan& plan_for(const Grid2D& g) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[{g.n1(), g.n2()}];
  if (!slot) slot = std::make_unique<FftPlan>(g.n1(), g.n2());
  return *slot;
}

inline cplx ipow(cplx z, int p) {
  cplx r = 1.0;
  for (int i = 0; i < p; ++i) r *= z;
  return r;
}

}  // namespace detail

inline Spectrum forward(const RealField2D& f) {
  Spectrum s{f.grid_ptr(), {}};
  detail::plan_for(f.grid()).forward(f.values(), s.c);
  return s;
}

inline RealField2D inverse(const Spectrum& s) {
  RealField2D f(s.grid);
  detail::plan_for(*s.grid).inverse(s.c, f.values());
  return f;
}

/// Symbol of d^a/dx1^a d^b/dx2^b at spectral index (j1, j2).
/// Odd-order derivatives annihilate the Nyquist mode so real fields stay real.
inline cplx deriv_symbol(const Grid2D& g, int a, int b, int j1, int j2) {
  if ((a % 2 == 1 && j1 == g.n1() / 2) || (b % 2 == 1 && j2 == g.n2() / 2)) return 0.0;
  return detail::ipow(cplx(0.0, g.k1()[j1]), a) * detail::ipow(cplx(0.0, g.k2()[j2]), b);
}

/// Multiply a spectrum in place by a per-mode symbol m(j1, j2).
template <class F>
void apply_symbol(Spectrum& s, F&& m) {
  const Grid2D& g = s.g();
  for (int j2 = 0; j2 < g.n2(); ++j2)
    for (int j1 = 0; j1 < g.n1_half(); ++j1) s.at(j1, j2) *= m(j1, j2);
}

inline void deriv_in_place(Spectrum& s, int a, int b) {
  if (a == 0 && b == 0) return;
  const Grid2D& g = s.g();
  apply_symbol(s, [&](int j1, int j2) { return deriv_symbol(g, a, b, j1, j2); });
}

/// Spectral derivative d^a/dx1^a d^b/dx2^b f.
inline RealField2D deriv(const RealField2D& f, int a, int b) {
  if (a < 0 || b < 0) throw InvalidParam("derivative orders must be non-negative");
  if (a == 0 && b == 0) return f;
  Spectrum s = forward(f);
  deriv_in_place(s, a, b);
  return inverse(s);
}

/// Means of f along x1, one per x2 row.
inline std::vector<double> x1_line_means(const RealField2D& f) {
  const Grid2D& g = f.grid();
  std::vector<double> m(g.n2(), 0.0);
  for (int i2 = 0; i2 < g.n2(); ++i2) {
    double s = 0.0;
    for (int i1 = 0; i1 < g.n1(); ++i1) s += f(i1, i2);
    m[i2] = s / g.n1();
  }
  return m;
}

inline void check_zero_x1_means(const RealField2D& f, double tol = kMeanTolerance) {
  auto means = x1_line_means(f);
  for (int i2 = 0; i2 < static_cast<int>(means.size()); ++i2)
    if (std::abs(means[i2]) > tol) throw NonZeroMean(means[i2], i2);
}

/// Remove each x1-line mean (projects onto the KP constraint).
inline RealField2D remove_x1_means(const RealField2D& f) {
  Spectrum s = forward(f);
  for (int j2 = 0; j2 < s.g().n2(); ++j2) s.at(0, j2) = 0.0;
  return inverse(s);
}

/// In-place inverse of d/dx1 on the zero-x1-mean subspace.
inline void antideriv_x1_in_place(Spectrum& s) {
  const Grid2D& g = s.g();
  const int nyq = g.n1() / 2;
  apply_symbol(s, [&](int j1, int) -> cplx {
    if (j1 == 0 || j1 == nyq) return 0.0;
    return 1.0 / cplx(0.0, g.k1()[j1]);
  });
}

/// g with dg/dx1 = f and zero x1-mean on every line. Throws NonZeroMean.
inline RealField2D antideriv_x1(const RealField2D& f) {
  check_zero_x1_means(f);
  Spectrum s = forward(f);
  antideriv_x1_in_place(s);
  return inverse(s);
}

/// True if spectral index is removed by the 2/3 rule.
inline bool dealiased_out(const Grid2D& g, int j1, int j2) {
  return 3 * j1 >= g.n1() || 3 * std::abs(g.wave_index2(j2)) >= g.n2();
}

inline void dealias_in_place(Spectrum& s) {
  const Grid2D& g = s.g();
  for (int j2 = 0; j2 < g.n2(); ++j2)
    for (int j1 = 0; j1 < g.n1_half(); ++j1)
      if (dealiased_out(g, j1, j2)) s.at(j1, j2) = 0.0;
}

inline RealField2D dealias(const RealField2D& f) {
  Spectrum s = forward(f);
  dealias_in_place(s);
  return inverse(s);
}

/// Dealiased pointwise product.
inline RealField2D product(const RealField2D& a, const RealField2D& b) {
  return dealias(hadamard(a, b));
}

/// Weight of spectral column j1 in a half-complex Parseval sum.
inline double hermitian_weight(const Grid2D& g, int j1) {
  return (j1 == 0 || j1 == g.n1() / 2) ? 1.0 : 2.0;
}

/// Continuum L2 norm squared, computed from the spectrum.
inline double spectral_l2_sq(const Spectrum& s) {
  const Grid2D& g = s.g();
  double acc = 0.0;
  for (int j2 = 0; j2 < g.n2(); ++j2)
    for (int j1 = 0; j1 < g.n1_half(); ++j1) acc += hermitian_weight(g, j1) * std::norm(s.at(j1, j2));
  const double n = static_cast<double>(g.size());
  return acc * g.l1() * g.l2() / (n * n);
}

/// Continuum L2 norm squared from grid samples.
inline double grid_l2_sq(const RealField2D& f) {
  double s = 0.0;
  for (double x : f.values()) s += x * x;
  return s * f.grid().cell_area();
}

/// Translate f by s along x1: returns f(x1 - s, x2).
inline RealField2D shift_x1(const RealField2D& f, double shift) {
  Spectrum s = forward(f);
  const Grid2D& g = s.g();
  const int nyq = g.n1() / 2;
  apply_symbol(s, [&](int j1, int) -> cplx {
    const double ph = g.k1()[j1] * shift;
    if (j1 == nyq) return std::cos(ph);
    return std::polar(1.0, -ph);
  });
  return inverse(s);
}

}  // namespace qkp
