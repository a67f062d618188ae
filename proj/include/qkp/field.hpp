#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "qkp/errors.hpp"

namespace qkp {

/// Periodic rectangular grid on [-l1/2, l1/2) x [-l2/2, l2/2).
///
/// Samples are stored row-major with x1 fastest. The real-to-half-complex
/// spectrum has n2 rows of n1/2+1 coefficients; k1 runs over the
/// non-negative half, k2 over the usual FFT ordering.
class Grid2D {
 public:
  Grid2D(int n1, int n2, double l1, double l2) : n1_(n1), n2_(n2), l1_(l1), l2_(l2) {
    if (n1 < 4 || n2 < 4 || n1 % 2 != 0 || n2 % 2 != 0)
      throw InvalidParam("grid mode counts must be even and >= 4");
    if (!(l1 > 0.0) || !(l2 > 0.0) || !std::isfinite(l1) || !std::isfinite(l2))
      throw InvalidParam("grid periods must be positive and finite");
    const double two_pi = 2.0 * std::numbers::pi;
    k1_.resize(n1 / 2 + 1);
    for (int j = 0; j <= n1 / 2; ++j) k1_[j] = two_pi * j / l1;
    k2_.resize(n2);
    for (int j = 0; j < n2; ++j) k2_[j] = two_pi * wave_index2(j) / l2;
  }

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  double l1() const { return l1_; }
  double l2() const { return l2_; }
  int size() const { return n1_ * n2_; }
  int n1_half() const { return n1_ / 2 + 1; }
  int spectral_size() const { return n2_ * n1_half(); }
  double dx1() const { return l1_ / n1_; }
  double dx2() const { return l2_ / n2_; }
  double cell_area() const { return dx1() * dx2(); }

  double x1(int i1) const { return -0.5 * l1_ + i1 * dx1(); }
  double x2(int i2) const { return -0.5 * l2_ + i2 * dx2(); }

  /// Signed integer wave index of spectral row j2.
  int wave_index2(int j2) const { return j2 <= n2_ / 2 ? j2 : j2 - n2_; }

  std::span<const double> k1() const { return k1_; }
  std::span<const double> k2() const { return k2_; }
  double k1max() const { return k1_.back(); }
  double k2max() const { return std::abs(k2_[n2_ / 2]); }

  bool same_shape(const Grid2D& o) const {
    return n1_ == o.n1_ && n2_ == o.n2_ && l1_ == o.l1_ && l2_ == o.l2_;
  }

 private:
  int n1_, n2_;
  double l1_, l2_;
  std::vector<double> k1_, k2_;
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr make_grid(int n1, int n2, double l1, double l2) {
  return std::make_shared<const Grid2D>(n1, n2, l1, l2);
}

/// One real scalar sampled on a Grid2D.
class RealField2D {
 public:
  RealField2D() = default;
  explicit RealField2D(GridPtr g, double value = 0.0)
      : grid_(std::move(g)), v_(static_cast<std::size_t>(grid_->size()), value) {}
  RealField2D(GridPtr g, std::vector<double> values) : grid_(std::move(g)), v_(std::move(values)) {
    if (static_cast<int>(v_.size()) != grid_->size())
      throw InvalidParam("sample count does not match grid");
  }

  template <class F>
  static RealField2D from_function(GridPtr g, F&& f) {
    RealField2D r(g);
    for (int i2 = 0; i2 < g->n2(); ++i2)
      for (int i1 = 0; i1 < g->n1(); ++i1) r(i1, i2) = f(g->x1(i1), g->x2(i2));
    return r;
  }

  const Grid2D& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  bool empty() const { return !grid_; }

  double& operator()(int i1, int i2) { return v_[i1 + grid_->n1() * i2]; }
  double operator()(int i1, int i2) const { return v_[i1 + grid_->n1() * i2]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::size_t size() const { return v_.size(); }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  bool shares_grid(const RealField2D& o) const {
    return grid_ == o.grid_ || (grid_ && o.grid_ && grid_->same_shape(*o.grid_));
  }
  void require_same_grid(const RealField2D& o) const {
    if (!shares_grid(o)) throw GridMismatch();
  }

  bool all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  double min() const { return *std::min_element(v_.begin(), v_.end()); }
  double max() const { return *std::max_element(v_.begin(), v_.end()); }
  double sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }
  /// Cell-area weighted integral.
  double integral() const { return sum() * grid_->cell_area(); }

  template <class F>
  RealField2D map(F&& f) const {
    RealField2D r(grid_);
    for (std::size_t i = 0; i < v_.size(); ++i) r.v_[i] = f(v_[i]);
    return r;
  }

  RealField2D& operator+=(const RealField2D& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  RealField2D& operator-=(const RealField2D& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  RealField2D& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }
  RealField2D& operator+=(double s) {
    for (double& x : v_) x += s;
    return *this;
  }
  /// this += s * o
  RealField2D& axpy(double s, const RealField2D& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
    return *this;
  }

  friend RealField2D operator+(RealField2D a, const RealField2D& b) { return a += b; }
  friend RealField2D operator-(RealField2D a, const RealField2D& b) { return a -= b; }
  friend RealField2D operator*(RealField2D a, double s) { return a *= s; }
  friend RealField2D operator*(double s, RealField2D a) { return a *= s; }
  friend RealField2D operator+(RealField2D a, double s) { return a += s; }
  friend RealField2D operator-(RealField2D a) { return a *= -1.0; }

  /// Pointwise product (aliasing is the caller's concern).
  friend RealField2D hadamard(const RealField2D& a, const RealField2D& b) {
    a.require_same_grid(b);
    RealField2D r(a.grid_);
    for (std::size_t i = 0; i < a.v_.size(); ++i) r.v_[i] = a.v_[i] * b.v_[i];
    return r;
  }

 private:
  GridPtr grid_;
  std::vector<double> v_;
};

/// Plain discrete l2 norm sqrt(sum v^2), no area weight.
inline double discrete_l2(const RealField2D& f) {
  double s = 0.0;
  for (double x : f.values()) s += x * x;
  return std::sqrt(s);
}

inline double dot(const RealField2D& a, const RealField2D& b) {
  a.require_same_grid(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace qkp
