#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qkp/field_io.hpp"
#include "qkp/norms.hpp"
#include "qkp/profiles.hpp"
#include "qkp/qkp.hpp"

namespace qkp {

/// First-order profile n1 at t = 0.
struct InitSpec {
  enum class Kind { dgauss, d2gauss, mode, file };
  Kind kind = Kind::d2gauss;
  double amplitude = 0.25;
  // dgauss: A sqrt(2e) (x1/w) exp(-r^2/w^2), peak |n1| = A
  // d2gauss: A (1 - 2 x1^2/w^2) exp(-r^2/w^2)
  double width = 5.0;
  int m1 = 1, m2 = 1;  // mode: A sin(2 pi m1 x1/l1) cos(2 pi m2 x2/l2)
  std::string path;    // file: QKPF dump on the study grid
};

inline InitSpec::Kind init_kind_from(const std::string& s) {
  if (s == "dgauss") return InitSpec::Kind::dgauss;
  if (s == "d2gauss") return InitSpec::Kind::d2gauss;
  if (s == "mode") return InitSpec::Kind::mode;
  if (s == "file") return InitSpec::Kind::file;
  throw InvalidParam("unknown init kind '" + s + "'");
}

struct StudyConfig {
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  double tau = 1.0;
  int n1 = 128, n2 = 32;
  double l1 = 80.0, l2 = 40.0;
  double H = 1.0, V = 1.0;
  double cfl = 0.5;
  int snapshots = 10;  // comparison times k tau / snapshots, k = 0..snapshots
  double newton_tol = 1e-12;
  InitSpec init;
  std::string out_csv;

  void validate() const {
    if (eps_list.size() < 3) throw InvalidParam("eps_list needs at least 3 entries");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
      if (!(eps_list[i] > 0.0 && eps_list[i] < 1.0)) throw InvalidParam("eps values must lie in (0, 1)");
      if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw InvalidParam("eps_list must be strictly decreasing");
    }
    if (!(tau >= 0.0)) throw InvalidParam("tau must be non-negative");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw InvalidParam("cfl must lie in (0, 1]");
    if (snapshots < 1) throw InvalidParam("snapshots must be positive");
    qkp_coefficients(V, H);
    classify_regime(H);
  }
};

inline RealField2D make_initial_profile(const InitSpec& in, const GridPtr& g) {
  RealField2D n1(g);
  switch (in.kind) {
    case InitSpec::Kind::dgauss: {
      if (!(in.width > 0.0)) throw InvalidParam("init width must be positive");
      const double w = in.width, scale = in.amplitude * std::sqrt(2.0 * std::exp(1.0));
      n1 = RealField2D::from_function(
          g, [&](double x1, double x2) { return scale * (x1 / w) * std::exp(-(x1 * x1 + x2 * x2) / (w * w)); });
      break;
    }
    case InitSpec::Kind::d2gauss: {
      if (!(in.width > 0.0)) throw InvalidParam("init width must be positive");
      const double w = in.width;
      n1 = RealField2D::from_function(g, [&](double x1, double x2) {
        return in.amplitude * (1.0 - 2.0 * x1 * x1 / (w * w)) * std::exp(-(x1 * x1 + x2 * x2) / (w * w));
      });
      break;
    }
    case InitSpec::Kind::mode: {
      if (in.m1 < 1) throw InvalidParam("init m1 must be positive (KP constraint)");
      const double k1 = 2 * std::numbers::pi * in.m1 / g->l1(), k2 = 2 * std::numbers::pi * in.m2 / g->l2();
      n1 = RealField2D::from_function(
          g, [&](double x1, double x2) { return in.amplitude * std::sin(k1 * x1) * std::cos(k2 * x2); });
      break;
    }
    case InitSpec::Kind::file: {
      RealField2D f = read_qkpf(in.path);
      if (!f.grid().same_shape(*g)) throw GridMismatch();
      n1 = RealField2D(g, std::vector<double>(f.values().begin(), f.values().end()));
      break;
    }
  }
  return remove_x1_means(n1);
}

inline RealField2D make_initial_profile(const StudyConfig& cfg) {
  return make_initial_profile(cfg.init, make_grid(cfg.n1, cfg.n2, cfg.l1, cfg.l2));
}

struct Remainders {
  RealField2D N_i, N_e, U1, U2;
};

/// First-order remainders normalized by eps^2.
inline Remainders extract_remainder(const QepState& s, const ProfileSet1& pr, double eps) {
  s.n_i.require_same_grid(pr.n1);
  const double inv = 1.0 / (eps * eps), e32 = eps * std::sqrt(eps);
  auto rem = [&](const RealField2D& f, double offset, double scale, const RealField2D& profile) {
    RealField2D r = f;
    r += -offset;
    r.axpy(-scale, profile);
    r *= inv;
    return r;
  };
  return {rem(s.n_i, 1.0, eps, pr.n1), rem(s.n_e, 1.0, eps, pr.ne1), rem(s.u_i1, 0.0, eps, pr.ui1_1),
          rem(s.u_i2, 0.0, e32, pr.ui2_1)};
}

/// True if |n1| within 5% of the domain edge exceeds 1e-6 of its peak.
inline bool boundary_contaminated(const RealField2D& n1) {
  const Grid2D& g = n1.grid();
  const double peak = n1.max_abs();
  if (peak == 0.0) return false;
  double edge = 0.0;
  for (int i2 = 0; i2 < g.n2(); ++i2)
    for (int i1 = 0; i1 < g.n1(); ++i1)
      if (std::abs(g.x1(i1)) >= 0.45 * g.l1() || std::abs(g.x2(i2)) >= 0.45 * g.l2())
        edge = std::max(edge, std::abs(n1(i1, i2)));
  return edge > 1e-6 * peak;
}

struct ConvergenceRow {
  double eps = 0.0;
  double tau = 0.0;
  double h1_err_n = 0.0;   // sup_t H1 error of (n_i - 1)/eps vs n1
  double h1_err_u1 = 0.0;  // u_i1/eps vs V n1
  double h1_err_u2 = 0.0;  // u_i2/eps^(3/2) vs ui2_1
  double triple_sq = 0.0;  // triple norm of the remainders at tau
  bool window_exit = false;
  bool boundary_flag = false;
  double wall_seconds = 0.0;
};

/// Matched QKP / QEP runs to scaled time tau, compared at cfg.snapshots + 1 common times.
inline ConvergenceRow run_pair(double eps, const StudyConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const RealField2D n1 = make_initial_profile(cfg);
  const QkpParams kp(cfg.V, cfg.H);
  QepParams qp;
  qp.eps = eps;
  qp.V = cfg.V;
  qp.H = cfg.H;
  qp.newton_tol = cfg.newton_tol;

  QkpIntegrator kdv(kp, {0.0, n1});
  QepState s = build_wellprepared(n1, qp);
  ConvergenceRow row;
  row.eps = eps;
  row.tau = cfg.tau;
  const double e32 = eps * std::sqrt(eps);

  auto compare = [&] {
    const ProfileSet1 pr = build_profiles(kdv.state().u, cfg.V);
    RealField2D n = s.n_i;
    n += -1.0;
    row.h1_err_n = std::max(row.h1_err_n, h1_error((1.0 / eps) * n, pr.n1));
    row.h1_err_u1 = std::max(row.h1_err_u1, h1_error((1.0 / eps) * s.u_i1, pr.ui1_1));
    row.h1_err_u2 = std::max(row.h1_err_u2, h1_error((1.0 / e32) * s.u_i2, pr.ui2_1));
    row.window_exit = row.window_exit || s.window_exit;
    row.boundary_flag = row.boundary_flag || boundary_contaminated(pr.n1);
    return pr;
  };

  ProfileSet1 pr = compare();
  if (cfg.tau > 0.0) {
    const double interval = cfg.tau / cfg.snapshots;
    for (int k = 1; k <= cfg.snapshots; ++k) {
      const int nq = static_cast<int>(std::ceil(interval / suggest_dt_qep(s, qp, cfg.cfl)));
      for (int i = 0; i < nq; ++i) s = qep_step(s, qp, interval / nq);
      const int nk = static_cast<int>(std::ceil(interval / suggest_dt(kdv.state(), kp, cfg.cfl)));
      for (int i = 0; i < nk; ++i) kdv.step(interval / nk);
      pr = compare();
    }
  }
  const Remainders r = extract_remainder(s, pr, eps);
  row.triple_sq = triple_norm(r.N_i, r.N_e, r.U1, r.U2, eps).total;
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

struct OrderFit {
  double order, constant;
};

/// Least-squares fit of log h1_err_n = log C + order log eps.
inline OrderFit fit_order(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 3) throw DegenerateFit("need at least 3 rows");
  const double n = static_cast<double>(rows.size());
  double sx = 0, sy = 0;
  for (const auto& r : rows) {
    if (!(r.h1_err_n > 0.0) || !std::isfinite(r.h1_err_n)) throw DegenerateFit("errors must be positive and finite");
    if (!(r.eps > 0.0)) throw DegenerateFit("eps must be positive");
    sx += std::log(r.eps);
    sy += std::log(r.h1_err_n);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double dx = std::log(r.eps) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r.h1_err_n) - my);
  }
  if (!(sxx > 0.0)) throw DegenerateFit("eps values are not distinct");
  const double order = sxy / sxx;
  return {order, std::exp(my - order * mx)};
}

/// Outcome of one eps: a row, or the failure that stopped it.
struct StudyEntry {
  double eps = 0.0;
  std::optional<ConvergenceRow> row;
  std::string failure;
  std::optional<double> blowup_time;
};

struct StudyResult {
  std::vector<StudyEntry> entries;  // in eps_list order
  std::optional<OrderFit> fit;      // present when every row completed

  bool complete() const {
    return std::all_of(entries.begin(), entries.end(), [](const StudyEntry& e) { return e.row.has_value(); });
  }
  std::vector<ConvergenceRow> rows() const {
    std::vector<ConvergenceRow> out;
    for (const auto& e : entries)
      if (e.row) out.push_back(*e.row);
    return out;
  }
};

/// Worker count: QKP_THREADS if set, else the hardware concurrency, capped by the job count.
inline unsigned study_threads(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("QKP_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

inline StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult res;
  res.entries.resize(cfg.eps_list.size());
  auto run_one = [&](std::size_t i) {
    StudyEntry& e = res.entries[i];
    e.eps = cfg.eps_list[i];
    try {
      e.row = run_pair(e.eps, cfg);
    } catch (const Blowup& b) {
      e.failure = b.what();
      e.blowup_time = b.t;
    } catch (const Error& err) {
      e.failure = err.what();
    }
  };
  const unsigned nthreads = study_threads(cfg.eps_list.size());
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cfg.eps_list.size();) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  if (res.complete()) res.fit = fit_order(res.rows());
  return res;
}

inline constexpr const char* kStudyCsvHeader =
    "eps,tau,h1_err_n,h1_err_u1,h1_err_u2,triple_sq,window_exit,wall_seconds";

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Study CSV. Unnormalized errors (eps times the normalized ones) and
/// diagnostics go in trailing comment lines.
inline void write_study_csv(std::ostream& os, const StudyResult& res) {
  using detail::fmt_g17;
  os << kStudyCsvHeader << '\n';
  for (const auto& e : res.entries) {
    if (!e.row) continue;
    const ConvergenceRow& r = *e.row;
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_seconds);
    os << fmt_g17(r.eps) << ',' << fmt_g17(r.tau) << ',' << fmt_g17(r.h1_err_n) << ',' << fmt_g17(r.h1_err_u1)
       << ',' << fmt_g17(r.h1_err_u2) << ',' << fmt_g17(r.triple_sq) << ',' << (r.window_exit ? 1 : 0) << ','
       << wall << '\n';
  }
  if (res.fit) {
    os << "# fitted_order=" << fmt_g17(res.fit->order) << '\n';
    os << "# fitted_constant=" << fmt_g17(res.fit->constant) << '\n';
  }
  for (const auto& e : res.entries) {
    if (e.row) {
      os << "# unnormalized_h1_err_n eps=" << fmt_g17(e.eps) << " value=" << fmt_g17(e.eps * e.row->h1_err_n)
         << '\n';
      if (e.row->boundary_flag) os << "# boundary_contaminated eps=" << fmt_g17(e.eps) << '\n';
    } else if (e.blowup_time) {
      os << "# blowup eps=" << fmt_g17(e.eps) << " t=" << fmt_g17(*e.blowup_time) << '\n';
    } else {
      os << "# failed eps=" << fmt_g17(e.eps) << ": " << e.failure << '\n';
    }
  }
}

}  // namespace qkp
