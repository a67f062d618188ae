#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "qkp/config.hpp"

namespace qkp {

namespace detail {

inline std::string dump_name(const std::string& prefix, const char* field, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d.qkpf", index);
  return prefix + (field ? std::string("_") + field : std::string()) + buf;
}

/// Number of snapshot intervals in [0, t_end]; the last one may be short.
inline int snapshot_count(double t_end, double every) {
  if (!(t_end >= 0.0)) throw InvalidParam("t_end must be non-negative");
  if (!(every > 0.0)) throw InvalidParam("snapshot_every must be positive");
  return static_cast<int>(std::ceil(t_end / every - 1e-9));
}

}  // namespace detail

inline RealField2D qkp_initial(const QkpRunConfig& c, const QkpParams& p) {
  const GridPtr g = c.grid.make();
  if (c.init_kind == "soliton") {
    if (!(c.k > 0.0)) throw InvalidParam("soliton k must be positive");
    if (p.b == 0.0) throw InvalidParam("soliton needs b != 0 (H != 2)");
    const double amp = 12.0 * p.b * c.k * c.k / p.a;
    return RealField2D::from_function(g, [&](double x1, double) {
      const double s = 1.0 / std::cosh(c.k * x1);
      return amp * s * s;
    });
  }
  InitSpec in;
  in.amplitude = c.amplitude;
  in.m1 = c.m1;
  in.m2 = c.m2;
  in.path = c.path;
  if (c.init_kind == "mode")
    in.kind = InitSpec::Kind::mode;
  else if (c.init_kind == "file")
    in.kind = InitSpec::Kind::file;
  else
    throw InvalidParam("unknown qkp init kind '" + c.init_kind + "'");
  return make_initial_profile(in, g);
}

/// CSV `t,mass,l2,linf` at every snapshot; optional QKPF dumps.
inline QkpState run_qkp(const QkpRunConfig& c, std::ostream& csv) {
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw InvalidParam("cfl must lie in (0, 1]");
  const QkpParams p(c.V, c.H);
  QkpIntegrator it(p, {0.0, qkp_initial(c, p)});
  const int count = detail::snapshot_count(c.t_end, c.snapshot_every);
  auto record = [&](int idx) {
    const QkpState s = it.state();
    csv << detail::fmt_g17(s.t) << ',' << detail::fmt_g17(it.mass()) << ',' << detail::fmt_g17(std::sqrt(it.l2_sq()))
        << ',' << detail::fmt_g17(s.u.max_abs()) << '\n';
    if (!c.dump_prefix.empty()) write_qkpf(detail::dump_name(c.dump_prefix, nullptr, idx), s.u);
  };
  csv << "t,mass,l2,linf\n";
  record(0);
  for (int k = 1; k <= count; ++k) {
    const double target = std::min(c.t_end, k * c.snapshot_every), span = target - it.time();
    const int n = std::max(1, static_cast<int>(std::ceil(span / suggest_dt(it.state(), p, c.cfl))));
    for (int i = 0; i < n; ++i) it.step(span / n);
    record(k);
  }
  return it.state();
}

inline QepState qep_initial(const QepRunConfig& c, const QepParams& p) {
  const GridPtr g = c.grid.make();
  if (c.init_kind == "wellprepared") return build_wellprepared(make_initial_profile(c.profile, g), p);
  if (c.init_kind == "file") {
    auto load = [&](const std::string& path) {
      RealField2D f = read_qkpf(path);
      if (!f.grid().same_shape(*g)) throw GridMismatch();
      return RealField2D(g, std::vector<double>(f.values().begin(), f.values().end()));
    };
    return make_qep_state(load(c.n_i_path), load(c.u_i1_path), load(c.u_i2_path), p);
  }
  throw InvalidParam("unknown qep init kind '" + c.init_kind + "'");
}

/// CSV `t,mass_i,min_ne,max_ne,elliptic_residual`; optional dumps of all five fields.
inline QepState run_qep(const QepRunConfig& c, std::ostream& csv) {
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw InvalidParam("cfl must lie in (0, 1]");
  QepParams p;
  p.eps = c.eps;
  p.V = c.V;
  p.H = c.H;
  p.newton_tol = c.newton_tol;
  p.validate();
  QepState s = qep_initial(c, p);
  const int count = detail::snapshot_count(c.t_end, c.snapshot_every);
  auto record = [&](int idx) {
    csv << detail::fmt_g17(s.t) << ',' << detail::fmt_g17(s.n_i.integral()) << ',' << detail::fmt_g17(s.n_e.min())
        << ',' << detail::fmt_g17(s.n_e.max()) << ',' << detail::fmt_g17(s.elliptic_residual) << '\n';
    if (!c.dump_prefix.empty()) {
      const std::pair<const char*, const RealField2D*> fields[] = {
          {"n_i", &s.n_i}, {"u_i1", &s.u_i1}, {"u_i2", &s.u_i2}, {"n_e", &s.n_e}, {"phi", &s.phi}};
      for (const auto& [name, f] : fields) write_qkpf(detail::dump_name(c.dump_prefix, name, idx), *f);
    }
  };
  csv << "t,mass_i,min_ne,max_ne,elliptic_residual\n";
  record(0);
  for (int k = 1; k <= count; ++k) {
    const double target = std::min(c.t_end, k * c.snapshot_every), span = target - s.t;
    const int n = std::max(1, static_cast<int>(std::ceil(span / suggest_dt_qep(s, p, c.cfl))));
    for (int i = 0; i < n; ++i) s = qep_step(s, p, span / n);
    record(k);
  }
  return s;
}

}  // namespace qkp
