// Acceptance gate: one PASS/FAIL line per criterion, tolerances and time
// budgets fixed below. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qkp/derivation.hpp"
#include "qkp/harness.hpp"

using namespace qkp;
using std::numbers::pi;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

// ---------------------------------------------------------------------------

Outcome derivation_check() {
  namespace d = derivation;
  const std::string report = d::derive_report(d::Rational(3));
  const bool golden = report == slurp(std::string(QKP_GOLDEN_DIR) + "/derive_max3.txt");
  const d::QkpDerivation q = d::derive_qkp();
  bool ok = golden && q.sound.characteristic.str() == "V^2 - 1" && q.sound.V == d::Rational(1);
  ok = ok && q.a.str() == "3/2*V + 1/2*V^-1" && q.b.str() == "1/2*V^-1 - 1/8*V^-1*H^2" && q.c.str() == "1/2*V";
  for (double V : {1.0, -1.0, 0.5})
    for (double H : {0.0, 1.0, 3.0}) {
      ok = ok && std::abs(q.a.evaluate(V, H) - (1.5 * V + 0.5 / V)) <= 1e-15;
      ok = ok && std::abs(q.b.evaluate(V, H) - (1.0 - 0.25 * H * H) / (2.0 * V)) <= 1e-15;
      ok = ok && std::abs(q.c.evaluate(V, H) - 0.5 * V) <= 1e-15;
    }
  return {ok, std::string("golden ") + (golden ? "match" : "MISMATCH") + ", V^2=1, a b c exact"};
}

Outcome regime_check() {
  const std::pair<double, Regime> table[] = {{0.5, Regime::QKP_II}, {1.0, Regime::QKP_II}, {1.99, Regime::QKP_II},
                                             {2.0, Regime::dKP},    {2.01, Regime::QKP_I}, {3.0, Regime::QKP_I}};
  int bad = 0;
  for (auto [H, r] : table) bad += classify_regime(H) != r;
  return {bad == 0, std::to_string(6 - bad) + "/6 exact"};
}

// Shift s maximizing the spectral correlation of u with shift_x1(ref, s); Newton from s0.
double best_shift(const RealField2D& u, const RealField2D& ref, double s0) {
  const Spectrum a = forward(u), b = forward(ref);
  const Grid2D& g = a.g();
  double s = s0;
  for (int it = 0; it < 20; ++it) {
    double d1 = 0.0, d2 = 0.0;
    for (int j2 = 0; j2 < g.n2(); ++j2)
      for (int j1 = 1; j1 < g.n1() / 2; ++j1) {
        const double k = g.k1()[j1], w = hermitian_weight(g, j1);
        const cplx z = std::conj(a.at(j1, j2)) * b.at(j1, j2) * std::polar(1.0, -k * s);
        d1 += w * k * z.imag();
        d2 -= w * k * k * z.real();
      }
    const double step = d1 / d2;
    s -= step;
    if (std::abs(step) < 1e-15 * g.l1()) break;
  }
  return s;
}

Outcome soliton_check() {
  auto g = make_grid(512, 8, 80.0, 10.0);
  const QkpParams p(1, 1);
  const double k = 0.5;
  RealField2D u0 = RealField2D::from_function(g, [&](double x1, double) { return oracle::soliton(p.a, p.b, k, x1); });
  const double mean = u0.sum() / double(g->size());
  u0 += -mean;
  // Removing the mean is a Galilean shift of the speed.
  const double speed = 4 * p.b * k * k - p.a * mean;
  const double transit = g->l1() / speed;
  const int steps = static_cast<int>(std::ceil(transit / 0.01));
  QkpIntegrator it(p, {0, u0});
  for (int n = 0; n < steps; ++n) it.step(transit / steps);
  const RealField2D& u = it.state().u;
  const double s = best_shift(u, u0, 0.0);
  const double shape = discrete_l2(u - shift_x1(u0, s)) / discrete_l2(u0);
  const double speed_err = rel((g->l1() + s) / transit, speed);
  const double exact = discrete_l2(u - u0) / discrete_l2(u0);
  return {shape <= 1e-6 && speed_err <= 1e-8, "shape " + fmt("%.2e", shape) + " (<=1e-6), speed " +
                                                  fmt("%.2e", speed_err) + " (<=1e-8), vs exact translate " +
                                                  fmt("%.2e", exact)};
}

Outcome conservation_check() {
  std::mt19937 rng(17);
  auto g = make_grid(64, 32, 40.0, 40.0);
  const QkpParams p(1, 1);
  const RealField2D u0 = remove_x1_means(oracle::smooth_random(g, rng, 3, 0.5));
  QkpIntegrator it(p, {0, u0});
  const double dt = suggest_dt({0, u0}, p, 0.1);
  const double m0 = it.mass(), l0 = it.l2_sq();
  for (int n = 0; n < 1000; ++n) it.step(dt);
  const double drift = std::abs(it.l2_sq() - l0) / l0;
  return {it.mass() == m0 && drift <= 1e-8,
          "mass drift " + fmt("%.1e", std::abs(it.mass() - m0)) + " (==0), l2 drift " + fmt("%.2e", drift) + " (<=1e-8)"};
}

Outcome dispersion_check() {
  double worst_kp = 0.0, worst_qep = 0.0;
  {
    auto g = make_grid(32, 16, 20.0, 30.0);
    for (double H : {1.0, 3.0}) {
      QkpParams p(1, H);
      p.linear = true;
      for (auto [m1, m2] : {std::pair{1, 1}, std::pair{3, 2}, std::pair{5, -3}}) {
        const double k1 = 2 * pi * m1 / g->l1(), k2 = 2 * pi * m2 / g->l2();
        const double omega = oracle::qkp_omega(p.b, p.c, k1, k2);
        const double t_end = 2.0 / std::abs(omega);
        auto u0 = RealField2D::from_function(g, [&](double x1, double x2) { return std::cos(k1 * x1 + k2 * x2); });
        QkpIntegrator it(p, {0, u0});
        it.advance_to(t_end, t_end / 50);
        const int row = m2 >= 0 ? m2 : g->n2() + m2;
        const cplx r = forward(it.state().u).at(m1, row) / forward(u0).at(m1, row);
        worst_kp = std::max(worst_kp, rel(-std::arg(r) / t_end, omega));
      }
    }
  }
  {
    auto g = make_grid(32, 16, 20.0, 10.0);
    const double delta = 1e-6;
    for (double eps : {0.1, 0.2})
      for (double H : {1.0, 3.0})
        for (auto [m1, m2] : {std::pair{1, 1}, std::pair{2, 0}}) {
          const QepParams p{eps, 1.0, H};
          const double k1 = 2 * pi * m1 / g->l1(), k2 = 2 * pi * m2 / g->l2();
          const auto [r1, r2] = oracle::qep_slow_eigenvector(eps, H, k1, k2);
          auto wave = RealField2D::from_function(g, [&](double x1, double x2) { return delta * std::cos(k1 * x1 + k2 * x2); });
          QepState s = make_qep_state(wave + 1.0, r1 * wave, r2 * wave, p);
          const double omega = oracle::qep_slow_omega(eps, H, 1.0, k1, k2);
          const double t_end = 2.0 / std::abs(omega);
          const int steps = static_cast<int>(std::ceil(t_end / suggest_dt_qep(s, p, 0.5)));
          const cplx c0 = forward(s.n_i).at(m1, m2);
          for (int n = 0; n < steps; ++n) s = qep_step(s, p, t_end / steps);
          worst_qep = std::max(worst_qep, rel(-std::arg(forward(s.n_i).at(m1, m2) / c0) / t_end, omega));
        }
  }
  return {worst_kp <= 1e-10 && worst_qep <= 1e-6,
          "QKP " + fmt("%.2e", worst_kp) + " (<=1e-10), QEP " + fmt("%.2e", worst_qep) + " (<=1e-6)"};
}

Outcome elliptic_check() {
  auto g = make_grid(32, 16, 20.0, 10.0);
  const double delta = 1e-6;
  double worst = 0.0;
  for (double eps : {0.1, 0.2})
    for (double H : {1.0, 2.0, 3.0})
      for (auto [m1, m2] : {std::pair{1, 0}, std::pair{3, 0}, std::pair{2, 2}}) {
        const QepParams p{eps, 1.0, H};
        const double k1 = 2 * pi * m1 / g->l1(), k2 = 2 * pi * m2 / g->l2();
        auto ni = RealField2D::from_function(g, [&](double x1, double x2) { return 1.0 + delta * std::cos(k1 * x1 + k2 * x2); });
        const auto sol = solve_electron(ni, p, RealField2D(g, 1.0));
        const cplx r = forward(sol.n_e).at(m1, m2) / forward(ni).at(m1, m2);
        worst = std::max(worst, std::abs(r - oracle::electron_gain(eps, H, k1, k2)) / oracle::electron_gain(eps, H, k1, k2));
      }
  return {worst <= 1e-8, "max relative " + fmt("%.2e", worst) + " (<=1e-8) over 6 (eps,H) x 3 modes"};
}

RealField2D bump(const GridPtr& g, double amp, double w1, double w2) {
  return RealField2D::from_function(g, [=](double x1, double x2) {
    return amp * std::exp(-x1 * x1 / (w1 * w1) - x2 * x2 / (w2 * w2));
  });
}

Outcome qep_structure_check() {
  double eq_dev = 0.0;
  {
    auto g = make_grid(16, 8, 20.0, 10.0);
    const QepParams p{0.1, 1.0, 1.0};
    QepState s = make_qep_state(RealField2D(g, 1.0), RealField2D(g), RealField2D(g), p);
    const double dt = suggest_dt_qep(s, p, 0.5);
    for (int n = 0; n < 1000; ++n) s = qep_step(s, p, dt);
    for (double v : {(s.n_i + (-1.0)).max_abs(), (s.n_e + (-1.0)).max_abs(), s.u_i1.max_abs(), s.u_i2.max_abs(),
                     s.phi.max_abs()})
      eq_dev = std::max(eq_dev, v);
  }
  double mass_drift = 0.0;
  {
    auto g = make_grid(32, 16, 40.0, 20.0);
    const QepParams p{0.2, 1.0, 2.0};
    QepState s = make_qep_state(bump(g, 0.1, 4.0, 3.0) + 1.0, bump(g, 0.1, 4.0, 3.0), RealField2D(g), p);
    const double m0 = (s.n_i + (-1.0)).integral();
    const double dt = suggest_dt_qep(s, p, 0.5);
    for (int n = 0; n < 200; ++n) s = qep_step(s, p, dt);
    mass_drift = std::abs((s.n_i + (-1.0)).integral() - m0) / std::abs(m0);
  }
  double order = 0.0;
  {
    auto g = make_grid(16, 8, 40.0, 20.0);
    const QepParams p{0.2, 1.0, 1.0};
    const QepState s0 = make_qep_state(bump(g, 0.05, 5.0, 4.0) + 1.0, bump(g, 0.05, 5.0, 4.0), RealField2D(g), p);
    const double t_end = 16 * suggest_dt_qep(s0, p, 0.8);
    auto run = [&](int steps) {
      QepState s = s0;
      for (int n = 0; n < steps; ++n) s = qep_step(s, p, t_end / steps);
      return s.n_i;
    };
    const RealField2D ref = run(64);
    order = std::log2(discrete_l2(run(16) - ref) / discrete_l2(run(32) - ref));
  }
  return {eq_dev == 0.0 && mass_drift <= 1e-10 && order >= 3.5,
          "equilibrium dev " + fmt("%.1e", eq_dev) + " over 1000 steps, mass drift " + fmt("%.2e", mass_drift) +
              " (<=1e-10), RK4 order " + fmt("%.2f", order) + " (>=3.5)"};
}

Outcome convergence_check() {
  bool ok = true;
  std::string detail;
  for (double H : {1.0, 2.0, 3.0}) {
    StudyConfig c;
    c.H = H;
    c.validate();
    const StudyResult res = run_study(c);
    std::string part = "H=" + fmt("%g", H) + ": ";
    bool blowup = false;
    for (const auto& e : res.entries) blowup = blowup || e.blowup_time.has_value();
    if (res.fit) {
      const auto rows = res.rows();
      bool monotone = true;
      for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].h1_err_n < rows[i - 1].h1_err_n;
      const bool met = res.fit->order >= 0.8 && monotone;
      ok = ok && met;
      part += "order " + fmt("%.3f", res.fit->order) + (monotone ? " monotone" : " NOT monotone");
    } else if (H == 2.0 && blowup) {
      part += "Blowup reported";
    } else {
      ok = false;
      part += "incomplete";
    }
    detail += (detail.empty() ? "" : "; ") + part;
  }
  return {ok, detail + " (order >=0.8)"};
}

Outcome triple_norm_check() {
  auto g = make_grid(32, 16, 20.0, 10.0);
  const double eps = 0.3, k1 = 2 * 2 * pi / g->l1(), k2 = 1 * 2 * pi / g->l2();
  const double amp[4] = {0.7, 0.4, 1.1, 0.25};
  const int order[4] = {3, 7, 4, 4};
  auto mode = [&](double A) {
    return RealField2D::from_function(g, [=](double x1, double x2) { return A * std::cos(k1 * x1 + k2 * x2); });
  };
  const auto r = triple_norm(mode(amp[0]), mode(amp[1]), mode(amp[2]), mode(amp[3]), eps);
  double expect = 0.0;
  for (int f = 0; f < 4; ++f)
    for (int a = 0; a <= order[f]; ++a)
      for (int b = 0; a + b <= order[f]; ++b)
        expect += std::pow(eps, a + 2 * b) * std::pow(k1, 2 * a) * std::pow(k2, 2 * b) * amp[f] * amp[f];
  expect *= g->l1() * g->l2() / 2.0;
  const double err = rel(r.total, expect);
  return {err <= 1e-12 && r.contributions.size() == 76, "relative " + fmt("%.2e", err) + " (<=1e-12)"};
}

std::string strip_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#' && line.rfind("eps,", 0) != 0) line = line.substr(0, line.rfind(','));
    out += line + '\n';
  }
  return out;
}

Outcome roundtrip_check() {
  std::mt19937 rng(5);
  auto g = make_grid(48, 20, 33.0, 7.5);
  std::normal_distribution<double> nd(0.0, 1e3);
  RealField2D f = RealField2D::from_function(g, [&](double, double) { return nd(rng); });
  f(0, 0) = 5e-324;
  f(1, 0) = -0.0;
  f(2, 0) = 1.7976931348623157e308;
  const auto path = std::filesystem::temp_directory_path() / "qkp_acceptance_roundtrip.qkpf";
  write_qkpf(path.string(), f);
  const RealField2D back = read_qkpf(path.string());
  std::filesystem::remove(path);
  bool qkpf = back.grid().same_shape(*g) && encode_qkpf(back) == encode_qkpf(f);
  for (int i = 0; i < g->size() && qkpf; ++i)
    qkpf = std::signbit(back.values()[i]) == std::signbit(f.values()[i]) && back.values()[i] == f.values()[i];

  auto gr = make_grid(32, 16, 40.0, 20.0);
  const double eps = 0.1;
  auto n1 = remove_x1_means(RealField2D::from_function(gr, [](double x1, double x2) {
    return 0.4 * (1.0 - x1 * x1 / 8.0) * std::exp(-(x1 * x1 + x2 * x2) / 16.0);
  }));
  const ProfileSet1 pr = build_profiles(n1, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto noise = [&] { return RealField2D::from_function(gr, [&](double, double) { return u(rng); }); };
  const RealField2D gi = noise(), ge = noise(), g1 = noise(), g2 = noise();
  QepState s;
  s.n_i = (eps * pr.n1 + 1.0) + eps * eps * gi;
  s.n_e = (eps * pr.ne1 + 1.0) + eps * eps * ge;
  s.u_i1 = eps * pr.ui1_1 + eps * eps * g1;
  s.u_i2 = std::pow(eps, 1.5) * pr.ui2_1 + eps * eps * g2;
  const Remainders r = extract_remainder(s, pr, eps);
  double rem = 0.0;
  for (double v : {(r.N_i - gi).max_abs(), (r.N_e - ge).max_abs(), (r.U1 - g1).max_abs(), (r.U2 - g2).max_abs()})
    rem = std::max(rem, v);

  StudyConfig c;
  c.n1 = 64;
  c.n2 = 16;
  c.l1 = 40.0;
  c.l2 = 20.0;
  c.init.width = 3.0;
  c.tau = 0.2;
  c.snapshots = 4;
  std::ostringstream a, b;
  write_study_csv(a, run_study(c));
  write_study_csv(b, run_study(c));
  const bool csv = strip_wall(a.str()) == strip_wall(b.str());

  return {qkpf && rem <= 1e-12 && csv, std::string("QKPF ") + (qkpf ? "bit-exact" : "MISMATCH") + ", remainder " +
                                           fmt("%.1e", rem) + " (<=1e-12), CSV " + (csv ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"symbolic derivation", 1.0, derivation_check},
      {"regime table", 1.0, regime_check},
      {"QKP soliton", 30.0, soliton_check},
      {"QKP conservation", 60.0, conservation_check},
      {"linear dispersion", 30.0, dispersion_check},
      {"elliptic oracle", 10.0, elliptic_check},
      {"QEP structure", 120.0, qep_structure_check},
      {"convergence study", 900.0, convergence_check},
      {"triple norm closed form", 1.0, triple_norm_check},
      {"round-trips", 10.0, roundtrip_check},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.ok && secs <= c.budget_s;
    failed += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt("%.2f", secs) << " s <= "
              << fmt("%g", c.budget_s) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed;
}
