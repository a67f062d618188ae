#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qkp/cli.hpp"

using namespace qkp;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

StudyConfig small_study() {
  StudyConfig c;
  c.n1 = 64;
  c.n2 = 16;
  c.l1 = 40.0;
  c.l2 = 20.0;
  c.init.width = 3.0;
  c.tau = 0.2;
  c.snapshots = 4;
  return c;
}

// Sup over the snapshot times of the H1 distance between the linearized QEP
// slow/fast response to the well-prepared data and the linear QKP evolution,
// per Fourier mode in closed form (V = 1).
double linear_model_error(const StudyConfig& c, double eps) {
  const RealField2D n1 = make_initial_profile(c);
  const Spectrum s0 = forward(n1);
  const Grid2D& g = s0.g();
  const QkpParams kp(1.0, c.H);
  double worst = 0.0;
  for (int k = 0; k <= c.snapshots; ++k) {
    const double t = c.tau * k / c.snapshots;
    Spectrum d = s0;
    for (int j2 = 0; j2 < g.n2(); ++j2)
      for (int j1 = 0; j1 < g.n1_half(); ++j1) {
        if (j1 == 0 || j1 == g.n1() / 2) {
          d.at(j1, j2) = 0.0;
          continue;
        }
        const double k1 = g.k1()[j1], k2 = g.k2()[j2];
        const double kap = eps * k1 * k1 + eps * eps * k2 * k2, h2 = c.H * c.H;
        const double gk = (1.0 + 0.25 * h2 * kap) / (1.0 + kap + 0.25 * h2 * kap * kap);
        const double q = k1 * k1 + eps * k2 * k2, sigma = std::sqrt(gk * q), phi = sigma * t / eps;
        const cplx qep = std::polar(1.0, k1 * t / eps) * cplx(std::cos(phi), -std::sin(phi) * q / (sigma * k1));
        const cplx kdv = std::polar(1.0, -(kp.c * k2 * k2 / k1 - kp.b * k1 * k1 * k1) * t);
        d.at(j1, j2) *= qep - kdv;
      }
    worst = std::max(worst, std::sqrt(seminorm_sq(d, 0, 0) + seminorm_sq(d, 1, 0) + seminorm_sq(d, 0, 1)));
  }
  return worst;
}

ConvergenceRow row(double eps, double err) {
  ConvergenceRow r;
  r.eps = eps;
  r.h1_err_n = err;
  return r;
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

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "qkpsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "qkp_harness_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("extract_remainder", "[harness]") {
  auto g = make_grid(32, 16, 40.0, 20.0);
  const double eps = 0.1;
  const QepParams p{eps, 1.0, 2.0};
  auto n1 = remove_x1_means(RealField2D::from_function(g, [](double x1, double x2) {
    return 0.4 * (1.0 - x1 * x1 / 8.0) * std::exp(-(x1 * x1 + x2 * x2) / 16.0);
  }));
  const ProfileSet1 pr = build_profiles(n1, 1.0);

  SECTION("well-prepared data") {
    const auto r = extract_remainder(build_wellprepared(n1, p), pr, eps);
    CHECK(r.N_i.max_abs() < 1e-12);
    CHECK(r.U1.max_abs() < 1e-12);
    CHECK(r.U2.max_abs() < 1e-12);
    CHECK(r.N_e.all_finite());
    CHECK(r.N_e.max_abs() > 1e-3);
    CHECK(r.N_e.max_abs() < 10.0);
  }
  SECTION("equilibrium") {
    const RealField2D z(g);
    const auto r = extract_remainder(build_wellprepared(z, p), build_profiles(z, 1.0), eps);
    for (const RealField2D* f : {&r.N_i, &r.N_e, &r.U1, &r.U2}) CHECK(f->max_abs() == 0.0);
  }
  SECTION("injected remainder round-trip") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto noise = [&] { return RealField2D::from_function(g, [&](double, double) { return u(rng); }); };
    const RealField2D gi = noise(), ge = noise(), g1 = noise(), g2 = noise();
    QepState s;
    s.n_i = (eps * pr.n1 + 1.0) + eps * eps * gi;
    s.n_e = (eps * pr.ne1 + 1.0) + eps * eps * ge;
    s.u_i1 = eps * pr.ui1_1 + eps * eps * g1;
    s.u_i2 = std::pow(eps, 1.5) * pr.ui2_1 + eps * eps * g2;
    const auto r = extract_remainder(s, pr, eps);
    CHECK((r.N_i - gi).max_abs() < 1e-12);
    CHECK((r.N_e - ge).max_abs() < 1e-12);
    CHECK((r.U1 - g1).max_abs() < 1e-12);
    CHECK((r.U2 - g2).max_abs() < 1e-12);
  }
  SECTION("grid mismatch") {
    auto other = make_grid(16, 16, 40.0, 20.0);
    CHECK_THROWS_AS(extract_remainder(build_wellprepared(n1, p), build_profiles(RealField2D(other), 1.0), eps),
                    GridMismatch);
  }
}

TEST_CASE("fit_order", "[harness]") {
  auto fit = fit_order({row(0.2, 0.6), row(0.1, 0.3), row(0.05, 0.15)});
  CHECK(std::abs(fit.order - 1.0) < 1e-12);
  CHECK(std::abs(fit.constant - 3.0) < 1e-12);
  fit = fit_order({row(0.4, 0.16), row(0.2, 0.04), row(0.1, 0.01), row(0.05, 0.0025)});
  CHECK(std::abs(fit.order - 2.0) < 1e-12);
  CHECK(std::abs(fit.constant - 1.0) < 1e-12);
  CHECK_THROWS_AS(fit_order({row(0.2, 0.6), row(0.1, 0.0), row(0.05, 0.15)}), DegenerateFit);
  CHECK_THROWS_AS(fit_order({row(0.1, 0.6), row(0.1, 0.3), row(0.1, 0.15)}), DegenerateFit);
  CHECK_THROWS_AS(fit_order({row(0.2, 0.6), row(0.1, 0.3)}), DegenerateFit);
}

TEST_CASE("boundary guard", "[harness]") {
  auto g = make_grid(64, 32, 40.0, 20.0);
  auto bump = [&](double w) {
    return RealField2D::from_function(g, [&](double x1, double x2) { return std::exp(-(x1 * x1 + x2 * x2) / (w * w)); });
  };
  CHECK_FALSE(boundary_contaminated(bump(2.0)));
  CHECK(boundary_contaminated(bump(8.0)));
  CHECK_FALSE(boundary_contaminated(RealField2D(g)));
}

TEST_CASE("run_pair", "[harness]") {
  SECTION("zero profile") {
    StudyConfig c = small_study();
    c.init.amplitude = 0.0;
    const auto r = run_pair(0.1, c);
    CHECK(r.h1_err_n == 0.0);
    CHECK(r.h1_err_u1 == 0.0);
    CHECK(r.h1_err_u2 == 0.0);
    CHECK(r.triple_sq == 0.0);
  }
  SECTION("tau = 0 compares the initial data") {
    StudyConfig c = small_study();
    c.tau = 0.0;
    const auto r = run_pair(0.1, c);
    CHECK(r.h1_err_n < 1e-12);
    CHECK(r.h1_err_u1 < 1e-12);
    CHECK(r.h1_err_u2 < 1e-12);
  }
  SECTION("small amplitude matches the linear Fourier model") {
    for (double H : {1.0, 3.0}) {
      StudyConfig c = small_study();
      c.init.amplitude = 1e-4;
      c.H = H;
      c.tau = 0.5;
      for (double eps : {0.2, 0.1}) {
        const double model = linear_model_error(c, eps);
        CHECK(run_pair(eps, c).h1_err_n == Approx(model).epsilon(1e-3));
      }
    }
  }
  SECTION("first-order ratio between eps = 0.2 and 0.1") {
    const StudyConfig c;
    const double ratio = run_pair(0.2, c).h1_err_n / run_pair(0.1, c).h1_err_n;
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.8);
  }
}

TEST_CASE("study config validation", "[harness]") {
  StudyConfig c = small_study();
  CHECK_NOTHROW(c.validate());
  c.eps_list = {0.1, 0.2, 0.05};
  CHECK_THROWS_AS(c.validate(), InvalidParam);
  c.eps_list = {0.2, 0.1};
  CHECK_THROWS_AS(c.validate(), InvalidParam);
  c.eps_list = {1.0, 0.1, 0.05};
  CHECK_THROWS_AS(c.validate(), InvalidParam);
  c = small_study();
  c.H = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidParam);
}

TEST_CASE("study CSV", "[harness][csv]") {
  const StudyConfig c = small_study();
  SECTION("deterministic across runs and thread counts") {
    setenv("QKP_THREADS", "1", 1);
    CHECK(study_threads(3) == 1);
    std::ostringstream a, b;
    write_study_csv(a, run_study(c));
    setenv("QKP_THREADS", "3", 1);
    CHECK(study_threads(3) == 3);
    CHECK(study_threads(2) == 2);
    write_study_csv(b, run_study(c));
    unsetenv("QKP_THREADS");
    CHECK(strip_wall(a.str()) == strip_wall(b.str()));
  }
  SECTION("schema") {
    std::ostringstream os;
    const StudyResult res = run_study(c);
    write_study_csv(os, res);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "eps,tau,h1_err_n,h1_err_u1,h1_err_u2,triple_sq,window_exit,wall_seconds");
    int rows = 0;
    bool order = false, constant = false;
    while (std::getline(in, line)) {
      if (line.rfind("# fitted_order=", 0) == 0) {
        order = true;
        CHECK(std::stod(line.substr(15)) == res.fit->order);
      } else if (line.rfind("# fitted_constant=", 0) == 0) {
        constant = true;
      } else if (line[0] != '#') {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
      }
    }
    CHECK(rows == 3);
    CHECK(order);
    CHECK(constant);
    // Values are printed with 17 significant digits and parse back exactly.
    std::istringstream again(os.str());
    std::getline(again, line);
    std::getline(again, line);
    CHECK(std::stod(line.substr(line.find(',', line.find(',') + 1) + 1)) == res.entries[0].row->h1_err_n);
  }
  SECTION("failed entries are reported") {
    StudyResult res;
    res.entries.resize(2);
    res.entries[0].eps = 0.2;
    res.entries[0].row = row(0.2, 0.5);
    res.entries[1].eps = 0.1;
    res.entries[1].failure = "blowup";
    res.entries[1].blowup_time = 0.75;
    std::ostringstream os;
    write_study_csv(os, res);
    CHECK_FALSE(res.complete());
    CHECK(os.str().find("# blowup eps=0.10000000000000001 t=0.75") != std::string::npos);
    CHECK(os.str().find("fitted_order") == std::string::npos);
  }
}

TEST_CASE("config files", "[harness][config]") {
  const fs::path dir = scratch_dir();
  SECTION("shipped configs load") {
    const fs::path cfg = QKP_CONFIG_DIR;
    const auto q = load_qkp_config((cfg / "qkp_soliton.ini").string());
    CHECK(q.grid.n1 == 512);
    CHECK(q.init_kind == "soliton");
    const auto e = load_qep_config((cfg / "qep_wellprepared.ini").string());
    CHECK(e.eps == 0.1);
    CHECK(e.profile.kind == InitSpec::Kind::d2gauss);
    for (int H : {1, 2, 3}) {
      const auto s = load_study_config((cfg / ("study_H" + std::to_string(H) + ".ini")).string());
      CHECK(s.H == H);
      CHECK(s.eps_list == std::vector<double>{0.2, 0.1, 0.05});
      CHECK(s.n1 == 128);
      CHECK(s.n2 == 32);
      CHECK_NOTHROW(s.validate());
    }
  }
  SECTION("bad values") {
    const fs::path p = dir / "bad.ini";
    std::ofstream(p) << "[grid]\nn1 = many\n";
    CHECK_THROWS_AS(load_qkp_config(p.string()), InvalidParam);
    std::ofstream(p) << "[study]\neps = 0.2,x,0.05\n";
    CHECK_THROWS_AS(load_study_config(p.string()), InvalidParam);
    std::ofstream(p) << "[init]\nprofile = hat\n";
    CHECK_THROWS_AS(load_study_config(p.string()), InvalidParam);
    std::ofstream(p) << "[grid\n";
    CHECK_THROWS_AS(load_qep_config(p.string()), InvalidParam);
  }
}

TEST_CASE("cli", "[harness][cli]") {
  const fs::path dir = scratch_dir();
  std::string out, err;
  SECTION("derive matches the golden report") {
    CHECK(run_cli({"derive", "--max-order", "3"}, &out) == 0);
    CHECK(out == slurp(fs::path(QKP_GOLDEN_DIR) / "derive_max3.txt"));
    CHECK(run_cli({"derive", "--max-order", "three"}, &out, &err) == 1);
  }
  SECTION("usage errors") {
    CHECK(run_cli({}, &out, &err) == 1);
    CHECK(run_cli({"converge", "--bogus"}, &out, &err) == 1);
    CHECK(err.find("Usage") != std::string::npos);
    CHECK(run_cli({"qkp", "--config", (dir / "missing.ini").string()}, &out, &err) == 1);
    CHECK(run_cli({"converge", "--eps", "0.1,0.2,0.05"}, &out, &err) == 1);
    CHECK(run_cli({"--help"}, &out, &err) == 0);
  }
  SECTION("qkp run writes the time series and dumps") {
    const fs::path ini = dir / "qkp.ini";
    std::ofstream(ini) << "[grid]\nn1 = 64\nn2 = 8\nl1 = 40\nl2 = 10\n[run]\nt_end = 1\nsnapshot_every = 0.5\n"
                          "[init]\nkind = soliton\nk = 0.5\n";
    const std::string prefix = (dir / "q").string();
    CHECK(run_cli({"qkp", "--config", ini.string(), "--dump-prefix", prefix}, &out, &err) == 0);
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,mass,l2,linf");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
    const RealField2D u = read_qkpf(prefix + "_0002.qkpf");
    CHECK(u.grid().n1() == 64);
    CHECK(encode_qkpf(u) == encode_qkpf(read_qkpf(prefix + "_0002.qkpf")));
  }
  SECTION("qep run and norm of the dumps") {
    const fs::path ini = dir / "qep.ini";
    std::ofstream(ini) << "[grid]\nn1 = 32\nn2 = 16\nl1 = 40\nl2 = 20\n[physics]\neps = 0.2\n"
                          "[run]\nt_end = 0.1\nsnapshot_every = 0.1\n[init]\nkind = wellprepared\nwidth = 3\n";
    const std::string prefix = (dir / "e").string();
    CHECK(run_cli({"qep", "--config", ini.string(), "--dump-prefix", prefix}, &out, &err) == 0);
    CHECK(out.rfind("t,mass_i,min_ne,max_ne,elliptic_residual\n", 0) == 0);
    auto dump = [&](const char* f) { return prefix + "_" + f + "_0001.qkpf"; };
    CHECK(run_cli({"norm", "--ni", dump("n_i"), "--ne", dump("n_e"), "--u1", dump("u_i1"), "--u2", dump("u_i2"),
                   "--eps", "0.2"},
                  &out, &err) == 0);
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "field,alpha,beta,weight,seminorm_sq");
    int rows = 0;
    while (std::getline(in, line))
      if (line[0] != '#') ++rows;
    CHECK(rows == 10 + 36 + 15 + 15);
  }
  SECTION("converge writes the study CSV") {
    const fs::path ini = dir / "study.ini";
    std::ofstream(ini) << "[grid]\nn1 = 64\nn2 = 16\nl1 = 40\nl2 = 20\n[study]\ntau = 0.1\nsnapshots = 2\n"
                          "[init]\nwidth = 3\n";
    const fs::path csv = dir / "study.csv";
    CHECK(run_cli({"converge", "--config", ini.string(), "--eps", "0.2,0.1,0.05", "--out", csv.string()}, &out,
                  &err) == 0);
    CHECK(out.rfind("fitted_order=", 0) == 0);
    CHECK(slurp(csv).rfind("eps,tau,h1_err_n", 0) == 0);
  }
}
