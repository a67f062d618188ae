#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "qkp/derivation.hpp"
#include "qkp/runs.hpp"

namespace qkp {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitSolver = 2 };

namespace detail {

inline derivation::Rational parse_grade(const std::string& s) {
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    const long long p = std::stoll(s.substr(0, slash), &used);
    if (used != (slash == std::string::npos ? s.size() : slash)) throw InvalidParam("bad grade '" + s + "'");
    if (slash == std::string::npos) return derivation::Rational(p);
    const std::string den = s.substr(slash + 1);
    const long long q = std::stoll(den, &used);
    if (used != den.size() || q <= 0) throw InvalidParam("bad grade '" + s + "'");
    return derivation::Rational(p, q);
  } catch (const std::logic_error&) {
    throw InvalidParam("bad grade '" + s + "'");
  }
}

/// Opens path for writing; an empty path selects the fallback stream.
class OutFile {
 public:
  OutFile(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw InvalidParam("cannot open " + path + " for writing");
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : fallback_; }

 private:
  std::ostream& fallback_;
  std::ofstream file_;
};

}  // namespace detail

/// qkpsim entry point. Exit codes: 0 success, 1 usage error, 2 solver failure.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"QKP / quantum Euler-Poisson simulation and verification tool", "qkpsim"};
  app.require_subcommand(1);

  std::string max_order = "3";
  auto* derive = app.add_subcommand("derive", "order equations and QKP coefficients");
  derive->add_option("--max-order", max_order, "highest grade (integer or p/q, at most 3)");

  std::string qkp_config, qkp_csv, qkp_dump;
  auto* qkp_cmd = app.add_subcommand("qkp", "evolve the QKP equation");
  qkp_cmd->add_option("--config", qkp_config, "INI config")->required()->check(CLI::ExistingFile);
  qkp_cmd->add_option("--csv", qkp_csv, "time series output (overrides output.csv)");
  qkp_cmd->add_option("--dump-prefix", qkp_dump, "QKPF dump prefix (overrides output.dump_prefix)");

  std::string qep_config, qep_csv, qep_dump;
  auto* qep_cmd = app.add_subcommand("qep", "evolve the scaled quantum Euler-Poisson system");
  qep_cmd->add_option("--config", qep_config, "INI config")->required()->check(CLI::ExistingFile);
  qep_cmd->add_option("--csv", qep_csv, "time series output (overrides output.csv)");
  qep_cmd->add_option("--dump-prefix", qep_dump, "QKPF dump prefix (overrides output.dump_prefix)");

  std::string study_config, eps_arg, study_out;
  double tau = -1.0, study_h = -1.0;
  auto* converge = app.add_subcommand("converge", "QKP vs QEP convergence study");
  converge->add_option("--config", study_config, "INI config")->check(CLI::ExistingFile);
  converge->add_option("--eps", eps_arg, "comma-separated, strictly decreasing");
  converge->add_option("--tau", tau, "scaled final time");
  converge->add_option("--H", study_h, "quantum parameter");
  converge->add_option("--out", study_out, "CSV output (default stdout)");

  std::string ni_path, ne_path, u1_path, u2_path;
  double norm_eps = 0.0;
  auto* norm = app.add_subcommand("norm", "triple norm of QKPF remainder dumps");
  norm->add_option("--ni", ni_path, "N_i dump")->required()->check(CLI::ExistingFile);
  norm->add_option("--ne", ne_path, "N_e dump")->required()->check(CLI::ExistingFile);
  norm->add_option("--u1", u1_path, "U1 dump")->required()->check(CLI::ExistingFile);
  norm->add_option("--u2", u2_path, "U2 dump")->required()->check(CLI::ExistingFile);
  norm->add_option("--eps", norm_eps, "eps")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*derive) {
      out << derivation::derive_report(detail::parse_grade(max_order));
    } else if (*qkp_cmd) {
      QkpRunConfig c = load_qkp_config(qkp_config);
      if (!qkp_csv.empty()) c.csv = qkp_csv;
      if (!qkp_dump.empty()) c.dump_prefix = qkp_dump;
      detail::OutFile f(c.csv, out);
      run_qkp(c, f.get());
    } else if (*qep_cmd) {
      QepRunConfig c = load_qep_config(qep_config);
      if (!qep_csv.empty()) c.csv = qep_csv;
      if (!qep_dump.empty()) c.dump_prefix = qep_dump;
      detail::OutFile f(c.csv, out);
      const QepState s = run_qep(c, f.get());
      if (s.window_exit) err << "warning: density left the window [" << kWindowLow << ", " << kWindowHigh << "]\n";
    } else if (*converge) {
      StudyConfig c = study_config.empty() ? StudyConfig{} : load_study_config(study_config);
      if (!eps_arg.empty()) c.eps_list = detail::parse_list(eps_arg);
      if (tau >= 0.0) c.tau = tau;
      if (study_h > 0.0) c.H = study_h;
      if (!study_out.empty()) c.out_csv = study_out;
      c.validate();
      const StudyResult res = run_study(c);
      {
        detail::OutFile f(c.out_csv, out);
        write_study_csv(f.get(), res);
      }
      for (const auto& e : res.entries)
        if (!e.row) err << "eps=" << e.eps << ": " << e.failure << '\n';
      if (!res.fit) return kExitSolver;
      out << "fitted_order=" << detail::fmt_g17(res.fit->order) << '\n';
    } else if (*norm) {
      const TripleNormReport r =
          triple_norm(read_qkpf(ni_path), read_qkpf(ne_path), read_qkpf(u1_path), read_qkpf(u2_path), norm_eps);
      out << "field,alpha,beta,weight,seminorm_sq\n";
      for (const auto& [k, c] : r.contributions)
        out << norm_field_name(k.field) << ',' << k.alpha << ',' << k.beta << ',' << detail::fmt_g17(c.weight) << ','
            << detail::fmt_g17(c.seminorm_sq) << '\n';
      out << "# total=" << detail::fmt_g17(r.total) << '\n';
    }
  } catch (const InvalidParam& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace qkp
