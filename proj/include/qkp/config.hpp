#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "qkp/harness.hpp"

namespace qkp {

struct GridConfig {
  int n1 = 128, n2 = 32;
  double l1 = 80.0, l2 = 40.0;

  GridPtr make() const { return make_grid(n1, n2, l1, l2); }
};

struct QkpRunConfig {
  GridConfig grid;
  double H = 1.0, V = 1.0;
  double cfl = 0.5;
  double t_end = 10.0;
  double snapshot_every = 1.0;
  std::string init_kind = "soliton";  // soliton | mode | file
  double amplitude = 1.0;             // mode
  double k = 0.5;                     // soliton
  int m1 = 1, m2 = 1;
  std::string path;
  std::string csv;          // empty: stdout
  std::string dump_prefix;  // empty: no dumps
};

struct QepRunConfig {
  GridConfig grid;
  double eps = 0.1, H = 1.0, V = 1.0;
  double cfl = 0.5;
  double t_end = 1.0;
  double snapshot_every = 0.1;
  double newton_tol = 1e-12;
  std::string init_kind = "wellprepared";  // wellprepared | file
  InitSpec profile;                        // wellprepared
  std::string n_i_path, u_i1_path, u_i2_path;
  std::string csv;
  std::string dump_prefix;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidParam("bad number '" + item + "' in list");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw InvalidParam("bad number '" + item + "' in list");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidParam("empty list");
  return out;
}

template <class T>
void read_opt(const boost::property_tree::ptree& pt, const std::string& key, T& dst) {
  if (!pt.get_child_optional(key)) return;
  try {
    dst = pt.get<T>(key);
  } catch (const boost::property_tree::ptree_error&) {
    throw InvalidParam("bad value for " + key);
  }
}

inline boost::property_tree::ptree load_ini(const std::string& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidParam(std::string("config: ") + e.what());
  }
  return pt;
}

inline void read_grid(const boost::property_tree::ptree& pt, GridConfig& g) {
  read_opt(pt, "grid.n1", g.n1);
  read_opt(pt, "grid.n2", g.n2);
  read_opt(pt, "grid.l1", g.l1);
  read_opt(pt, "grid.l2", g.l2);
}

inline void read_profile(const boost::property_tree::ptree& pt, const std::string& sec, InitSpec& in) {
  if (auto k = pt.get_optional<std::string>(sec + ".profile")) in.kind = init_kind_from(*k);
  read_opt(pt, sec + ".amplitude", in.amplitude);
  read_opt(pt, sec + ".width", in.width);
  read_opt(pt, sec + ".m1", in.m1);
  read_opt(pt, sec + ".m2", in.m2);
  read_opt(pt, sec + ".path", in.path);
}

}  // namespace detail

inline QkpRunConfig load_qkp_config(const std::string& path) {
  const auto pt = detail::load_ini(path);
  QkpRunConfig c;
  detail::read_grid(pt, c.grid);
  detail::read_opt(pt, "physics.H", c.H);
  detail::read_opt(pt, "physics.V", c.V);
  detail::read_opt(pt, "run.cfl", c.cfl);
  detail::read_opt(pt, "run.t_end", c.t_end);
  detail::read_opt(pt, "run.snapshot_every", c.snapshot_every);
  detail::read_opt(pt, "init.kind", c.init_kind);
  detail::read_opt(pt, "init.amplitude", c.amplitude);
  detail::read_opt(pt, "init.k", c.k);
  detail::read_opt(pt, "init.m1", c.m1);
  detail::read_opt(pt, "init.m2", c.m2);
  detail::read_opt(pt, "init.path", c.path);
  detail::read_opt(pt, "output.csv", c.csv);
  detail::read_opt(pt, "output.dump_prefix", c.dump_prefix);
  return c;
}

inline QepRunConfig load_qep_config(const std::string& path) {
  const auto pt = detail::load_ini(path);
  QepRunConfig c;
  detail::read_grid(pt, c.grid);
  detail::read_opt(pt, "physics.eps", c.eps);
  detail::read_opt(pt, "physics.H", c.H);
  detail::read_opt(pt, "physics.V", c.V);
  detail::read_opt(pt, "physics.newton_tol", c.newton_tol);
  detail::read_opt(pt, "run.cfl", c.cfl);
  detail::read_opt(pt, "run.t_end", c.t_end);
  detail::read_opt(pt, "run.snapshot_every", c.snapshot_every);
  detail::read_opt(pt, "init.kind", c.init_kind);
  detail::read_profile(pt, "init", c.profile);
  detail::read_opt(pt, "init.n_i", c.n_i_path);
  detail::read_opt(pt, "init.u_i1", c.u_i1_path);
  detail::read_opt(pt, "init.u_i2", c.u_i2_path);
  detail::read_opt(pt, "output.csv", c.csv);
  detail::read_opt(pt, "output.dump_prefix", c.dump_prefix);
  return c;
}

inline StudyConfig load_study_config(const std::string& path) {
  const auto pt = detail::load_ini(path);
  StudyConfig c;
  GridConfig g;
  detail::read_grid(pt, g);
  c.n1 = g.n1;
  c.n2 = g.n2;
  c.l1 = g.l1;
  c.l2 = g.l2;
  if (auto e = pt.get_optional<std::string>("study.eps")) c.eps_list = detail::parse_list(*e);
  detail::read_opt(pt, "study.tau", c.tau);
  detail::read_opt(pt, "study.cfl", c.cfl);
  detail::read_opt(pt, "study.snapshots", c.snapshots);
  detail::read_opt(pt, "study.newton_tol", c.newton_tol);
  detail::read_opt(pt, "physics.H", c.H);
  detail::read_opt(pt, "physics.V", c.V);
  detail::read_profile(pt, "init", c.init);
  detail::read_opt(pt, "output.csv", c.out_csv);
  return c;
}

}  // namespace qkp
