#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypo/error.hpp"
#include "hypo/kernels.hpp"
#include "hypo/operator_core.hpp"
#include "hypo/singular_integral.hpp"
#include "hypo/testbed.hpp"

namespace hypo {

using json = nlohmann::json;

/// One bump of the test bed as written in a config:
/// {"profile": "gaussian"|"polynomial", "center": [..], "t": 0, "widths": [..],
///  "width_t": 0.4, "amplitude": 1}.
struct BumpSpec {
  Profile profile = Profile::Gaussian;
  Vec center;
  double t = 0.0;
  Vec widths;
  double width_t = 0.4;
  double amplitude = 1.0;

  TestFunction make() const { return TestFunction::bump(profile, GroupPoint(center, t), widths, width_t, amplitude); }
};

/// Parsed config. Every field has a default except the operator.
struct Config {
  std::string name = "unnamed";
  OperatorSpec op;
  std::vector<int> p;  // declared block sizes, checked against the structure

  std::uint64_t seed = 2024;
  int threads = 1;
  /// Multiplies the adaptive quadrature tolerances.
  double tol_scale = 1.0;
  std::vector<std::string> skip;

  KernelConfig kernel;
  QuadratureSpec quad;

  // identities
  std::vector<double> lambdas{0.5, 2.0, 10.0};
  std::vector<double> t0s{0.1, 1.0, 10.0};
  std::vector<double> gramian_times{0.25, 1.0, 2.0};
  std::vector<double> small_time_ladder{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int identity_points = 1000;

  // kernel
  int estimate_samples = 20000;
  std::vector<double> mass_times{0.25, 1.0, 2.0};

  // represent
  BumpSpec calibration, cross;
  std::vector<BumpSpec> held_out;
  int represent_points = 6;
  int calibration_points = 20;
  double cross_tol = 1e-2;

  // lp
  int family = 50;
  std::vector<double> alpha_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  GroupPoint translation;
  double lp_cover_r0 = 1.0;

  // simulate
  Vec x0;
  double sim_t = 1.0;
  std::size_t samples = 100000;
  int bins = 0;  // 0: 100 for N = 1, 10 for N = 2, 6 otherwise
  int em_steps = 256;
  std::vector<double> variance_times{0.01, 0.03, 0.1};
  double ck_split = 0.5;

  // cover
  double cover_half = 1.0;
  double cover_t_lo = -1.0, cover_t_hi = 1.0;
  double cover_r0 = 1.0, cover_K = 2.0, cover_C = 1.0;
  long cover_max_candidates = 20'000'000;
  std::string covering_path;

  std::string out_path;
  std::string format = "kv";

  json source;  // the document as read, for the report metadata

  bool skipped(const std::string& check) const {
    for (const auto& s : skip)
      if (s == check) return true;
    return false;
  }
  int sim_bins() const { return bins > 0 ? bins : (op.N == 1 ? 100 : op.N == 2 ? 10 : 6); }
  QuadratureSpec scaled_quad() const {
    QuadratureSpec q = quad;
    q.shell.tol *= tol_scale;
    q.kernel_shell.tol *= tol_scale;
    q.threads = threads;
    return q;
  }
};

namespace internal {

[[noreturn]] inline void config_fail(const std::string& where, const std::string& msg) {
  fail(ErrorKind::ConfigError, where + ": " + msg);
}

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_fail(where, "expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) config_fail(where, "unknown key '" + k + "'");
}

template <class T>
T get(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    config_fail(where, e.what());
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (obj.contains(key)) out = get<T>(obj.at(key), where + "." + key);
}

inline Vec read_vec(const json& j, const std::string& where) {
  auto v = get<std::vector<double>>(j, where);
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Mat read_row_major(const json& j, int rows, int cols, const std::string& where) {
  auto v = get<std::vector<double>>(j, where);
  if (static_cast<int>(v.size()) != rows * cols)
    config_fail(where, "expected " + std::to_string(rows * cols) + " entries, got " + std::to_string(v.size()));
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
  return m;
}

inline BumpSpec read_bump(const json& j, int N, const std::string& where) {
  check_keys(j, where, {"profile", "center", "t", "widths", "width_t", "amplitude"});
  BumpSpec b;
  b.center = Vec::Zero(N);
  b.widths = Vec::Constant(N, 0.4);
  if (j.contains("profile")) {
    auto p = get<std::string>(j.at("profile"), where + ".profile");
    if (p == "gaussian") b.profile = Profile::Gaussian;
    else if (p == "polynomial") b.profile = Profile::Polynomial;
    else config_fail(where + ".profile", "expected gaussian or polynomial");
  }
  if (j.contains("center")) b.center = read_vec(j.at("center"), where + ".center");
  if (j.contains("widths")) b.widths = read_vec(j.at("widths"), where + ".widths");
  read(j, "t", b.t, where);
  read(j, "width_t", b.width_t, where);
  read(j, "amplitude", b.amplitude, where);
  if (b.center.size() != N || b.widths.size() != N) config_fail(where, "center and widths need N entries");
  if ((b.widths.array() <= 0).any() || !(b.width_t > 0)) config_fail(where, "widths must be positive");
  return b;
}

inline BumpSpec default_bump(int N, Profile prof, double c, double t, double w, double wt, double amp = 1.0) {
  BumpSpec b;
  b.profile = prof;
  b.center = Vec::Constant(N, c);
  b.t = t;
  b.widths = Vec::Constant(N, w);
  b.width_t = wt;
  b.amplitude = amp;
  return b;
}

}  // namespace internal

/// Parses a config document. Unknown keys anywhere are a ConfigError, as is
/// an operator that fails the ellipticity or shape checks.
inline Config parse_config(const json& doc) {
  using namespace internal;
  Config c;
  c.source = doc;
  check_keys(doc, "config",
             {"name", "operator", "seed", "threads", "tol_scale", "skip", "kernel", "quadrature", "identities",
              "kernel_suite", "represent", "lp", "simulate", "cover", "output"});
  read(doc, "name", c.name, "config");
  if (!doc.contains("operator")) config_fail("config", "missing 'operator'");
  const json& op = doc.at("operator");
  check_keys(op, "operator", {"N", "p", "A0", "B", "nu"});
  if (!op.contains("N") || !op.contains("A0") || !op.contains("B")) config_fail("operator", "needs N, A0 and B");
  int N = get<int>(op.at("N"), "operator.N");
  if (N < 1) config_fail("operator.N", "must be positive");
  auto a0 = get<std::vector<double>>(op.at("A0"), "operator.A0");
  int p0 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(a0.size()))));
  if (p0 < 1 || p0 * p0 != static_cast<int>(a0.size()) || p0 > N)
    config_fail("operator.A0", "expected p0*p0 entries with 1 <= p0 <= N");
  double nu = 1.0;
  read(op, "nu", nu, "operator");
  c.op = OperatorSpec(read_row_major(op.at("A0"), p0, p0, "operator.A0"), read_row_major(op.at("B"), N, N, "operator.B"),
                      nu);
  read(op, "p", c.p, "operator");
  if (!c.p.empty()) {
    int sum = 0;
    for (int v : c.p) {
      if (v < 1) config_fail("operator.p", "block sizes must be positive");
      sum += v;
    }
    if (sum != N || c.p.front() != p0) config_fail("operator.p", "block sizes must sum to N and start with p0");
  }
  try {
    check_ellipticity(c.op);
  } catch (const Error& e) {
    config_fail("operator", e.what());
  }

  read(doc, "seed", c.seed, "config");
  read(doc, "threads", c.threads, "config");
  read(doc, "tol_scale", c.tol_scale, "config");
  read(doc, "skip", c.skip, "config");
  if (c.threads < 1) config_fail("config.threads", "must be at least 1");
  if (!(c.tol_scale > 0)) config_fail("config.tol_scale", "must be positive");

  if (doc.contains("kernel")) {
    const json& k = doc.at("kernel");
    check_keys(k, "kernel", {"i", "j", "rho0", "delta"});
    int i = c.kernel.i + 1, j = c.kernel.j + 1;
    read(k, "i", i, "kernel");
    read(k, "j", j, "kernel");
    if (i < 1 || j < 1 || i > p0 || j > p0) config_fail("kernel", "i and j must lie in 1..p0");
    c.kernel.i = i - 1;
    c.kernel.j = j - 1;
    read(k, "rho0", c.kernel.rho0, "kernel");
    read(k, "delta", c.kernel.delta, "kernel");
    if (!(c.kernel.rho0 > 0) || !(c.kernel.delta > 0)) config_fail("kernel", "rho0 and delta must be positive");
  }
  if (doc.contains("quadrature")) {
    const json& q = doc.at("quadrature");
    check_keys(q, "quadrature", {"eps_ladder", "grid", "p_list", "far_nodes", "window", "near_step", "shell_tol",
                                 "shell_depth", "shell_nodes", "kernel_shell_tol", "kernel_shell_depth"});
    read(q, "eps_ladder", c.quad.eps_ladder, "quadrature");
    read(q, "grid", c.quad.grid, "quadrature");
    read(q, "p_list", c.quad.p_list, "quadrature");
    read(q, "far_nodes", c.quad.far_nodes, "quadrature");
    read(q, "window", c.quad.window, "quadrature");
    read(q, "near_step", c.quad.near_step, "quadrature");
    read(q, "shell_tol", c.quad.shell.tol, "quadrature");
    read(q, "shell_depth", c.quad.shell.max_depth, "quadrature");
    read(q, "shell_nodes", c.quad.shell.n_r, "quadrature");
    read(q, "kernel_shell_tol", c.quad.kernel_shell.tol, "quadrature");
    read(q, "kernel_shell_depth", c.quad.kernel_shell.max_depth, "quadrature");
    try {
      c.quad.validate();
    } catch (const Error& e) {
      config_fail("quadrature", e.what());
    }
  }
  if (doc.contains("identities")) {
    const json& s = doc.at("identities");
    check_keys(s, "identities", {"lambdas", "t0", "gramian_times", "small_time_ladder", "points"});
    read(s, "lambdas", c.lambdas, "identities");
    read(s, "t0", c.t0s, "identities");
    read(s, "gramian_times", c.gramian_times, "identities");
    read(s, "small_time_ladder", c.small_time_ladder, "identities");
    read(s, "points", c.identity_points, "identities");
  }
  if (doc.contains("kernel_suite")) {
    const json& s = doc.at("kernel_suite");
    check_keys(s, "kernel_suite", {"samples", "mass_times"});
    read(s, "samples", c.estimate_samples, "kernel_suite");
    read(s, "mass_times", c.mass_times, "kernel_suite");
  }

  c.calibration = default_bump(N, Profile::Gaussian, 0.1, 0.0, 0.4, 0.4);
  c.cross = default_bump(N, Profile::Polynomial, -0.3, 0.2, 0.35, 0.3);
  c.held_out = {default_bump(N, Profile::Gaussian, 0.5, -0.2, 0.25, 0.45, 2.0),
                default_bump(N, Profile::Polynomial, 0.0, 0.1, 0.45, 0.2)};
  if (doc.contains("represent")) {
    const json& s = doc.at("represent");
    check_keys(s, "represent", {"calibration", "cross", "held_out", "points", "calibration_points", "cross_tol"});
    if (s.contains("calibration")) c.calibration = read_bump(s.at("calibration"), N, "represent.calibration");
    if (s.contains("cross")) c.cross = read_bump(s.at("cross"), N, "represent.cross");
    if (s.contains("held_out")) {
      c.held_out.clear();
      const json& h = s.at("held_out");
      if (!h.is_array()) config_fail("represent.held_out", "expected a list");
      for (std::size_t k = 0; k < h.size(); ++k)
        c.held_out.push_back(read_bump(h[k], N, "represent.held_out[" + std::to_string(k) + "]"));
    }
    read(s, "points", c.represent_points, "represent");
    read(s, "calibration_points", c.calibration_points, "represent");
    read(s, "cross_tol", c.cross_tol, "represent");
  }

  c.translation = GroupPoint(Vec::Constant(N, 0.5), 0.2);
  if (doc.contains("lp")) {
    const json& s = doc.at("lp");
    check_keys(s, "lp", {"family", "alpha_fractions", "translation_x", "translation_t", "cover_r0"});
    read(s, "family", c.family, "lp");
    read(s, "alpha_fractions", c.alpha_fractions, "lp");
    if (s.contains("translation_x")) c.translation.x = read_vec(s.at("translation_x"), "lp.translation_x");
    read(s, "translation_t", c.translation.t, "lp");
    read(s, "cover_r0", c.lp_cover_r0, "lp");
    if (c.translation.x.size() != N) config_fail("lp.translation_x", "needs N entries");
    if (c.family < 1) config_fail("lp.family", "must be positive");
  }

  c.x0 = Vec::Zero(N);
  if (N > 1) c.x0(0) = 0.5;
  if (doc.contains("simulate")) {
    const json& s = doc.at("simulate");
    check_keys(s, "simulate", {"x0", "t", "samples", "bins", "em_steps", "variance_times", "ck_split"});
    if (s.contains("x0")) c.x0 = read_vec(s.at("x0"), "simulate.x0");
    read(s, "t", c.sim_t, "simulate");
    read(s, "samples", c.samples, "simulate");
    read(s, "bins", c.bins, "simulate");
    read(s, "em_steps", c.em_steps, "simulate");
    read(s, "variance_times", c.variance_times, "simulate");
    read(s, "ck_split", c.ck_split, "simulate");
    if (c.x0.size() != N) config_fail("simulate.x0", "needs N entries");
    if (!(c.sim_t > 0) || !(c.ck_split > 0 && c.ck_split < 1)) config_fail("simulate", "need t > 0, 0 < ck_split < 1");
  }

  if (doc.contains("cover")) {
    const json& s = doc.at("cover");
    check_keys(s, "cover", {"half", "t_lo", "t_hi", "r0", "K", "C", "max_candidates", "path"});
    read(s, "half", c.cover_half, "cover");
    read(s, "t_lo", c.cover_t_lo, "cover");
    read(s, "t_hi", c.cover_t_hi, "cover");
    read(s, "r0", c.cover_r0, "cover");
    read(s, "K", c.cover_K, "cover");
    read(s, "C", c.cover_C, "cover");
    read(s, "max_candidates", c.cover_max_candidates, "cover");
    read(s, "path", c.covering_path, "cover");
  }

  if (doc.contains("output")) {
    const json& s = doc.at("output");
    check_keys(s, "output", {"path", "format"});
    read(s, "path", c.out_path, "output");
    read(s, "format", c.format, "output");
  }
  if (c.format != "kv" && c.format != "csv") config_fail("output.format", "expected kv or csv");
  return c;
}

inline Config parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, std::string("parse error: ") + e.what());
  }
  return parse_config(doc);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace hypo
