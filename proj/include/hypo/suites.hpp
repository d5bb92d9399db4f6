#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hypo/audit.hpp"
#include "hypo/config.hpp"
#include "hypo/covariance.hpp"
#include "hypo/error.hpp"
#include "hypo/group_geometry.hpp"
#include "hypo/kernels.hpp"
#include "hypo/operator_core.hpp"
#include "hypo/sde_sim.hpp"
#include "hypo/singular_integral.hpp"
#include "hypo/testbed.hpp"

namespace hypo {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- structure

inline AuditEntry audit_structure(const OperatorSpec& spec, const std::vector<int>& declared_p) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "structure.validate";
  e.anchor = "B has the block form with full-rank B_j";
  BlockStructure st = validate_structure(spec);
  bool match = declared_p.empty() || declared_p == st.p;
  std::string ps;
  for (int v : st.p) ps += (ps.empty() ? "" : ",") + std::to_string(v);
  e.param("p", ps);
  e.value("r", st.r).value("Q", st.Q).value("p0", st.p.front()).value("declared_p_match", match ? 1 : 0);
  e.pass = match;
  if (!match) e.note = "declared p differs from the block partition of B";
  e.runtime_ms = sw.ms();
  return e;
}

/// C(t0) ≻ 0 at every t0; the verdict must not depend on t0.
inline AuditEntry audit_hypoellipticity(const OperatorSpec& spec, const std::vector<double>& t0s) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "structure.hypoelliptic";
  e.anchor = "hypoelliptic iff C(t) > 0";
  int yes = 0;
  for (double t0 : t0s) {
    bool h = is_hypoelliptic(spec, t0);
    yes += h;
    Eigen::SelfAdjointEigenSolver<Mat> es(covariance_C(spec, t0));
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    e.value("hypoelliptic(t0=" + fmt_double(t0) + ")", h ? 1 : 0).value("lmin/lmax(t0=" + fmt_double(t0) + ")",
                                                                          hi > 0 ? lo / hi : 0.0);
  }
  bool agree = yes == 0 || yes == static_cast<int>(t0s.size());
  bool hypo = agree && yes > 0;
  e.measured.insert(e.measured.begin(), {"hypoelliptic", hypo ? 1 : 0});
  e.value("agreement", agree ? 1 : 0);
  e.tolerance = 1e-12;
  e.pass = hypo;
  e.runtime_ms = sw.ms();
  return e;
}

// --------------------------------------------------------------- covariance

namespace internal {

inline Mat gk_matrix(const std::function<Mat(double)>& f, double t, int n) {
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          [&](double s) { return f(s)(i, j); }, 0.0, t, 15, 1e-14);
  return out;
}

inline double rel_fro(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace internal

/// Van Loan C(t), Q_t against entrywise adaptive Gauss–Kronrod of their integrals.
inline AuditEntry audit_van_loan_quadrature(const OperatorSpec& spec, const std::vector<double>& times) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "covariance.van_loan_vs_quadrature";
  e.anchor = "C(t) = int_0^t E(s) A E(s)^T ds";
  const Mat A = spec.A();
  const Mat Bt = spec.B.transpose();
  double worst = 0;
  for (double t : times) {
    Mat qc = internal::gk_matrix([&](double s) { Mat E = expm(-s * Bt); return Mat(E * A * E.transpose()); }, t, spec.N);
    Mat qq = internal::gk_matrix([&](double s) { Mat E = expm(s * Bt); return Mat(E * A * E.transpose()); }, t, spec.N);
    double ec = internal::rel_fro(covariance_C(spec, t), qc), eq = internal::rel_fro(gramian_Q(spec, t), qq);
    e.value("rel_error_C(t=" + fmt_double(t) + ")", ec).value("rel_error_Q(t=" + fmt_double(t) + ")", eq);
    worst = std::max({worst, ec, eq});
  }
  e.measured.insert(e.measured.begin(), {"max_rel_error", worst});
  e.bound = e.tolerance = 1e-9;
  e.pass = worst <= 1e-9;
  e.runtime_ms = sw.ms();
  return e;
}

inline AuditEntry audit_gramian_relation(const OperatorSpec& spec, const std::vector<double>& times) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "covariance.gramian_relation";
  e.anchor = "Q_t = exp(tB^T) C(t) exp(tB)";
  double worst = 0;
  for (double t : times) {
    Mat et = drift_exponential(spec, -t);
    double err = internal::rel_fro(et * covariance_C(spec, t) * et.transpose(), gramian_Q(spec, t));
    e.value("rel_error(t=" + fmt_double(t) + ")", err);
    worst = std::max(worst, err);
  }
  e.measured.insert(e.measured.begin(), {"max_rel_error", worst});
  e.bound = e.tolerance = 1e-10;
  e.pass = worst <= 1e-10;
  e.runtime_ms = sw.ms();
  return e;
}

// ------------------------------------------------------------- group/norms

inline double point_dist(const GroupPoint& a, const GroupPoint& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.t - b.t) * (a.t - b.t));
}

/// Associativity, identity and inverses on random triples in [-2,2]^{N+1}.
inline AuditEntry audit_group_axioms(const OperatorSpec& spec, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "group.axioms";
  e.anchor = "(R^{N+1}, o) is a group";
  e.param("samples", samples);
  Group g(spec);
  Region box = Region::cube(spec.N, 2.0);
  std::mt19937_64 rng(seed);
  const GroupPoint id = GroupPoint::zero(spec.N);
  double assoc = 0, unit = 0, inv = 0;
  for (int s = 0; s < samples; ++s) {
    GroupPoint a = box.sample(rng), b = box.sample(rng), c = box.sample(rng);
    assoc = std::max(assoc, point_dist(g.compose(g.compose(a, b), c), g.compose(a, g.compose(b, c))));
    unit = std::max({unit, point_dist(g.compose(a, id), a), point_dist(g.compose(id, a), a)});
    inv = std::max({inv, point_dist(g.compose(a, g.invert(a)), id), point_dist(g.compose(g.invert(a), a), id)});
  }
  double worst = std::max({assoc, unit, inv});
  e.value("max_error", worst).value("associativity", assoc).value("identity", unit).value("inverse", inv);
  e.bound = e.tolerance = 1e-12;
  e.pass = worst <= 1e-12;
  e.runtime_ms = sw.ms();
  return e;
}

inline AuditEntry audit_norm_homogeneity(const BlockStructure& st, const std::vector<double>& lambdas, int samples,
                                         std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "group.norm_homogeneity";
  e.anchor = "||delta(l) z|| = l ||z||";
  e.param("samples", samples);
  Region box = Region::cube(st.N(), 3.0);
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    GroupPoint z = box.sample(rng);
    double n = homogeneous_norm(st, z);
    if (n == 0) continue;
    for (double l : lambdas) worst = std::max(worst, std::abs(homogeneous_norm(st, dilate(st, l, z)) / (l * n) - 1.0));
  }
  e.value("max_rel_error", worst);
  e.bound = e.tolerance = 4 * std::numeric_limits<double>::epsilon();
  e.pass = worst <= e.tolerance;
  e.note = "exact up to rounding";
  e.runtime_ms = sw.ms();
  return e;
}

/// |det ∂(z∘w⁻¹)/∂w| against e^{τ Tr B}, by central differences.
inline AuditEntry audit_jacobian(const OperatorSpec& spec, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "group.jacobian";
  e.anchor = "d(z o w^-1) = e^{tau TrB} dw";
  e.param("samples", samples);
  Group g(spec);
  const int n = spec.N;
  const double h = 1e-5;
  Region box = Region::cube(n, 1.0, -1.5, 1.5);
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    GroupPoint z = box.sample(rng), w = box.sample(rng);
    Mat J(n + 1, n + 1);
    for (int c = 0; c <= n; ++c) {
      GroupPoint wp = w, wm = w;
      if (c < n) {
        wp.x(c) += h;
        wm.x(c) -= h;
      } else {
        wp.t += h;
        wm.t -= h;
      }
      J.col(c) = (g.right_quotient(z, wp).stacked() - g.right_quotient(z, wm).stacked()) / (2 * h);
    }
    double ref = jacobian_factor(spec, w.t);
    worst = std::max(worst, std::abs(std::abs(J.determinant()) - ref) / ref);
  }
  e.value("max_rel_error", worst);
  e.bound = e.tolerance = 1e-6;
  e.pass = worst <= 1e-6;
  e.note = "central differences, h = 1e-5";
  e.runtime_ms = sw.ms();
  return e;
}

inline AuditEntry audit_gamma0_homogeneity(const OperatorSpec& spec, const BlockStructure& st,
                                           const std::vector<double>& lambdas, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.gamma0_homogeneity";
  e.anchor = "gamma0(delta(l) z) = l^{-Q} gamma0(z)";
  e.param("samples", samples).param("Q", st.Q);
  Kernel k0(spec, st, true);
  // x = D(√t) L η with C0(1) = LLᵀ gives <C0(t)⁻¹x, x> = |η|², so γ0 stays representable.
  Region box = Region::cube(spec.N, 2.0, 0.05, 1.0);
  const Mat L = covariance_C0(spec, st, 1.0).llt().matrixL();
  std::mt19937_64 rng(seed);
  double worst = 0;
  int used = 0;
  for (int s = 0; s < samples; ++s) {
    GroupPoint z = box.sample(rng);
    z.x = dilation_diag(st, std::sqrt(z.t)).cwiseProduct(L * z.x);
    double g = k0.gamma(z);
    if (g < 1e-200) continue;
    ++used;
    for (double l : lambdas) worst = std::max(worst, std::abs(k0.gamma(dilate(st, l, z)) * std::pow(l, st.Q) / g - 1.0));
  }
  e.value("max_rel_error", worst).value("points_used", used);
  e.bound = e.tolerance = 1e-10;
  e.pass = used == samples && worst <= 1e-10;
  e.runtime_ms = sw.ms();
  return e;
}

/// L(u(g∘·))(z) = (Lu)(g∘z) for bumps u and random g.
inline AuditEntry audit_left_invariance(const OperatorSpec& spec, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "invariance.left_translation";
  e.anchor = "L(u(g o .)) = (Lu)(g o .)";
  e.param("samples", samples);
  Group grp(spec);
  auto fam = random_family(spec.N, FamilySpec{10, seed});
  std::mt19937_64 rng(seed + 1);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    const TestFunction& f = fam[s % fam.size()];
    GroupPoint w = f.support_box().sample(rng);
    GroupPoint g = Region::cube(spec.N, 2.0).sample(rng);
    GroupPoint z = grp.compose(grp.invert(g), w);
    TestFunction v = TestFunction::translated(f, g, spec);
    Jet jw = f.eval(w);
    double lhs = apply_L(spec, v, z), rhs = apply_L(spec, f, w);
    double scale = std::abs(jw.dt) + jw.hess.cwiseAbs().maxCoeff() + 1e-12;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), scale));
  }
  e.value("max_rel_error", worst);
  e.bound = e.tolerance = 1e-8;
  e.pass = worst <= 1e-8;
  e.runtime_ms = sw.ms();
  return e;
}

/// L0(u∘δ_λ)(z) = λ² (L0 u)(δ_λ z), λ log-uniform in [0.3, 3].
inline AuditEntry audit_L0_homogeneity(const OperatorSpec& spec, const BlockStructure& st, int samples,
                                       std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "invariance.L0_homogeneity";
  e.anchor = "L0(u o delta(l)) = l^2 (L0 u) o delta(l)";
  e.param("samples", samples);
  auto fam = random_family(spec.N, FamilySpec{10, seed});
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> ll(std::log(0.3), std::log(3.0));
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    const TestFunction& f = fam[s % fam.size()];
    double l = std::exp(ll(rng));
    GroupPoint w = f.support_box().sample(rng);
    GroupPoint z = dilate(st, 1.0 / l, w);
    TestFunction v = TestFunction::scaled(f, l, st);
    Jet jw = f.eval(w);
    double lhs = apply_L0(spec, st, v, z), rhs = l * l * apply_L0(spec, st, f, w);
    double scale = l * l * (std::abs(jw.dt) + jw.hess.cwiseAbs().maxCoeff()) + 1e-12;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), scale));
  }
  e.value("max_rel_error", worst);
  e.bound = e.tolerance = 1e-8;
  e.pass = worst <= 1e-8;
  e.runtime_ms = sw.ms();
  return e;
}

// ------------------------------------------------------------------ kernels

/// k0 + k∞ = ∂²_ij γ at random points, to a few ulps of the larger term.
inline AuditEntry audit_split_identity(const Kernel& kernel, const KernelConfig& cfg, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.split_identity";
  e.anchor = "k0 + k_inf = d2_ij gamma";
  e.param("samples", samples);
  const auto& st = kernel.structure();
  Region box = Region::cube(st.N(), 0.3, 1e-3, 0.1);
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    GroupPoint z = box.sample(rng);
    SplitKernel sk = split_kernels(kernel, cfg, z);
    double h = kernel.hess(z, cfg.i, cfg.j);
    double scale = std::max({std::abs(h), std::abs(sk.k0), std::abs(sk.k_inf)});
    if (scale > 0) worst = std::max(worst, std::abs(sk.k0 + sk.k_inf - h) / scale);
  }
  const double eps = std::numeric_limits<double>::epsilon();
  e.value("max_rel_error", worst).value("max_ulps", worst / eps);
  e.bound = e.tolerance = 4 * eps;
  e.pass = worst <= e.tolerance;
  e.runtime_ms = sw.ms();
  return e;
}

/// Tensor Gauss–Legendre (20 nodes per panel) over the box |x_k| ≤ half(k).
inline double tensor_gauss(const Vec& half, int panels, const std::function<double(const Vec&)>& f) {
  using G = boost::math::quadrature::gauss<double, 20>;
  std::vector<double> nodes, weights;
  for (std::size_t k = 0; k < G::abscissa().size(); ++k) {
    double a = G::abscissa()[k], w = G::weights()[k];
    nodes.push_back(a);
    weights.push_back(w);
    if (a != 0) {
      nodes.push_back(-a);
      weights.push_back(w);
    }
  }
  const int n = static_cast<int>(half.size());
  const int m = static_cast<int>(nodes.size()) * panels;
  std::vector<std::vector<double>> xs(n), ws(n);
  for (int d = 0; d < n; ++d) {
    double h = 2 * half(d) / panels;
    for (int p = 0; p < panels; ++p)
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        xs[d].push_back(-half(d) + h * (p + 0.5 * (nodes[k] + 1)));
        ws[d].push_back(0.5 * h * weights[k]);
      }
  }
  std::vector<int> idx(n, 0);
  Vec x(n);
  double acc = 0;
  while (true) {
    double w = 1;
    for (int d = 0; d < n; ++d) {
      x(d) = xs[d][idx[d]];
      w *= ws[d][idx[d]];
    }
    acc += w * f(x);
    int d = 0;
    while (d < n && ++idx[d] == m) idx[d++] = 0;
    if (d == n) break;
  }
  return acc;
}

/// ∫ γ(x,t) dx = e^{-t Tr B} over a ±12σ box.
inline AuditEntry audit_gamma_mass(const Kernel& kernel, const std::vector<double>& times) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.gamma_mass";
  e.anchor = "int gamma(x,t) dx = e^{-t TrB}";
  const auto& spec = kernel.spec();
  const int panels = spec.N >= 3 ? 8 : 10;
  double worst = 0;
  for (double t : times) {
    KernelSlice sl = kernel.slice(t);
    Vec half = 12.0 * covariance_C(spec, t).diagonal().cwiseSqrt();
    double mass = tensor_gauss(half, panels, [&](const Vec& x) { return sl.gamma(x); });
    double err = std::abs(mass - std::exp(-t * spec.trace_B()));
    e.value("abs_error(t=" + fmt_double(t) + ")", err);
    worst = std::max(worst, err);
  }
  e.measured.insert(e.measured.begin(), {"max_abs_error", worst});
  e.bound = e.tolerance = 1e-8;
  e.pass = worst <= 1e-8;
  e.runtime_ms = sw.ms();
  return e;
}

/// For A0 = I, B = 0 every off-diagonal shell integral vanishes exactly
/// (the integrand is odd under x_i ↦ -x_i and the rule is symmetric).
inline AuditEntry audit_offdiagonal_cancellation(const Kernel& kernel, const KernelConfig& base) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.offdiagonal_cancellation";
  e.anchor = "heat: int_{r1<|w|<r2} d2_ij gamma = 0 for i != j";
  KernelConfig cfg = base;
  cfg.i = 0;
  cfg.j = 1;
  double worst = 0, upper = cfg.rho0;
  for (double r1 : {1e-1, 1e-2, 1e-3, 1e-4}) {
    double v = cancellation_integral(kernel, cfg, r1, upper);
    e.value("I(" + fmt_double(r1) + ")", v);
    worst = std::max(worst, std::abs(v));
    upper = r1;
  }
  e.measured.insert(e.measured.begin(), {"max_abs", worst});
  e.pass = worst == 0.0;
  e.runtime_ms = sw.ms();
  return e;
}

inline bool is_heat(const OperatorSpec& spec) {
  return spec.p0 == spec.N && spec.B.isZero(0) && spec.A0.isIdentity(0);
}

// -------------------------------------------------------------------- cover

inline AuditEntry audit_cover(const Covering& cov) {
  AuditEntry e;
  e.check = "cover.region";
  e.anchor = "maximal rho/(C+1)-separated family covers the region at radius rho";
  e.param("K", cov.K).param("C", cov.C).param("rho", cov.rho);
  double frac = cov.validation_points > 0
                    ? 1.0 - static_cast<double>(cov.uncovered) / static_cast<double>(cov.validation_points)
                    : 0.0;
  e.value("coverage", frac).value("centers", static_cast<double>(cov.centers.size()))
      .value("overlap", cov.overlap).value("validation_points", static_cast<double>(cov.validation_points))
      .value("uncovered", static_cast<double>(cov.uncovered));
  e.bound = 1.0;
  e.pass = cov.covered;
  return e;
}

/// Probed quasi-symmetry and quasi-triangle constants against the C in use.
inline AuditEntry audit_quasi_constants(const OperatorSpec& spec, const BlockStructure& st, const Region& region,
                                        double C, int samples, std::uint64_t seed) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "cover.quasi_constants";
  e.anchor = "d(z,zeta) <= C d(zeta,z), d(z,zeta) <= C (d(z,w) + d(w,zeta))";
  e.param("C", C).param("samples", samples);
  QuasiConstants q = probe_quasi_constants(spec, st, samples, region, seed);
  e.value("c_max", std::max(q.c_sym, q.c_tri)).value("c_sym", q.c_sym).value("c_tri", q.c_tri);
  e.bound = C;
  e.tolerance = 1e-12;
  e.pass = std::max(q.c_sym, q.c_tri) <= C * (1 + 1e-12);
  e.runtime_ms = sw.ms();
  return e;
}

inline void write_covering(std::ostream& os, const Covering& cov) {
  os << "# rho=" << fmt_double(cov.rho) << " K=" << fmt_double(cov.K) << " C=" << fmt_double(cov.C)
     << " overlap=" << cov.overlap << " covered=" << (cov.covered ? "true" : "false")
     << " centers=" << cov.centers.size() << "\n";
  for (const auto& c : cov.centers) {
    for (int k = 0; k < c.x.size(); ++k) os << fmt_double(c.x(k)) << " ";
    os << fmt_double(c.t) << "\n";
  }
}

// ------------------------------------------------------------------- suites

namespace internal {

inline bool numerical_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::CovarianceFailure:
    case ErrorKind::ExpOverflow:
    case ErrorKind::QuadratureNonConvergent:
    case ErrorKind::PVNotConverged:
    case ErrorKind::CalibrationUnstable:
      return true;
    default:
      return false;
  }
}

inline AuditEntry error_entry(const std::string& check, const std::string& anchor, const std::string& kind,
                              const std::string& msg, double ms) {
  AuditEntry e;
  e.check = check;
  e.anchor = anchor;
  e.param("error_kind", kind);
  e.pass = false;
  e.note = "error: " + msg;
  e.runtime_ms = ms;
  return e;
}

}  // namespace internal

/// Runs fn unless `check` is in the skip list; module errors become a failed
/// entry carrying the error kind.
inline void run_check(AuditReport& rep, const Config& cfg, const std::string& check, const std::string& anchor,
                      const std::function<std::vector<AuditEntry>()>& fn) {
  if (cfg.skipped(check)) return;
  Stopwatch sw;
  try {
    for (auto& e : fn()) rep.add(std::move(e));
  } catch (const Error& err) {
    rep.add(internal::error_entry(check, anchor, std::string(to_string(err.kind())), err.what(), sw.ms()));
  } catch (const std::exception& err) {
    rep.add(internal::error_entry(check, anchor, "Internal", err.what(), sw.ms()));
  }
}

inline void run_one(AuditReport& rep, const Config& cfg, const std::string& check, const std::string& anchor,
                    const std::function<AuditEntry()>& fn) {
  run_check(rep, cfg, check, anchor, [&] { return std::vector<AuditEntry>{fn()}; });
}

/// 0 all pass, 1 audit failure, 3 a numerical module error.
inline int report_exit_code(const AuditReport& rep) {
  bool numeric = false;
  for (const auto& e : rep.entries)
    for (const auto& [k, v] : e.params)
      if (k == "error_kind") {
        if (v == "Internal") numeric = true;
        for (int kind = 0; kind <= static_cast<int>(ErrorKind::ConfigError); ++kind)
          if (v == to_string(static_cast<ErrorKind>(kind)) && internal::numerical_kind(static_cast<ErrorKind>(kind)))
            numeric = true;
      }
  if (numeric) return 3;
  return rep.all_pass() ? 0 : 1;
}

inline AuditReport new_report(const Config& cfg, const std::string& suite) {
  AuditReport rep;
  json op = cfg.source.contains("operator") ? cfg.source.at("operator") : json::object();
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(op.dump())));
  rep.meta("suite", suite);
  rep.meta("config_name", cfg.name);
  rep.meta("operator_hash", hash);
  rep.meta("seed", std::to_string(cfg.seed));
  rep.meta("tol_scale", fmt_double(cfg.tol_scale));
  rep.meta("lattice", "grid=" + std::to_string(cfg.quad.grid) + " far_nodes=" + std::to_string(cfg.quad.far_nodes) +
                          " near_step=" + fmt_double(cfg.quad.near_step));
  rep.meta("version", kVersion);
  std::string skip;
  for (const auto& s : cfg.skip) skip += (skip.empty() ? "" : ",") + s;
  rep.meta("skipped", skip.empty() ? "none" : skip);
  rep.meta("config", cfg.source.dump());
  return rep;
}

inline AuditReport cmd_validate(const Config& cfg) {
  AuditReport rep = new_report(cfg, "validate");
  const auto& spec = cfg.op;
  run_one(rep, cfg, "structure.validate", "B has the block form with full-rank B_j",
          [&] { return audit_structure(spec, cfg.p); });
  run_one(rep, cfg, "structure.hypoelliptic", "hypoelliptic iff C(t) > 0",
          [&] { return audit_hypoellipticity(spec, cfg.t0s); });
  return rep;
}

inline AuditReport cmd_identities(const Config& cfg) {
  AuditReport rep = new_report(cfg, "identities");
  const auto& spec = cfg.op;
  const int n = cfg.identity_points;
  BlockStructure st;
  try {
    st = validate_structure(spec);
  } catch (const Error& err) {
    rep.add(internal::error_entry("structure.validate", "B has the block form", std::string(to_string(err.kind())),
                                  err.what(), 0));
    return rep;
  }
  for (double l : cfg.lambdas)
    run_one(rep, cfg, "covariance.dilation_identity", "C0(l^2 t) = D(l) C0(t) D(l)",
            [&] { return audit_dilation_identity(spec, st, 1.0, l); });
  run_one(rep, cfg, "covariance.small_time", "C(t) = C0(t)(1+O(t))", [&] {
    Vec x = Vec::LinSpaced(spec.N, 1.0, 0.5);
    return audit_small_time(spec, st, cfg.small_time_ladder, x);
  });
  run_one(rep, cfg, "covariance.gramian_relation", "Q_t = exp(tB^T) C(t) exp(tB)",
          [&] { return audit_gramian_relation(spec, cfg.gramian_times); });
  run_one(rep, cfg, "covariance.van_loan_vs_quadrature", "C(t) = int_0^t E(s) A E(s)^T ds",
          [&] { return audit_van_loan_quadrature(spec, cfg.gramian_times); });
  run_one(rep, cfg, "group.axioms", "(R^{N+1}, o) is a group",
          [&] { return audit_group_axioms(spec, n, cfg.seed + 1); });
  run_one(rep, cfg, "group.norm_homogeneity", "||delta(l) z|| = l ||z||",
          [&] { return audit_norm_homogeneity(st, cfg.lambdas, n, cfg.seed + 2); });
  run_one(rep, cfg, "group.jacobian", "d(z o w^-1) = e^{tau TrB} dw",
          [&] { return audit_jacobian(spec, 50, cfg.seed + 3); });
  run_one(rep, cfg, "kernel.gamma0_homogeneity", "gamma0(delta(l) z) = l^{-Q} gamma0(z)",
          [&] { return audit_gamma0_homogeneity(spec, st, cfg.lambdas, n, cfg.seed + 4); });
  run_one(rep, cfg, "invariance.left_translation", "L(u(g o .)) = (Lu)(g o .)",
          [&] { return audit_left_invariance(spec, n, cfg.seed + 5); });
  run_one(rep, cfg, "invariance.L0_homogeneity", "L0(u o delta(l)) = l^2 (L0 u) o delta(l)",
          [&] { return audit_L0_homogeneity(spec, st, n, cfg.seed + 6); });
  return rep;
}

inline AuditReport cmd_kernel(const Config& cfg) {
  AuditReport rep = new_report(cfg, "kernel");
  const auto& spec = cfg.op;
  BlockStructure st;
  try {
    st = validate_structure(spec);
  } catch (const Error& err) {
    rep.add(internal::error_entry("structure.validate", "B has the block form", std::string(to_string(err.kind())),
                                  err.what(), 0));
    return rep;
  }
  Kernel kernel(spec, st);
  const KernelConfig& kc = cfg.kernel;
  QuadratureSpec quad = cfg.scaled_quad();
  PolarRule rule;
  rule.tol *= cfg.tol_scale;
  run_one(rep, cfg, "kernel.split_identity", "k0 + k_inf = d2_ij gamma",
          [&] { return audit_split_identity(kernel, kc, cfg.identity_points, cfg.seed + 7); });
  run_one(rep, cfg, "kernel.gamma_mass", "int gamma(x,t) dx = e^{-t TrB}",
          [&] { return audit_gamma_mass(kernel, cfg.mass_times); });
  run_one(rep, cfg, "kernel.decay_majorant", "|k0| <= c / d^{Q+2}", [&] { return audit_decay_majorant(kernel, kc); });
  run_one(rep, cfg, "kernel.standard_estimates", "standard estimates for k0",
          [&] { return audit_standard_estimates(kernel, kc, cfg.estimate_samples, 8.0, cfg.seed + 8); });
  run_one(rep, cfg, "kernel.cancellation", "lim_{r1->0} int_{r1<|w|<r2} k0 exists",
          [&] { return audit_cancellation(kernel, kc, rule); });
  if (is_heat(spec) && spec.N >= 2)
    run_one(rep, cfg, "kernel.offdiagonal_cancellation", "heat: off-diagonal shells vanish",
            [&] { return audit_offdiagonal_cancellation(kernel, kc); });
  run_one(rep, cfg, "kernel.kinf_integrability", "sup_z int |k_inf| <= c",
          [&] { return audit_kinf_integrability(spec, kc, quad); });
  run_one(rep, cfg, "kernel.hilbert_negative_control", "rough Hilbert truncation fails the certificate",
          [] { return audit_hilbert_control(); });
  return rep;
}

inline AuditReport cmd_represent(const Config& cfg) {
  AuditReport rep = new_report(cfg, "represent");
  run_check(rep, cfg, "represent", "u = -gamma * Lu and the D2 u representation", [&] {
    RepresentationSetup setup{cfg.calibration.make(), cfg.cross.make(), {}};
    for (const auto& b : cfg.held_out) setup.held_out.push_back(b.make());
    setup.points = cfg.represent_points;
    setup.calibration_points = cfg.calibration_points;
    setup.seed = cfg.seed + 31;
    setup.cross_tol = cfg.cross_tol;
    std::vector<AuditEntry> all = audit_representation(cfg.op, cfg.kernel, cfg.scaled_quad(), setup);
    std::vector<AuditEntry> kept;
    for (auto& e : all)
      if (!cfg.skipped(e.check)) kept.push_back(std::move(e));
    return kept;
  });
  return rep;
}

inline AuditReport cmd_lp(const Config& cfg) {
  AuditReport rep = new_report(cfg, "lp");
  const auto& spec = cfg.op;
  const int N = spec.N;
  FamilySpec fs;
  fs.count = cfg.family;
  fs.seed = cfg.seed;
  auto family = random_family(N, fs);
  auto spatial = random_spatial_family(N, fs);
  QuadratureSpec quad = cfg.scaled_quad();
  run_one(rep, cfg, "lp.ratios", "||D2 u||_p <= c ||Lu||_p",
          [&] { return lp_estimate_audit(spec, cfg.kernel, family, spatial, quad, cfg.translation); });
  run_one(rep, cfg, "lp.weak11", "alpha |{|D2 u| > alpha}| <= c (||Au||_1 + ||u||_1)",
          [&] { return weak11_audit(spec, cfg.kernel, spatial, cfg.alpha_fractions, quad); });
  run_one(rep, cfg, "lp.covering_patched", "patched L^p norm over a covering equals the direct one",
          [&] { return audit_covering_patched(spec, cfg.kernel, family.front(), 2.0, 32, 2.0, 1.0, cfg.lp_cover_r0); });
  return rep;
}

inline AuditReport cmd_simulate(const Config& cfg) {
  AuditReport rep = new_report(cfg, "simulate");
  const auto& spec = cfg.op;
  bool gate = false;
  run_one(rep, cfg, "sde.scalar_ou_gate", "scalar OU transition density", [&] {
    AuditEntry e = audit_scalar_ou_gate();
    gate = e.pass;
    return e;
  });
  if (cfg.skipped("sde.scalar_ou_gate")) gate = true;
  auto gated = [&](const std::string& check, const std::string& anchor, const std::function<AuditEntry()>& fn) {
    if (cfg.skipped(check)) return;
    if (!gate) {
      AuditEntry e;
      e.check = check;
      e.anchor = anchor;
      e.pass = false;
      e.note = "not run: scalar OU gate failed";
      rep.add(e);
      return;
    }
    run_one(rep, cfg, check, anchor, fn);
  };
  const double t = cfg.sim_t;
  gated("sde.density_crosscheck", "law of X_t has density gamma(x0 - E(t) y, t)", [&] {
    SampleSet s = exact_sample(spec, cfg.x0, t, cfg.samples, cfg.seed + 11, cfg.threads);
    AuditEntry e = density_crosscheck(spec, cfg.x0, t, s, cfg.sim_bins());
    e.param("sampler", "exact");
    return e;
  });
  gated("sde.em_crosscheck", "Euler-Maruyama law approaches gamma(x0 - E(t) y, t)", [&] {
    SampleSet s = euler_maruyama(spec, cfg.x0, t, cfg.em_steps, cfg.samples, cfg.seed + 12, cfg.threads);
    AuditEntry e = density_crosscheck(spec, cfg.x0, t, s, cfg.sim_bins());
    e.check = "sde.em_crosscheck";
    e.param("sampler", "euler_maruyama").param("steps", cfg.em_steps);
    return e;
  });
  gated("sde.chapman_kolmogorov", "X_{t+s} equals in law the s-step from X_t", [&] {
    return audit_chapman_kolmogorov(spec, cfg.x0, cfg.ck_split * t, (1 - cfg.ck_split) * t, 1500, 20, cfg.seed + 13);
  });
  gated("sde.variance_slope", "Var X_t^{(N)} ~ t^{2r+1}", [&] {
    BlockStructure st = validate_structure(spec);
    return audit_variance_slope(spec, cfg.variance_times, 2.0 * st.r + 1.0, cfg.samples, cfg.seed + 14, cfg.threads);
  });
  return rep;
}

/// The covering itself is returned through `out` when non-null.
inline AuditReport cmd_cover(const Config& cfg, Covering* out = nullptr) {
  AuditReport rep = new_report(cfg, "cover");
  const auto& spec = cfg.op;
  BlockStructure st;
  try {
    st = validate_structure(spec);
  } catch (const Error& err) {
    rep.add(internal::error_entry("structure.validate", "B has the block form", std::string(to_string(err.kind())),
                                  err.what(), 0));
    return rep;
  }
  Region region = Region::cube(spec.N, cfg.cover_half, cfg.cover_t_lo, cfg.cover_t_hi);
  run_one(rep, cfg, "cover.quasi_constants", "quasi-symmetry and quasi-triangle constants",
          [&] { return audit_quasi_constants(spec, st, region, cfg.cover_C, 20000, cfg.seed + 21); });
  run_one(rep, cfg, "cover.region", "maximal separated family covers the region", [&] {
    Stopwatch sw;
    Covering cov = cover_region(spec, st, region, cfg.cover_r0, cfg.cover_K, cfg.cover_C, cfg.cover_max_candidates);
    AuditEntry e = audit_cover(cov);
    e.param("r0", cfg.cover_r0).param("half", cfg.cover_half);
    e.runtime_ms = sw.ms();
    if (out) *out = std::move(cov);
    return e;
  });
  run_one(rep, cfg, "geometry.doubling", "|B(z,2rho) cap S| <= c |B(z,rho) cap S|",
          [&] { return audit_doubling(spec, st, 16, 20000, cfg.seed + 22); });
  run_one(rep, cfg, "geometry.ball_volume_slope", "|B(z,rho)| ~ rho^{Q+2}",
          [&] { return audit_ball_volume_slope(spec, st, {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}, 200000, cfg.seed + 23); });
  return rep;
}

inline AuditReport run_suite(const std::string& name, const Config& cfg, Covering* cov = nullptr) {
  if (name == "validate") return cmd_validate(cfg);
  if (name == "identities") return cmd_identities(cfg);
  if (name == "kernel") return cmd_kernel(cfg);
  if (name == "represent") return cmd_represent(cfg);
  if (name == "lp") return cmd_lp(cfg);
  if (name == "simulate") return cmd_simulate(cfg);
  if (name == "cover") return cmd_cover(cfg, cov);
  fail(ErrorKind::ConfigError, "unknown suite '" + name + "'");
}

}  // namespace hypo
