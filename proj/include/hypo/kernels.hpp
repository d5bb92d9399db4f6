#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypo/audit.hpp"
#include "hypo/covariance.hpp"
#include "hypo/group_geometry.hpp"
#include "hypo/operator_core.hpp"
#include "hypo/quadrature.hpp"

namespace hypo {

/// Times below this are treated as the causal limit: kernels return 0.
inline constexpr double kTimeFloor = 1e-12;

/// γ (or γ0) frozen at one time t > 0.
class KernelSlice {
 public:
  KernelSlice() = default;
  KernelSlice(const OperatorSpec& spec, const BlockStructure& st, double t, bool with_trace)
      : t_(t), active_(t >= kTimeFloor) {
    if (!active_) return;
    cov_ = ScaledCovariance(spec, st, t);
    log_norm_ = -0.5 * spec.N * std::log(4.0 * M_PI) - 0.5 * cov_.log_det() - (with_trace ? t * spec.trace_B() : 0.0);
  }

  bool active() const { return active_; }
  double t() const { return t_; }
  const ScaledCovariance& cov() const { return cov_; }

  double gamma(const Vec& x) const { return active_ ? std::exp(log_norm_ - 0.25 * cov_.inv_quad(x)) : 0.0; }
  /// Same Gaussian with exponent (1-δ)/4: the decay majorant γ_δ.
  double gamma_delta(const Vec& x, double delta) const {
    return active_ ? std::exp(log_norm_ - 0.25 * (1.0 - delta) * cov_.inv_quad(x)) : 0.0;
  }
  /// ∂_iγ = -½ γ <C⁻¹x, e_i>.
  Vec grad(const Vec& x) const {
    if (!active_) return Vec::Zero(x.size());
    Vec a = cov_.inv_apply(x);
    return -0.5 * std::exp(log_norm_ - 0.25 * a.dot(x)) * a;
  }
  /// ∂²_{ij}γ = ½ γ {½ a_i a_j - (C⁻¹)_{ij}}, a = C⁻¹x.
  double hess(const Vec& x, int i, int j) const {
    if (!active_) return 0.0;
    Vec a = cov_.inv_apply(x);
    double g = std::exp(log_norm_ - 0.25 * a.dot(x));
    return 0.5 * g * (0.5 * a(i) * a(j) - cov_.inv_entry(i, j));
  }
  /// γ and ∂²_{ij}γ together.
  std::pair<double, double> gamma_and_hess(const Vec& x, int i, int j) const {
    if (!active_) return {0.0, 0.0};
    Vec a = cov_.inv_apply(x);
    double g = std::exp(log_norm_ - 0.25 * a.dot(x));
    return {g, 0.5 * g * (0.5 * a(i) * a(j) - cov_.inv_entry(i, j))};
  }

 private:
  double t_ = 0;
  bool active_ = false;
  ScaledCovariance cov_;
  double log_norm_ = 0;
};

/// Fundamental solution γ of L (principal = false) or γ0 of L0 (principal = true).
class Kernel {
 public:
  Kernel() = default;
  Kernel(const OperatorSpec& spec, const BlockStructure& st, bool principal = false)
      : spec_(principal ? principal_spec(spec, st) : spec), st_(st), principal_(principal) {}

  KernelSlice slice(double t) const { return KernelSlice(spec_, st_, t, !principal_); }
  double gamma(const GroupPoint& z) const { return slice(z.t).gamma(z.x); }
  Vec grad(const GroupPoint& z) const { return slice(z.t).grad(z.x); }
  double hess(const GroupPoint& z, int i, int j) const { return slice(z.t).hess(z.x, i, j); }

  const OperatorSpec& spec() const { return spec_; }
  const BlockStructure& structure() const { return st_; }
  bool principal() const { return principal_; }

 private:
  OperatorSpec spec_;
  BlockStructure st_;
  bool principal_ = false;
};

/// γ(x,t) = (4π)^{-N/2} det C(t)^{-1/2} exp(-¼<C⁻¹(t)x,x> - t Tr B) for t > 0.
inline double gamma(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& z) {
  return Kernel(spec, st).gamma(z);
}
inline double gamma(const OperatorSpec& spec, const GroupPoint& z) {
  return Kernel(spec, validate_structure(spec)).gamma(z);
}
inline double gamma0(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& z) {
  return Kernel(spec, st, true).gamma(z);
}
inline Vec grad_gamma(const OperatorSpec& spec, const GroupPoint& z) {
  return Kernel(spec, validate_structure(spec)).grad(z);
}
inline double hess_gamma(const OperatorSpec& spec, const GroupPoint& z, int i, int j) {
  return Kernel(spec, validate_structure(spec)).hess(z, i, j);
}

/// Derivative indices are 0-based here.
struct KernelConfig {
  int i = 0;
  int j = 0;
  double rho0 = 0.25;
  double delta = 0.1;
};

/// 1 - (6u⁵ - 15u⁴ + 10u³), u clamped to [0,1].
inline double smoothstep_down(double u) {
  if (u <= 0) return 1.0;
  if (u >= 1) return 0.0;
  return 1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

/// η(z): 1 on ‖z‖ ≤ ρ0/2, 0 on ‖z‖ ≥ ρ0, quintic smoothstep between.
inline double cutoff_eta_norm(double s, double rho0) { return smoothstep_down((s - 0.5 * rho0) / (0.5 * rho0)); }
inline double cutoff_eta(const BlockStructure& st, const GroupPoint& z, double rho0) {
  return cutoff_eta_norm(homogeneous_norm(st, z), rho0);
}

struct SplitKernel {
  double k0 = 0;
  double k_inf = 0;
};

/// k0 = η ∂²γ, k∞ = ∂²γ - k0.
inline SplitKernel split_kernels(const Kernel& kernel, const KernelConfig& cfg, const GroupPoint& w) {
  double h = kernel.hess(w, cfg.i, cfg.j);
  double eta = cutoff_eta(kernel.structure(), w, cfg.rho0);
  SplitKernel out;
  out.k0 = eta * h;
  out.k_inf = h - out.k0;
  return out;
}

inline double k0_value(const Kernel& kernel, const KernelConfig& cfg, const GroupPoint& w) {
  double eta = cutoff_eta(kernel.structure(), w, cfg.rho0);
  return eta == 0.0 ? 0.0 : eta * kernel.hess(w, cfg.i, cfg.j);
}

/// Grid for the majorant audit, in whitened coordinates x = D(√t) y.
struct MajorantGrid {
  int n_t = 24;
  int n_y = 21;
  double t_min = 1e-4;
  double y_max = 8.0;

  MajorantGrid refined() const { return {2 * n_t, 2 * n_y - 1, t_min, y_max}; }
};

/// Smallest c on the grid with |∂²_{ij}γ| ≤ (c/t) γ_δ.
inline double majorant_constant(const Kernel& kernel, const KernelConfig& cfg, const MajorantGrid& grid) {
  const auto& st = kernel.structure();
  const int N = st.N();
  double c = 0.0;
  for (int it = 0; it < grid.n_t; ++it) {
    double t = grid.t_min * std::pow(1.0 / grid.t_min, grid.n_t == 1 ? 1.0 : it / double(grid.n_t - 1));
    KernelSlice sl = kernel.slice(t);
    Vec s = dilation_diag(st, std::sqrt(t));
    std::vector<int> idx(N, 0);
    while (true) {
      Vec x(N);
      for (int k = 0; k < N; ++k) x(k) = s(k) * (-grid.y_max + 2.0 * grid.y_max * idx[k] / (grid.n_y - 1));
      double gd = sl.gamma_delta(x, cfg.delta);
      if (gd > 0) c = std::max(c, t * std::abs(sl.hess(x, cfg.i, cfg.j)) / gd);
      int d = 0;
      for (; d < N; ++d) {
        if (++idx[d] < grid.n_y) break;
        idx[d] = 0;
      }
      if (d >= N) break;
    }
  }
  return c;
}

inline AuditEntry audit_decay_majorant(const Kernel& kernel, const KernelConfig& cfg, const MajorantGrid& grid = {}) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.decay_majorant";
  e.anchor = "|D2 gamma| <= (c/t) gamma_delta";
  e.param("i", cfg.i + 1.0).param("j", cfg.j + 1.0).param("delta", cfg.delta);
  e.param("n_t", double(grid.n_t)).param("n_y", double(grid.n_y));
  double c1 = majorant_constant(kernel, cfg, grid);
  double c2 = majorant_constant(kernel, cfg, grid.refined());
  double drift = std::max(c1, c2) / std::min(c1, c2);
  e.value("c", c2).value("c_coarse", c1).value("refinement_ratio", drift);
  e.bound = 2.0;
  e.tolerance = 2.0;
  e.pass = std::isfinite(c2) && c2 > 0 && drift < 2.0;
  e.runtime_ms = sw.ms();
  return e;
}

struct StandardEstimates {
  double growth = 0;      // sup |k0(w)| ‖w‖^{Q+2}
  double smooth_first = 0;   // sup |k0(w⁻¹∘ζ) - k0(w⁻¹∘z)| d(z,w)^{Q+3} / d(z,ζ)
  double smooth_second = 0;  // sup |k0(z⁻¹∘w) - k0(ζ⁻¹∘w)| d(z,w)^{Q+3} / d(z,ζ)
  double literal = 0;        // sup with k0(w⁻¹∘z) weighted by d(w,ζ), M d(w,z) ≤ d(w,ζ)
};

/// Growth and Hölder-type suprema of k0 over group-translated samples.
/// Radii are log-uniform in [1e-3 ρ0, ρ0]; pairs obey M d(z,ζ) ≤ d(z,w) ≤ 1.
inline StandardEstimates sample_standard_estimates(const Kernel& kernel, const KernelConfig& cfg, int samples,
                                                   double M, std::uint64_t seed) {
  const auto& st = kernel.structure();
  Group g(kernel.spec());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lr(std::log(1e-3 * cfg.rho0), std::log(cfg.rho0));
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  Region anchor = Region::cube(st.N(), 1.0, -0.5, 0.5);
  StandardEstimates out;
  const int Q = st.Q;
  for (int s = 0; s < samples; ++s) {
    GroupPoint a = sample_norm_sphere(st, std::exp(lr(rng)), rng);
    double na = homogeneous_norm(st, a);
    out.growth = std::max(out.growth, std::abs(k0_value(kernel, cfg, a)) * std::pow(na, Q + 2));

    // First variable: w⁻¹∘z = a, ζ = z∘b⁻¹ so ζ⁻¹∘z = b and w⁻¹∘ζ = a∘b⁻¹.
    GroupPoint w = anchor.sample(rng);
    GroupPoint z = g.compose(w, a);
    double dzw = quasidistance(g, st, z, w);
    double rb = dzw / M * std::exp(std::log(1e-3) * uu(rng));
    GroupPoint b = sample_norm_sphere(st, rb, rng);
    GroupPoint zeta = g.compose(z, g.invert(b));
    double dzz = quasidistance(g, st, z, zeta);
    if (dzz > 0 && M * dzz <= dzw && dzw <= 1.0) {
      double diff = std::abs(k0_value(kernel, cfg, g.left_quotient(w, zeta)) - k0_value(kernel, cfg, g.left_quotient(w, z)));
      out.smooth_first = std::max(out.smooth_first, diff * std::pow(dzw, Q + 3) / dzz);
    }

    // Second variable: z⁻¹∘w = a.
    GroupPoint w2 = g.compose(z, a);
    double dzw2 = quasidistance(g, st, z, w2);
    double rb2 = dzw2 / M * std::exp(std::log(1e-3) * uu(rng));
    GroupPoint b2 = sample_norm_sphere(st, rb2, rng);
    GroupPoint zeta2 = g.compose(z, g.invert(b2));
    double dzz2 = quasidistance(g, st, z, zeta2);
    if (dzz2 > 0 && M * dzz2 <= dzw2 && dzw2 <= 1.0) {
      double diff = std::abs(k0_value(kernel, cfg, g.left_quotient(z, w2)) - k0_value(kernel, cfg, g.left_quotient(zeta2, w2)));
      out.smooth_second = std::max(out.smooth_second, diff * std::pow(dzw2, Q + 3) / dzz2);
    }

    // Literal variant: weight d(w,ζ)^{Q+3}/d(w,z) with M d(w,z) ≤ d(w,ζ), evaluated
    // at k0(w⁻¹∘ζ) - k0(w⁻¹∘z); z approaches the pole w.
    GroupPoint c = sample_norm_sphere(st, std::exp(lr(rng)), rng);
    GroupPoint zeta3 = g.compose(w, c);  // w⁻¹∘ζ = c
    double dwz3 = quasidistance(g, st, w, zeta3);
    double rz = dwz3 / M * std::exp(std::log(1e-3) * uu(rng));
    GroupPoint d = sample_norm_sphere(st, rz, rng);
    GroupPoint z3 = g.compose(w, g.invert(d));  // z⁻¹∘w = d
    double dwz = quasidistance(g, st, w, z3);
    if (dwz > 0 && M * dwz <= dwz3 && dwz3 <= 1.0) {
      double diff = std::abs(k0_value(kernel, cfg, c) - k0_value(kernel, cfg, g.left_quotient(w, z3)));
      out.literal = std::max(out.literal, diff * std::pow(dwz3, Q + 3) / dwz);
    }
  }
  return out;
}

inline AuditEntry audit_standard_estimates(const Kernel& kernel, const KernelConfig& cfg, int samples = 20000,
                                           double M = 8.0, std::uint64_t seed = 7) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.standard_estimates";
  e.anchor = "|k0| <= c/d^(Q+2) and Holder bound with parameter M";
  e.param("samples", double(samples)).param("M", M).param("rho0", cfg.rho0);
  StandardEstimates a = sample_standard_estimates(kernel, cfg, samples, M, seed);
  StandardEstimates b = sample_standard_estimates(kernel, cfg, 2 * samples, M, seed + 1);
  auto ratio = [](double x, double y) { return std::max(x, y) / std::min(x, y); };
  double r_growth = ratio(a.growth, b.growth);
  double r_first = ratio(a.smooth_first, b.smooth_first);
  double r_second = ratio(a.smooth_second, b.smooth_second);
  e.value("growth", b.growth).value("smooth_first", b.smooth_first).value("smooth_second", b.smooth_second);
  e.value("refine_growth", r_growth).value("refine_first", r_first).value("refine_second", r_second);
  e.value("literal_form", b.literal).value("refine_literal", ratio(a.literal, b.literal));
  for (double m : {4.0, 16.0}) {
    StandardEstimates s = sample_standard_estimates(kernel, cfg, samples, m, seed + 2);
    std::string tag = "M" + std::to_string(static_cast<int>(m));
    e.value("smooth_first_" + tag, s.smooth_first).value("smooth_second_" + tag, s.smooth_second);
  }
  bool finite = std::isfinite(b.growth) && std::isfinite(b.smooth_first) && std::isfinite(b.smooth_second) &&
                b.growth > 0 && b.smooth_first > 0 && b.smooth_second > 0;
  e.bound = 2.0;
  e.tolerance = 2.0;
  e.pass = finite && r_growth < 2.0 && r_first < 2.0 && r_second < 2.0;
  e.note = "literal_form is diagnostic only";
  e.runtime_ms = sw.ms();
  return e;
}

/// r breakpoints: every decade between lo and hi plus the given extra points.
inline std::vector<double> radial_breaks(double lo, double hi, std::vector<double> extra = {}) {
  std::vector<double> br{lo, hi};
  for (double d = std::pow(10.0, std::ceil(std::log10(lo))); d < hi; d *= 10.0)
    if (d > lo) br.push_back(d);
  for (double x : extra)
    if (x > lo && x < hi) br.push_back(x);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

/// ∫_{r1<‖w‖<r2} k0(w) e^{τ Tr B} dw in generalized polar coordinates with
/// log-r panels at every decade.
inline double cancellation_integral(const Kernel& kernel, const KernelConfig& cfg, double r1, double r2,
                                    const PolarRule& rule = {}) {
  if (!(r1 > 0) || r2 < r1) fail(ErrorKind::InvalidArgument, "cancellation integral needs 0 < r1 <= r2");
  if (r2 == r1) return 0.0;
  const auto& st = kernel.structure();
  const double trB = kernel.spec().trace_B();
  auto br = radial_breaks(r1, r2, {0.5 * cfg.rho0, cfg.rho0});
  double val = polar_integrate(st, br, rule, [&](double r, double tau) {
    double eta = cutoff_eta_norm(r, cfg.rho0);
    double f = eta * std::exp(tau * trB);
    KernelSlice sl = kernel.slice(tau);
    return [f, sl = std::move(sl), &cfg](const Vec& xi) { return f == 0.0 ? 0.0 : f * sl.hess(xi, cfg.i, cfg.j); };
  });
  if (!std::isfinite(val)) fail(ErrorKind::QuadratureNonConvergent, "non-finite shell integral");
  return val;
}

/// Shell integrals on r1 ∈ {1e-1, ..., 1e-4}, r2 = ρ0: bounded and Cauchy.
/// Each decade shell is integrated once and the ladder is its running sum.
inline AuditEntry audit_cancellation(const Kernel& kernel, const KernelConfig& cfg, const PolarRule& rule = {}) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "kernel.cancellation";
  e.anchor = "lim_{r1->0} int_{r1<|w|<r2} k0(w) e^{tau TrB} dw exists";
  e.param("i", cfg.i + 1.0).param("j", cfg.j + 1.0).param("rho0", cfg.rho0).param("tol", rule.tol);
  std::vector<double> r1s{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> vals;
  double acc = 0.0, upper = cfg.rho0, sup = 0.0;
  for (double r1 : r1s) {
    acc += cancellation_integral(kernel, cfg, r1, upper, rule);
    upper = r1;
    vals.push_back(acc);
    sup = std::max(sup, std::abs(acc));
    e.value("I(" + fmt_double(r1) + ")", acc);
  }
  double cauchy = std::max(std::abs(vals[3] - vals[2]), std::abs(vals[2] - vals[1]));
  e.measured.insert(e.measured.begin(), {"cauchy_last_two_decades", cauchy});
  e.value("sup", sup);
  e.bound = 1e-4;
  e.tolerance = 1e-4;
  e.pass = std::isfinite(sup) && cauchy < 1e-4;
  e.runtime_ms = sw.ms();
  return e;
}

}  // namespace hypo
