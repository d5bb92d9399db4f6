#include <cmath>
#include <functional>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include "hypo/covariance.hpp"
#include "hypo/kernels.hpp"
#include "test_support.hpp"

namespace hypo {
namespace {

/// γ from the unscaled covariance with a plain LU inverse and determinant.
double gamma_oracle(const OperatorSpec& spec, const Vec& x, double t) {
  Mat C = covariance_C(spec, t);
  double q = x.dot(C.fullPivLu().solve(x));
  return std::pow(4 * M_PI, -0.5 * spec.N) / std::sqrt(C.determinant()) * std::exp(-0.25 * q - t * spec.trace_B());
}

/// Tensor Gauss–Legendre (20 nodes on each of `panels` panels) over the box
/// |x_k| ≤ half(k).
double tensor_integral(const Vec& half, int panels, const std::function<double(const Vec&)>& f) {
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
  std::vector<std::vector<double>> xs(n), ws(n);
  for (int d = 0; d < n; ++d) {
    double h = 2 * half(d) / panels;
    for (int p = 0; p < panels; ++p) {
      double c = -half(d) + (p + 0.5) * h;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        xs[d].push_back(c + 0.5 * h * nodes[k]);
        ws[d].push_back(0.5 * h * weights[k]);
      }
    }
  }
  std::vector<std::size_t> idx(n, 0);
  Vec x(n);
  double sum = 0;
  while (true) {
    double w = 1;
    for (int d = 0; d < n; ++d) {
      x(d) = xs[d][idx[d]];
      w *= ws[d][idx[d]];
    }
    sum += w * f(x);
    int d = 0;
    for (; d < n; ++d) {
      if (++idx[d] < xs[d].size()) break;
      idx[d] = 0;
    }
    if (d == n) break;
  }
  return sum;
}

GTEST_TEST(Gamma, ClosedFormValues) {
  auto heat = fixtures::heat1d();
  EXPECT_NEAR(gamma(heat, GroupPoint{Vec::Zero(1), 1.0}), 1.0 / std::sqrt(4 * M_PI), 1e-15);
  EXPECT_NEAR(gamma(heat, GroupPoint{Vec::Zero(1), 1.0}), 0.28209479177387814, 1e-15);
  auto kol = fixtures::kolmogorov();
  EXPECT_NEAR(gamma(kol, GroupPoint{Vec::Zero(2), 1.0}), std::sqrt(12.0) / (4 * M_PI), 1e-14);

  // Heat in two dimensions: (4πt)^{-1} exp(-|x|²/4t).
  auto heat2 = fixtures::heat2d();
  Vec x(2);
  x << 0.3, -0.7;
  for (double t : {0.01, 0.5, 3.0})
    EXPECT_NEAR(gamma(heat2, GroupPoint{x, t}) / (std::exp(-x.squaredNorm() / (4 * t)) / (4 * M_PI * t)), 1.0,
                1e-12);
}

GTEST_TEST(Gamma, CausalAndMatchesOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    EXPECT_EQ(k.gamma(GroupPoint{Vec::Zero(spec.N), 0.0}), 0.0);
    EXPECT_EQ(k.gamma(GroupPoint{Vec::Zero(spec.N), -1.0}), 0.0);
    for (int s = 0; s < 50; ++s) {
      double t = std::exp(2 * u(rng));
      Vec y(spec.N);
      for (int d = 0; d < spec.N; ++d) y(d) = 2 * u(rng);
      Vec x = Mat(covariance_C(spec, t).llt().matrixL()) * y;
      double ref = gamma_oracle(spec, x, t);
      EXPECT_NEAR(k.gamma(GroupPoint{x, t}) / ref, 1.0, 1e-9) << "N=" << spec.N << " t=" << t << " ref=" << ref;
    }
  }
}

GTEST_TEST(Gamma, MassIsExpMinusTraceB) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    for (double t : {0.25, 1.0, 2.0}) {
      KernelSlice sl = k.slice(t);
      Mat C = covariance_C(spec, t);
      Vec half = (12.0 * C.diagonal().cwiseSqrt()).eval();
      int panels = spec.N == 3 ? 8 : 10;
      double mass = tensor_integral(half, panels, [&](const Vec& x) { return sl.gamma(x); });
      EXPECT_NEAR(mass, std::exp(-t * spec.trace_B()), 1e-8) << "N=" << spec.N << " t=" << t << " mass=" << mass;
    }
  }
}

GTEST_TEST(Gamma, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    for (int s = 0; s < 10; ++s) {
      double t = 0.5 + 0.4 * u(rng);
      Vec x(spec.N);
      for (int d = 0; d < spec.N; ++d) x(d) = 0.5 * u(rng);
      KernelSlice sl = k.slice(t);
      Vec g = sl.grad(x);
      const double h = 1e-4;
      for (int i = 0; i < spec.N; ++i) {
        Vec e = Vec::Unit(spec.N, i) * h;
        // Fourth-order central differences.
        double fd = (-sl.gamma(x + 2 * e) + 8 * sl.gamma(x + e) - 8 * sl.gamma(x - e) + sl.gamma(x - 2 * e)) / (12 * h);
        EXPECT_NEAR(g(i), fd, 1e-6 * (1 + std::abs(fd)));
        for (int j = 0; j < spec.N; ++j) {
          double fdh = (-sl.grad(x + 2 * e)(j) + 8 * sl.grad(x + e)(j) - 8 * sl.grad(x - e)(j) + sl.grad(x - 2 * e)(j)) /
                       (12 * h);
          EXPECT_NEAR(sl.hess(x, i, j), fdh, 1e-6 * (1 + std::abs(fdh)));
        }
      }
    }
  }
}

GTEST_TEST(Gamma, SolvesTheEquationAwayFromThePole) {
  // ∂tγ = div(A∇γ) + <x, B∇γ>.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    Mat A = spec.A();
    for (int s = 0; s < 10; ++s) {
      double t = 0.6 + 0.3 * u(rng);
      Vec x(spec.N);
      for (int d = 0; d < spec.N; ++d) x(d) = 0.5 * u(rng);
      const double h = 1e-4;
      auto g = [&](double tt) { return k.gamma(GroupPoint{x, tt}); };
      double dt = (-g(t + 2 * h) + 8 * g(t + h) - 8 * g(t - h) + g(t - 2 * h)) / (12 * h);
      KernelSlice sl = k.slice(t);
      double rhs = x.dot(spec.B * sl.grad(x));
      for (int i = 0; i < spec.N; ++i)
        for (int j = 0; j < spec.N; ++j)
          if (A(i, j) != 0) rhs += A(i, j) * sl.hess(x, i, j);
      EXPECT_NEAR(dt, rhs, 1e-6 * (1 + std::abs(dt)));
    }
  }
}

GTEST_TEST(Gamma0, Homogeneity) {
  std::mt19937_64 rng(2);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k0(spec, st, true);
    Region box = Region::cube(spec.N, 1.0, 0.05, 1.0);
    double worst = 0;
    for (int s = 0; s < 1000; ++s) {
      GroupPoint z = box.sample(rng);
      double g = k0.gamma(z);
      if (g < 1e-200) continue;
      for (double lambda : {0.5, 2.0, 10.0}) {
        double gl = k0.gamma(dilate(st, lambda, z));
        worst = std::max(worst, std::abs(gl * std::pow(lambda, st.Q) / g - 1.0));
      }
    }
    EXPECT_LT(worst, 1e-10) << "N=" << spec.N;
  }
}

GTEST_TEST(Split, IdentityIsExact) {
  std::mt19937_64 rng(1);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    KernelConfig cfg;
    Region box = Region::cube(spec.N, 0.3, 1e-3, 0.1);
    for (int s = 0; s < 500; ++s) {
      GroupPoint z = box.sample(rng);
      SplitKernel sk = split_kernels(k, cfg, z);
      EXPECT_DOUBLE_EQ(sk.k0 + sk.k_inf, k.hess(z, cfg.i, cfg.j));
      double n = homogeneous_norm(st, z);
      if (n <= 0.5 * cfg.rho0) EXPECT_EQ(sk.k_inf, 0.0);
      if (n >= cfg.rho0) EXPECT_EQ(sk.k0, 0.0);
    }
  }
}

GTEST_TEST(Cutoff, Profile) {
  EXPECT_EQ(cutoff_eta_norm(0.0, 0.25), 1.0);
  EXPECT_EQ(cutoff_eta_norm(0.125, 0.25), 1.0);
  EXPECT_EQ(cutoff_eta_norm(0.25, 0.25), 0.0);
  EXPECT_DOUBLE_EQ(cutoff_eta_norm(0.1875, 0.25), 0.5);
}

GTEST_TEST(Majorant, FiniteAndGridStable) {
  for (const auto& spec : {fixtures::heat1d(), fixtures::kolmogorov(), fixtures::kolmogorov_perturbed()}) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    AuditEntry e = audit_decay_majorant(k, KernelConfig{});
    EXPECT_TRUE(e.pass) << e.get("c") << " " << e.get("refinement_ratio");
  }
}

GTEST_TEST(StandardEstimates, SupremaFiniteAndStable) {
  for (const auto& spec : {fixtures::heat1d(), fixtures::kolmogorov()}) {
    auto st = validate_structure(spec);
    Kernel k(spec, st);
    AuditEntry e = audit_standard_estimates(k, KernelConfig{});
    EXPECT_TRUE(e.pass) << e.get("refine_growth") << " " << e.get("refine_first") << " " << e.get("refine_second");
    EXPECT_GT(e.get("growth"), 0.0);
  }
}

GTEST_TEST(Polar, VolumeOfUnitShell) {
  // ∫_{r1<‖w‖<r2} dw = |B(0,1)| (r2^{Q+2} - r1^{Q+2}); heat1d has |B(0,1)| = 4/3.
  auto st = validate_structure(fixtures::heat1d());
  PolarRule rule;
  rule.causal = false;
  double v = polar_integrate(st, {0.0, 1.0}, rule, [](double, double) { return [](const Vec&) { return 1.0; }; });
  EXPECT_NEAR(v, 4.0 / 3.0, 1e-12);

  auto stk = validate_structure(fixtures::kolmogorov());
  double vk = polar_integrate(stk, {0.0, 1.0}, rule, [](double, double) { return [](const Vec&) { return 1.0; }; });
  // |{a + b^{1/3} < m}| in (x1, x2) = 4 ∫_0^m (m - a)³ da = m⁴, then ∫_{-1}^{1} (1 - √|t|)⁴ dt = 2/15.
  EXPECT_NEAR(vk, 2.0 / 15.0, 1e-12);
}

GTEST_TEST(Cancellation, HeatOffDiagonalIsExactlyZero) {
  auto spec = fixtures::heat2d();
  auto st = validate_structure(spec);
  Kernel k(spec, st);
  KernelConfig cfg;
  cfg.i = 0;
  cfg.j = 1;
  EXPECT_EQ(cancellation_integral(k, cfg, 1e-3, cfg.rho0), 0.0);
}

GTEST_TEST(Cancellation, HeatConverges) {
  auto spec = fixtures::heat1d();
  auto st = validate_structure(spec);
  AuditEntry e = audit_cancellation(Kernel(spec, st), KernelConfig{});
  EXPECT_TRUE(e.pass) << e.headline();
}

GTEST_TEST(Cancellation, HomogeneousShellsVanish) {
  // For γ0 the shell integral of ∂²γ0 over r1 < ‖w‖ < r2 inside {η = 1} is zero.
  auto spec = fixtures::kolmogorov();
  auto st = validate_structure(spec);
  Kernel k(spec, st);
  KernelConfig cfg;
  EXPECT_NEAR(cancellation_integral(k, cfg, 1e-3, 1e-2), 0.0, 1e-9);
}

GTEST_TEST(Cancellation, KolmogorovFamilyConverges) {
  for (const auto& spec : {fixtures::kolmogorov(), fixtures::kolmogorov_perturbed()}) {
    auto st = validate_structure(spec);
    AuditEntry e = audit_cancellation(Kernel(spec, st), KernelConfig{});
    EXPECT_TRUE(e.pass) << e.headline();
  }
}

}  // namespace
}  // namespace hypo
