#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hypo/group_geometry.hpp"
#include "test_support.hpp"

namespace hypo {
namespace {

double dist_sq(const GroupPoint& a, const GroupPoint& b) { return (a.x - b.x).squaredNorm() + std::pow(a.t - b.t, 2); }

GTEST_TEST(Group, Axioms) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    Group g(spec);
    Region box = Region::cube(spec.N, 2.0);
    std::mt19937_64 rng(11);
    for (int s = 0; s < 200; ++s) {
      GroupPoint a = box.sample(rng), b = box.sample(rng), c = box.sample(rng);
      GroupPoint lhs = g.compose(g.compose(a, b), c), rhs = g.compose(a, g.compose(b, c));
      EXPECT_LT(std::sqrt(dist_sq(lhs, rhs)), 1e-12);
      GroupPoint e = GroupPoint::zero(spec.N);
      EXPECT_LT(std::sqrt(dist_sq(g.compose(a, e), a)), 1e-12);
      EXPECT_LT(std::sqrt(dist_sq(g.compose(e, a), a)), 1e-12);
      EXPECT_LT(std::sqrt(dist_sq(g.compose(a, g.invert(a)), e)), 1e-12);
      EXPECT_LT(std::sqrt(dist_sq(g.compose(g.invert(a), a), e)), 1e-12);
    }
  }
}

GTEST_TEST(Group, KolmogorovComposition) {
  Group g(fixtures::kolmogorov());
  GroupPoint z{(Vec(2) << 1, 0).finished(), 0.0};
  GroupPoint w{Vec::Zero(2), 1.0};
  GroupPoint r = g.compose(z, w);
  EXPECT_DOUBLE_EQ(r.x(0), 1.0);
  EXPECT_DOUBLE_EQ(r.x(1), -1.0);
  EXPECT_DOUBLE_EQ(r.t, 1.0);

  // E(τ) = [[1, 0], [-τ, 1]]
  Mat e = g.E(0.5);
  EXPECT_DOUBLE_EQ(e(1, 0), -0.5);
  EXPECT_DOUBLE_EQ(e(0, 1), 0.0);
}

GTEST_TEST(Group, QuotientsMatchComposition) {
  auto spec = fixtures::kolmogorov_perturbed();
  Group g(spec);
  Region box = Region::cube(2, 1.0);
  std::mt19937_64 rng(3);
  for (int s = 0; s < 100; ++s) {
    GroupPoint z = box.sample(rng), w = box.sample(rng);
    EXPECT_LT(std::sqrt(dist_sq(g.left_quotient(w, z), g.compose(g.invert(w), z))), 1e-12);
    EXPECT_LT(std::sqrt(dist_sq(g.right_quotient(z, w), g.compose(z, g.invert(w)))), 1e-12);
  }
}

GTEST_TEST(Norm, Examples) {
  auto st = validate_structure(fixtures::kolmogorov());
  EXPECT_DOUBLE_EQ(homogeneous_norm(st, (Vec(2) << 8, 27).finished(), 4.0), 13.0);
  EXPECT_DOUBLE_EQ(homogeneous_norm(st, (Vec(2) << -8, -27).finished(), -4.0), 13.0);
  auto st3 = validate_structure(fixtures::chain3());
  EXPECT_NEAR(homogeneous_norm(st3, (Vec(3) << 1, 8, 32).finished(), 9.0), 1 + 2 + 2 + 3, 1e-14);
  EXPECT_EQ(homogeneous_norm(st, GroupPoint::zero(2)), 0.0);
}

GTEST_TEST(Norm, Homogeneity) {
  std::mt19937_64 rng(5);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Region box = Region::cube(spec.N, 3.0);
    for (int s = 0; s < 1000; ++s) {
      GroupPoint z = box.sample(rng);
      double n = homogeneous_norm(st, z);
      for (double lambda : {0.5, 2.0, 10.0})
        EXPECT_NEAR(homogeneous_norm(st, dilate(st, lambda, z)), lambda * n, 1e-14 * lambda * n);
    }
  }
}

GTEST_TEST(Quasidistance, LeftInvariantAndDilationCompatible) {
  std::mt19937_64 rng(8);
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    auto st = validate_structure(spec);
    Group g(spec);
    Region box = Region::cube(spec.N, 1.0);
    for (int s = 0; s < 200; ++s) {
      GroupPoint z = box.sample(rng), zeta = box.sample(rng), h = box.sample(rng);
      double d = quasidistance(g, st, z, zeta);
      EXPECT_NEAR(quasidistance(g, st, g.compose(h, z), g.compose(h, zeta)), d, 1e-10 * (1 + d));
    }
    // Principal part commutes with dilations: d0(δz, δζ) = λ d0(z, ζ).
    Group g0(principal_spec(spec, st));
    for (int s = 0; s < 100; ++s) {
      GroupPoint z = box.sample(rng), zeta = box.sample(rng);
      double d = quasidistance(g0, st, z, zeta);
      EXPECT_NEAR(quasidistance(g0, st, dilate(st, 3.0, z), dilate(st, 3.0, zeta)), 3.0 * d, 1e-10 * d);
    }
  }
}

GTEST_TEST(Jacobian, RightQuotientDeterminant) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    Group g(spec);
    const int n = spec.N;
    GroupPoint z{Vec::LinSpaced(n, 0.3, -0.4), 0.2};
    for (double tau : {-0.7, 0.4, 1.3}) {
      GroupPoint w{Vec::LinSpaced(n, -0.2, 0.5), tau};
      Mat J(n + 1, n + 1);
      const double h = 1e-5;
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
      EXPECT_NEAR(std::abs(J.determinant()), jacobian_factor(spec, tau), 1e-6);
    }
  }
}

GTEST_TEST(QuasiConstants, HeatIsSymmetricAndTriangular) {
  auto spec = fixtures::heat2d();
  auto st = validate_structure(spec);
  QuasiConstants c = probe_quasi_constants(spec, st, 5000, Region::cube(2, 1.0));
  EXPECT_NEAR(c.c_sym, 1.0, 1e-12);
  EXPECT_LE(c.c_tri, 1.0 + 1e-12);
}

GTEST_TEST(QuasiConstants, KolmogorovFinite) {
  auto spec = fixtures::kolmogorov();
  auto st = validate_structure(spec);
  QuasiConstants c = probe_quasi_constants(spec, st, 5000, Region::cube(2, 1.0));
  EXPECT_TRUE(std::isfinite(c.c_sym));
  EXPECT_GT(c.c_sym, 1.0);
  EXPECT_LT(c.c_sym, 10.0);
  EXPECT_LT(c.c_tri, 10.0);
}

GTEST_TEST(BallVolume, HeatClosedForm) {
  // {|x| + |t|^{1/2} < ρ} has volume 4ρ³/3.
  auto spec = fixtures::heat1d();
  auto st = validate_structure(spec);
  for (double rho : {0.1, 0.5}) {
    double v = ball_volume(spec, st, GroupPoint::zero(1), rho, 400000, 9);
    EXPECT_NEAR(v / (4.0 / 3.0 * std::pow(rho, 3)), 1.0, 0.01);
  }
}

GTEST_TEST(BallVolume, SlopeIsHomogeneousDimension) {
  for (const auto& spec : {fixtures::heat1d(), fixtures::heat2d(), fixtures::kolmogorov(),
                           fixtures::kolmogorov_perturbed(), fixtures::chain3()}) {
    auto st = validate_structure(spec);
    AuditEntry e = audit_ball_volume_slope(spec, st);
    EXPECT_TRUE(e.pass) << e.headline() << " expected " << st.Q + 2;
  }
}

GTEST_TEST(BallVolume, Doubling) {
  for (const auto& spec : {fixtures::heat1d(), fixtures::kolmogorov(), fixtures::kolmogorov_perturbed()}) {
    auto st = validate_structure(spec);
    AuditEntry e = audit_doubling(spec, st);
    EXPECT_TRUE(e.pass) << "c=" << e.get("c") << " drift=" << e.get("refinement_drift");
  }
}

GTEST_TEST(Covering, RadiusChain) {
  EXPECT_DOUBLE_EQ(covering_radius(1.0, 2.0, 1.0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(covering_radius(10.0, 2.0, 1.0), 0.5);
  EXPECT_EQ(fixtures::error_kind([] { covering_radius(1.0, 0.5, 1.0); }), ErrorKind::ConstraintInfeasible);
}

GTEST_TEST(Covering, HeatUnitBox) {
  auto spec = fixtures::heat1d();
  auto st = validate_structure(spec);
  Region region = Region::cube(1, 1.0);
  Covering cov = cover_region(spec, st, region, 1.0, 2.0, 1.0);
  EXPECT_TRUE(cov.covered) << cov.uncovered << " of " << cov.validation_points;
  EXPECT_GT(cov.centers.size(), 1u);
  EXPECT_GE(cov.overlap, 1);
  EXPECT_LT(cov.overlap, 1000);
  // Pairwise separation.
  Group g(spec);
  for (std::size_t a = 0; a < cov.centers.size(); ++a)
    for (std::size_t b = a + 1; b < cov.centers.size(); ++b)
      EXPECT_GE(quasidistance(g, st, cov.centers[a], cov.centers[b]), cov.rho / (cov.C + 1) - 1e-12);
}

GTEST_TEST(Covering, KolmogorovUnitBoxIsTooLarge) {
  auto spec = fixtures::kolmogorov();
  auto st = validate_structure(spec);
  QuasiConstants c = probe_quasi_constants(spec, st, 2000, Region::cube(2, 1.0));
  double C = std::max({1.0, c.c_sym, c.c_tri});
  EXPECT_EQ(fixtures::error_kind([&] { cover_region(spec, st, Region::cube(2, 1.0), 1.0, 2.0, C); }),
            ErrorKind::CoveringTooLarge);
}

}  // namespace
}  // namespace hypo
