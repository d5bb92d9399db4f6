#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hypo/covariance.hpp"
#include "test_support.hpp"

namespace hypo {
namespace {

// Entry-wise adaptive Gauss–Kronrod of ∫₀ᵗ f(s) ds for a matrix integrand.
Mat quad_matrix(const std::function<Mat(double)>& f, double t, int n) {
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          [&](double s) { return f(s)(i, j); }, 0.0, t, 15, 1e-14);
  return out;
}

Mat oracle_C(const OperatorSpec& spec, double t) {
  Mat A = spec.A();
  Mat Bt = spec.B.transpose();
  return quad_matrix([&](double s) { Mat E = (-s * Bt).exp(); return Mat(E * A * E.transpose()); }, t, spec.N);
}

Mat oracle_Q(const OperatorSpec& spec, double t) {
  Mat A = spec.A();
  Mat Bt = spec.B.transpose();
  return quad_matrix([&](double s) { Mat E = (s * Bt).exp(); return Mat(E * A * E.transpose()); }, t, spec.N);
}

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

GTEST_TEST(DriftExponential, NilpotentSeries) {
  auto kol = fixtures::kolmogorov();
  for (double s : {-1.5, 0.0, 0.3, 2.0}) {
    Mat expected(2, 2);
    expected << 1, 0, -s, 1;
    EXPECT_LT(max_abs(drift_exponential(kol, s) - expected), 1e-15);
  }
  EXPECT_TRUE(drift_exponential(fixtures::heat2d(), 3.0).isIdentity(0.0));
  Mat b(1, 1);
  b << 0.7;
  OperatorSpec scalar(Mat::Identity(1, 1), b);
  EXPECT_NEAR(drift_exponential(scalar, 1.3)(0, 0), std::exp(-1.3 * 0.7), 1e-15);
}

GTEST_TEST(DriftExponential, GroupLaw) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    for (double s : {-2.0, -0.5, 0.7, 2.0})
      for (double u : {-1.1, 0.2, 1.9}) {
        Mat lhs = drift_exponential(spec, s) * drift_exponential(spec, u);
        EXPECT_LT(rel(lhs, drift_exponential(spec, s + u)), 1e-12);
      }
    EXPECT_LT(max_abs(drift_exponential(spec, 0.8) * drift_exponential(spec, -0.8) - Mat::Identity(spec.N, spec.N)),
              1e-13);
  }
}

GTEST_TEST(Covariance, KolmogorovClosedForm) {
  auto kol = fixtures::kolmogorov();
  Mat expected(2, 2);
  expected << 1, -0.5, -0.5, 1.0 / 3.0;
  Mat C = covariance_C(kol, 1.0);
  EXPECT_LT(max_abs(C - expected), 1e-12);
  EXPECT_NEAR(C.determinant(), 1.0 / 12.0, 1e-14);

  Mat q(2, 2);
  q << 1, 0.5, 0.5, 1.0 / 3.0;
  EXPECT_LT(max_abs(gramian_Q(kol, 1.0) - q), 1e-12);
  Mat P(2, 2);
  P << 1, 0, 1, 1;
  EXPECT_LT(max_abs(P * C * P.transpose() - q), 1e-12);
}

GTEST_TEST(Covariance, TrivialCases) {
  OperatorSpec heat(Mat::Identity(2, 2), Mat::Zero(3, 3).topLeftCorner(2, 2));
  for (double t : {0.0, 0.5, 3.0}) {
    EXPECT_LT(max_abs(covariance_C(heat, t) - t * Mat::Identity(2, 2)), 1e-14);
    EXPECT_LT(max_abs(gramian_Q(heat, t) - covariance_C(heat, t)), 1e-14);
  }
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    EXPECT_EQ(covariance_C(spec, 0.0), Mat::Zero(spec.N, spec.N));
    EXPECT_EQ(gramian_Q(spec, 0.0), Mat::Zero(spec.N, spec.N));
  }
}

GTEST_TEST(Covariance, PrincipalPartCovariance) {
  Mat b(2, 2);
  b << 5, 1, 0, 0;
  OperatorSpec spec(Mat::Identity(1, 1), b);
  BlockStructure st = validate_structure(spec);
  Mat expected(2, 2);
  expected << 1, -0.5, -0.5, 1.0 / 3.0;
  EXPECT_LT(max_abs(covariance_C0(spec, st, 1.0) - expected), 1e-12);
  auto kol = fixtures::kolmogorov();
  EXPECT_LT(max_abs(covariance_C0(kol, validate_structure(kol), 0.7) - covariance_C(kol, 0.7)), 1e-15);
}

GTEST_TEST(Covariance, VanLoanMatchesQuadrature) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    for (double t : {0.25, 1.0, 2.0}) {
      EXPECT_LT(rel(covariance_C(spec, t), oracle_C(spec, t)), 1e-9) << spec.B;
      EXPECT_LT(rel(gramian_Q(spec, t), oracle_Q(spec, t)), 1e-9) << spec.B;
    }
  }
}

GTEST_TEST(Covariance, GramianRelationAndFlow) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    for (double t : {0.25, 1.0, 2.0}) {
      Mat et = drift_exponential(spec, -t);  // exp(tBᵀ)
      Mat lhs = et * covariance_C(spec, t) * et.transpose();
      EXPECT_LT(rel(lhs, gramian_Q(spec, t)), 1e-10);
    }
    for (double t : {0.1, 0.5, 1.0})
      for (double s : {0.1, 0.5, 1.0}) {
        Mat et = drift_exponential(spec, -t);
        Mat rhs = gramian_Q(spec, t) + et * gramian_Q(spec, s) * et.transpose();
        EXPECT_LT(rel(gramian_Q(spec, t + s), rhs), 1e-9);
      }
  }
}

GTEST_TEST(Covariance, Monotone) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    double prev_t = 0.0;
    for (double t : {0.1, 0.3, 1.0, 2.5}) {
      Mat d = covariance_C(spec, t) - covariance_C(spec, prev_t);
      Eigen::SelfAdjointEigenSolver<Mat> es(d);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * covariance_C(spec, t).norm());
      prev_t = t;
    }
  }
}

GTEST_TEST(Covariance, OverflowGuard) {
  Mat b(1, 1);
  b << 100.0;
  OperatorSpec spec(Mat::Identity(1, 1), b);
  EXPECT_EQ(fixtures::error_kind([&] { covariance_C(spec, 10.0); }), ErrorKind::ExpOverflow);
}

GTEST_TEST(ScaledCovariance, AgreesWithDirect) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    BlockStructure st = validate_structure(spec);
    for (double t : {0.05, 0.5, 2.0}) {
      ScaledCovariance sc(spec, st, t);
      Mat C = covariance_C(spec, t);
      EXPECT_LT(rel(sc.full(), C), 1e-12);
      EXPECT_NEAR(sc.det() / C.determinant(), 1.0, 1e-9);
      EXPECT_LT(rel(sc.inverse(), Mat(C.inverse())), 1e-8);
      Vec x = Vec::LinSpaced(spec.N, 0.3, 1.1);
      EXPECT_NEAR(sc.inv_quad(x) / x.dot(C.inverse() * x), 1.0, 1e-8);
    }
  }
}

GTEST_TEST(ScaledCovariance, SmallTimeKolmogorov) {
  // C(t) = [[t, -t²/2], [-t²/2, t³/3]] in closed form; det = t⁴/12.
  auto kol = fixtures::kolmogorov();
  BlockStructure st = validate_structure(kol);
  for (double t : {1e-2, 1e-4, 1e-6}) {
    ScaledCovariance sc(kol, st, t);
    EXPECT_NEAR(sc.det() / (std::pow(t, 4) / 12.0), 1.0, 1e-12);
    Mat Cinv(2, 2);
    Cinv << 4 / t, 6 / (t * t), 6 / (t * t), 12 / (t * t * t);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(sc.inv_entry(i, j) / Cinv(i, j), 1.0, 1e-11);
  }
}

GTEST_TEST(CovarianceSet, Invariants) {
  auto spec = fixtures::kolmogorov_perturbed();
  BlockStructure st = validate_structure(spec);
  CovarianceSet cs = covariance_set(spec, st, 0.8);
  ASSERT_TRUE(cs.chol.has_value());
  double p = cs.chol->diagonal().prod();
  EXPECT_NEAR(cs.detC, p * p, 1e-15);
  EXPECT_NEAR(cs.detC / cs.C.determinant(), 1.0, 1e-12);
  Mat et = cs.E.inverse();
  EXPECT_LT(rel(et * cs.C * et.transpose(), cs.Qt), 1e-10);
}

GTEST_TEST(Audits, DilationIdentity) {
  auto kol = fixtures::kolmogorov();
  BlockStructure st = validate_structure(kol);
  Mat c4(2, 2);
  c4 << 4, -8, -8, 64.0 / 3.0;
  EXPECT_LT(rel(covariance_C0(kol, st, 4.0), c4), 1e-13);
  for (double lambda : {0.5, 1.0, 2.0, 10.0}) {
    AuditEntry e = audit_dilation_identity(kol, st, 1.0, lambda);
    EXPECT_TRUE(e.pass) << lambda << " " << e.headline();
  }
  EXPECT_EQ(audit_dilation_identity(kol, st, 1.0, 1.0).headline(), 0.0);
  auto perturbed = fixtures::kolmogorov_perturbed();
  EXPECT_TRUE(audit_dilation_identity(perturbed, validate_structure(perturbed), 0.3, 10.0).pass);
}

GTEST_TEST(Audits, SmallTime) {
  std::vector<double> ladder{1e-1, 1e-2, 1e-3, 1e-4};
  auto kol = fixtures::kolmogorov();
  AuditEntry exact = audit_small_time(kol, validate_structure(kol), ladder, Vec::Ones(2));
  EXPECT_TRUE(exact.pass);
  EXPECT_LE(exact.get("max_dev_quad"), 1e-13);

  auto p = fixtures::kolmogorov_perturbed();
  BlockStructure st = validate_structure(p);
  AuditEntry e = audit_small_time(p, st, ladder, Vec::Ones(2));
  EXPECT_TRUE(e.pass) << e.headline();
  EXPECT_GE(e.headline(), 0.8);
  EXPECT_TRUE(std::isfinite(e.get("K")));

  Vec e1 = Vec::Unit(2, 0);
  AuditEntry a = audit_small_time(p, st, ladder, e1), b = audit_small_time(p, st, ladder, 2.0 * e1);
  EXPECT_NEAR(a.get("max_dev_quad"), b.get("max_dev_quad"), 1e-15);

  auto chain = fixtures::chain3();
  Mat b3 = chain.B;
  b3(0, 0) = 0.4;
  b3(2, 1) = -0.3;
  b3(1, 1) = 0.2;
  OperatorSpec c3(chain.A0, b3);
  EXPECT_TRUE(audit_small_time(c3, validate_structure(c3), ladder, Vec::Ones(3)).pass);
}

GTEST_TEST(Audits, SmallTimeRejectsNonHypoelliptic) {
  auto d = fixtures::degenerate();
  BlockStructure st = BlockStructure::isotropic(2);
  EXPECT_EQ(fixtures::error_kind([&] { audit_small_time(d, st, {0.1}, Vec::Ones(2)); }),
            ErrorKind::SingularCovariance);
}

}  // namespace
}  // namespace hypo
