#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "hypo/sde_sim.hpp"
#include "test_support.hpp"

namespace hypo {
namespace {

Vec sample_mean(const SampleSet& s) {
  Vec m = Vec::Zero(s.points.front().size());
  for (const Vec& y : s.points) m += y;
  return m / s.size();
}

Mat sample_cov(const SampleSet& s) {
  Vec m = sample_mean(s);
  Mat c = Mat::Zero(m.size(), m.size());
  for (const Vec& y : s.points) c += (y - m) * (y - m).transpose();
  return c / (s.size() - 1.0);
}

GTEST_TEST(ScalarOU, GatePasses) {
  AuditEntry e = audit_scalar_ou_gate();
  EXPECT_TRUE(e.pass) << e.headline();
  // a = 1, b = 0.5, t = 1: variance 2(e - 1).
  EXPECT_NEAR(scalar_ou_density(1.0, 0.5, 1.0, 0.0, 0.0), 1.0 / std::sqrt(2 * M_PI * 2 * (M_E - 1)), 1e-15);
}

GTEST_TEST(ExactSample, BrownianCase) {
  auto spec = fixtures::heat2d();
  Vec x0 = (Vec(2) << 0.3, -0.2).finished();
  SampleSet s = exact_sample(spec, x0, 0.5, 100000, 1);
  Mat c = sample_cov(s);
  EXPECT_LT((sample_mean(s) - x0).cwiseAbs().maxCoeff(), 4 * std::sqrt(1.0 / 100000));
  EXPECT_NEAR(c(0, 0), 1.0, 0.02);
  EXPECT_NEAR(c(1, 1), 1.0, 0.02);
  EXPECT_NEAR(c(0, 1), 0.0, 0.02);
}

GTEST_TEST(ExactSample, KolmogorovMomentsAndReproducibility) {
  auto spec = fixtures::kolmogorov();
  Vec x0 = (Vec(2) << 1.0, 0.0).finished();
  const std::size_t n = 100000;
  SampleSet s = exact_sample(spec, x0, 1.0, n, 2, 4);
  Mat cov_exact(2, 2);
  cov_exact << 2, 1, 1, 2.0 / 3.0;
  Vec m_exact = drift_exponential(spec, -1.0) * x0;  // (1, 1)
  EXPECT_NEAR(m_exact(1), 1.0, 1e-14);
  Vec m = sample_mean(s);
  for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(m(k) - m_exact(k)), 4 * std::sqrt(cov_exact(k, k) / n));
  EXPECT_LT((sample_cov(s) - cov_exact).cwiseAbs().maxCoeff(), 0.03);
  SampleSet again = exact_sample(spec, x0, 1.0, n, 2, 1);
  EXPECT_EQ(again.points[12345], s.points[12345]);
}

GTEST_TEST(ExactSample, RejectsSingular) {
  EXPECT_EQ(fixtures::error_kind([] { exact_sample(fixtures::degenerate(), Vec::Zero(2), 1.0, 10, 1); }),
            ErrorKind::SingularCovariance);
}

GTEST_TEST(EulerMaruyama, Contract) {
  auto spec = fixtures::kolmogorov();
  EXPECT_EQ(fixtures::error_kind([&] { euler_maruyama(spec, Vec::Zero(2), 1.0, 8, 10, 1); }),
            ErrorKind::InvalidArgument);
  EXPECT_EQ(euler_maruyama(spec, Vec::Zero(2), 1.0, 16, 0, 1).size(), 0u);
}

GTEST_TEST(EulerMaruyama, DriftOnlyFlow) {
  // A0 = 0 is not a valid operator; the noiseless flow is only a harness check.
  Vec x0 = (Vec(2) << 1.0, 0.5).finished();
  // Nilpotent B: (I + ΔtBᵀ)^n = I + tBᵀ = exp(tBᵀ).
  OperatorSpec nil(Mat::Zero(1, 1), fixtures::kolmogorov().B);
  EXPECT_LT((euler_maruyama(nil, x0, 1.0, 16, 1, 3).points[0] - drift_exponential(nil, -1.0) * x0).norm(), 1e-14);
  OperatorSpec flow(Mat::Zero(1, 1), fixtures::kolmogorov_perturbed().B);
  Vec exact = drift_exponential(flow, -1.0) * x0;
  double prev = 1e9;
  for (int steps : {64, 128, 256}) {
    double err = (euler_maruyama(flow, x0, 1.0, steps, 1, 3).points[0] - exact).norm();
    EXPECT_LT(err, 2.0 / steps);
    EXPECT_LT(err, 0.6 * prev);
    prev = err;
  }
}

GTEST_TEST(EulerMaruyama, ConvergesToExactLaw) {
  auto spec = fixtures::kolmogorov_perturbed();
  Vec x0 = (Vec(2) << 0.5, -0.5).finished();
  SampleSet ref = exact_sample(spec, x0, 1.0, 2000, 4);
  double coarse = energy_distance(euler_maruyama(spec, x0, 1.0, 16, 2000, 5).points, ref.points);
  double fine = energy_distance(euler_maruyama(spec, x0, 1.0, 256, 2000, 5).points, ref.points);
  EXPECT_LT(fine, coarse);
}

GTEST_TEST(Density, CandidateNormalization) {
  for (const auto& spec : fixtures::shipped_hypoelliptic()) {
    Vec x0 = Vec::LinSpaced(spec.N, 0.5, -0.5);
    DensityMass m = density_mass(spec, x0, 0.7);
    EXPECT_NEAR(m.box, 1.0, 1e-8 + m.tail_bound) << "N=" << spec.N;
  }
}

GTEST_TEST(Density, HeatAndKolmogorovTV) {
  for (const auto& spec : {fixtures::heat1d(), fixtures::heat2d(), fixtures::kolmogorov(), fixtures::kolmogorov_perturbed()}) {
    Vec x0 = Vec::Zero(spec.N);
    x0(0) = 1.0;
    SampleSet s = exact_sample(spec, x0, 1.0, 100000, 6);
    AuditEntry e = density_crosscheck(spec, x0, 1.0, s, spec.N == 1 ? 100 : 10);
    EXPECT_TRUE(e.pass) << "N=" << spec.N << " tv=" << e.get("tv");
  }
}

GTEST_TEST(Density, WrongConventionIsDetected) {
  // Samples of the reversed drift do not follow γ(x0 - E(t)y, t).
  auto spec = fixtures::kolmogorov_perturbed();
  OperatorSpec reversed(spec.A0, -spec.B);
  Vec x0 = (Vec(2) << 1.0, 0.0).finished();
  SampleSet s = exact_sample(reversed, x0, 1.0, 100000, 7);
  EXPECT_FALSE(density_crosscheck(spec, x0, 1.0, s, 10).pass);
}

GTEST_TEST(ChapmanKolmogorov, ComposedStepsMatch) {
  for (const auto& spec : {fixtures::kolmogorov(), fixtures::kolmogorov_perturbed()}) {
    AuditEntry e = audit_chapman_kolmogorov(spec, (Vec(2) << 0.5, 0.2).finished(), 0.4, 0.6);
    EXPECT_TRUE(e.pass) << e.headline() << " vs " << e.get("threshold");
  }
}

GTEST_TEST(ChapmanKolmogorov, DetectsWrongComposition) {
  auto spec = fixtures::kolmogorov();
  Vec x0 = (Vec(2) << 0.5, 0.2).finished();
  SampleSet a = exact_sample(spec, x0, 1.0, 1500, 1), b = exact_sample(spec, x0, 0.6, 1500, 2);
  SampleSet c = exact_sample(spec, x0, 1.0, 1500, 3);
  EXPECT_GT(energy_distance(a.points, b.points), 10 * energy_distance(a.points, c.points));
}

GTEST_TEST(Variance, KolmogorovCubicScaling) {
  AuditEntry e = audit_variance_slope(fixtures::kolmogorov(), {0.1, 0.2, 0.4}, 3.0);
  EXPECT_TRUE(e.pass) << e.headline();
  AuditEntry c = audit_variance_slope(fixtures::chain3(), {0.1, 0.2, 0.4}, 5.0);
  EXPECT_TRUE(c.pass) << c.headline();
}

GTEST_TEST(SampleSet, Export) {
  SampleSet s = exact_sample(fixtures::kolmogorov(), Vec::Zero(2), 1.0, 3, 8);
  std::ostringstream os;
  s.write_table(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("# method=exact", 0), 0u);
  int idx;
  double y1, y2;
  is >> idx >> y1 >> y2;
  EXPECT_EQ(idx, 0);
  EXPECT_DOUBLE_EQ(y1, s.points[0](0));
  EXPECT_DOUBLE_EQ(y2, s.points[0](1));
}

}  // namespace
}  // namespace hypo
