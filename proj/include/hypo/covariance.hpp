#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypo/audit.hpp"
#include "hypo/error.hpp"
#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"

namespace hypo {

/// E(s) = exp(-s Bᵀ).
inline Mat drift_exponential(const OperatorSpec& spec, double s) { return expm(-s * spec.B.transpose()); }

/// ∫₀ᵗ exp(sM) A exp(sMᵀ) ds by the Van Loan block exponential of
/// [[-M, A], [0, Mᵀ]].
inline Mat gramian_integral(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& A, double t) {
  const int n = static_cast<int>(M.rows());
  if (t == 0.0) return Mat::Zero(n, n);
  double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  if (std::abs(t) * norm1 > 500.0)
    fail(ErrorKind::ExpOverflow, "|t|·|B| = " + std::to_string(std::abs(t) * norm1) + " too large; subdivide");
  Mat H = Mat::Zero(2 * n, 2 * n);
  H.topLeftCorner(n, n) = -M;
  H.topRightCorner(n, n) = A;
  H.bottomRightCorner(n, n) = M.transpose();
  Mat F = expm(t * H);
  Mat out = F.bottomRightCorner(n, n).transpose() * F.topRightCorner(n, n);
  if (!out.allFinite()) fail(ErrorKind::CovarianceFailure, "non-finite Gramian");
  return symmetrize(out);
}

/// C(t) = ∫₀ᵗ E(s) A E(s)ᵀ ds.
inline Mat covariance_C(const OperatorSpec& spec, double t) {
  if (t < 0) fail(ErrorKind::InvalidArgument, "covariance needs t >= 0");
  return gramian_integral(-spec.B.transpose(), spec.A(), t);
}

inline Mat covariance_C0(const OperatorSpec& spec, const BlockStructure& st, double t) {
  return covariance_C(principal_spec(spec, st), t);
}

/// Q_t = ∫₀ᵗ exp(sBᵀ) A exp(sB) ds.
inline Mat gramian_Q(const OperatorSpec& spec, double t) {
  if (t < 0) fail(ErrorKind::InvalidArgument, "Gramian needs t >= 0");
  return gramian_integral(spec.B.transpose(), spec.A(), t);
}

/// C(t) = D(√t) C̃ D(√t), with C̃ computed from the rescaled drift
/// t·D(1/√t)Bᵀ D(√t) over unit time. C̃ stays O(1)-conditioned as t → 0, so
/// quadratic forms and determinants keep full relative accuracy.
class ScaledCovariance {
 public:
  ScaledCovariance() = default;
  ScaledCovariance(const OperatorSpec& spec, const BlockStructure& st, double t) : t_(t) {
    if (!(t > 0)) fail(ErrorKind::InvalidArgument, "scaled covariance needs t > 0");
    const int n = spec.N;
    s_ = dilation_diag(st, std::sqrt(t));
    Mat M = t * (s_.cwiseInverse().asDiagonal() * spec.B.transpose() * s_.asDiagonal());
    // t·D(1/√t) A D(1/√t) = A since A lives on the q = 1 block.
    ct_ = gramian_integral(-M, spec.A(), 1.0);
    factor(n, st);
  }

  double t() const { return t_; }
  const Mat& scaled() const { return ct_; }
  /// D(√t) diagonal.
  const Vec& scale() const { return s_; }
  Mat full() const { return s_.asDiagonal() * ct_ * s_.asDiagonal(); }
  double log_det() const { return log_det_scaled_ + log_scale_sq_; }
  double det() const { return std::exp(log_det()); }
  double log_det_scaled() const { return log_det_scaled_; }

  /// C̃⁻¹ y.
  Vec solve_scaled(const Vec& y) const {
    if (use_eig_) return V_ * (V_.transpose() * y).cwiseQuotient(ev_);
    return llt_.solve(y);
  }
  /// C⁻¹ x.
  Vec inv_apply(const Vec& x) const {
    Vec y = x.cwiseQuotient(s_);
    return solve_scaled(y).cwiseQuotient(s_);
  }
  /// <C⁻¹ x, x>.
  double inv_quad(const Vec& x) const {
    Vec y = x.cwiseQuotient(s_);
    return y.dot(solve_scaled(y));
  }
  /// <C x, x>.
  double quad(const Vec& x) const {
    Vec y = x.cwiseProduct(s_);
    return y.dot(ct_ * y);
  }
  /// (C⁻¹)_{ij}.
  double inv_entry(int i, int j) const { return inv_scaled_(i, j) / (s_(i) * s_(j)); }
  Mat inverse() const { return s_.cwiseInverse().asDiagonal() * inv_scaled_ * s_.cwiseInverse().asDiagonal(); }

 private:
  void factor(int n, const BlockStructure& st) {
    Eigen::SelfAdjointEigenSolver<Mat> es(ct_);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-14 * hi)) fail(ErrorKind::SingularCovariance, "covariance is singular at t = " + std::to_string(t_));
    use_eig_ = lo < 1e-8 * hi;
    if (use_eig_) {
      V_ = es.eigenvectors();
      ev_ = es.eigenvalues();
      log_det_scaled_ = ev_.array().log().sum();
      inv_scaled_ = V_ * ev_.cwiseInverse().asDiagonal() * V_.transpose();
    } else {
      llt_.compute(ct_);
      log_det_scaled_ = 2.0 * Mat(llt_.matrixL()).diagonal().array().log().sum();
      inv_scaled_ = llt_.solve(Mat::Identity(n, n));
    }
    log_scale_sq_ = st.Q * std::log(t_);
  }

  double t_ = 0;
  Vec s_;
  Mat ct_;
  Eigen::LLT<Mat> llt_;
  bool use_eig_ = false;
  Mat V_;
  Vec ev_;
  Mat inv_scaled_;
  double log_det_scaled_ = 0;
  double log_scale_sq_ = 0;
};

struct CovarianceSet {
  double t = 0;
  Mat E;
  Mat C;
  Mat C0;
  Mat Qt;
  double detC = 0;
  std::optional<Mat> chol;
};

inline CovarianceSet covariance_set(const OperatorSpec& spec, const BlockStructure& st, double t) {
  CovarianceSet cs;
  cs.t = t;
  cs.E = drift_exponential(spec, t);
  cs.C = covariance_C(spec, t);
  cs.C0 = covariance_C0(spec, st, t);
  cs.Qt = gramian_Q(spec, t);
  Eigen::LLT<Mat> llt(cs.C);
  if (t > 0 && llt.info() == Eigen::Success) {
    Mat L = llt.matrixL();
    cs.chol = L;
    double p = L.diagonal().prod();
    cs.detC = p * p;
  } else {
    cs.detC = cs.C.determinant();
  }
  return cs;
}

/// True iff λ_min(C(t0)) > tol · λ_max(C(t0)).
inline bool is_hypoelliptic(const OperatorSpec& spec, double t0 = 1.0, double tol = 1e-12) {
  if (!(t0 > 0)) fail(ErrorKind::InvalidArgument, "t0 must be positive");
  Mat C = covariance_C(spec, t0);
  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  if (es.info() != Eigen::Success) fail(ErrorKind::CovarianceFailure, "eigen-solver failed");
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  return hi > 0 && lo > tol * hi;
}

inline AuditEntry audit_dilation_identity(const OperatorSpec& spec, const BlockStructure& st, double t, double lambda) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "covariance.dilation_identity";
  e.anchor = "C0(l^2 t) = D(l) C0(t) D(l)";
  e.param("t", t).param("lambda", lambda);
  Mat lhs = covariance_C0(spec, st, lambda * lambda * t);
  Mat D = dilation(st, lambda).D;
  Mat rhs = D * covariance_C0(spec, st, t) * D;
  double err = (lhs - rhs).norm() / lhs.norm();
  e.value("rel_error", err);
  e.bound = 1e-9;
  e.tolerance = 1e-9;
  e.pass = err <= 1e-9;
  e.runtime_ms = sw.ms();
  return e;
}

/// Ratios <Cx,x>/<C0x,x>, <C⁻¹x,x>/<C0⁻¹x,x>, det C/det C0 on a ladder of
/// times; passes iff every |ρ-1| decays at least linearly (fitted slope ≥ 0.8).
inline AuditEntry audit_small_time(const OperatorSpec& spec, const BlockStructure& st,
                                   const std::vector<double>& ladder, const Vec& x) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "covariance.small_time";
  e.anchor = "C(t) = C0(t)(1+O(t)), det C(t) = det C0(t)(1+O(t))";
  e.param("x_norm", x.norm()).param("ladder_size", static_cast<double>(ladder.size()));
  if (x.norm() == 0) fail(ErrorKind::InvalidArgument, "small-time audit needs x != 0");
  OperatorSpec p = principal_spec(spec, st);
  std::vector<double> dq, dinv, ddet;
  for (double t : ladder) {
    ScaledCovariance c(spec, st, t), c0(p, st, t);
    dq.push_back(std::abs(c.quad(x) / c0.quad(x) - 1.0));
    dinv.push_back(std::abs(c.inv_quad(x) / c0.inv_quad(x) - 1.0));
    ddet.push_back(std::abs(std::exp(c.log_det_scaled() - c0.log_det_scaled()) - 1.0));
  }
  bool pass = true;
  double worst_slope = INFINITY, K = 0.0;
  const char* names[] = {"quad", "inv_quad", "det"};
  std::vector<double>* series[] = {&dq, &dinv, &ddet};
  for (int s = 0; s < 3; ++s) {
    const auto& d = *series[s];
    double dmax = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      dmax = std::max(dmax, d[k]);
      K = std::max(K, d[k] / ladder[k]);
    }
    double slope;
    if (dmax <= 1e-13) {
      slope = INFINITY;
    } else {
      // Entries at roundoff level would flatten the fit; clamp them to it.
      std::vector<double> dd(d);
      for (auto& v : dd) v = std::max(v, 1e-16);
      slope = loglog_slope(ladder, dd);
      if (slope < 0.8) pass = false;
    }
    e.value(std::string("slope_") + names[s], slope);
    worst_slope = std::min(worst_slope, slope);
  }
  e.measured.insert(e.measured.begin(), {"min_slope", worst_slope});
  e.value("K", K);
  e.value("max_dev_quad", quantile(dq, 1.0));
  e.value("max_dev_inv_quad", quantile(dinv, 1.0));
  e.value("max_dev_det", quantile(ddet, 1.0));
  e.bound = 0.8;
  e.tolerance = 0.2;
  e.pass = pass;
  e.runtime_ms = sw.ms();
  return e;
}

}  // namespace hypo
