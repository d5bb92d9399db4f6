#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypo/error.hpp"
#include "hypo/linalg.hpp"

namespace hypo {

/// Constant-coefficient operator div(A∇) + <x, B∇> with A = blockdiag(A0, 0).
struct OperatorSpec {
  int N = 0;
  int p0 = 0;
  Mat A0;
  Mat B;
  double nu = 1.0;

  OperatorSpec() = default;
  OperatorSpec(Mat a0, Mat b, double nu_ = 1.0)
      : N(static_cast<int>(b.rows())), p0(static_cast<int>(a0.rows())), A0(std::move(a0)), B(std::move(b)), nu(nu_) {}

  Mat A() const {
    Mat a = Mat::Zero(N, N);
    a.topLeftCorner(p0, p0) = A0;
    return a;
  }
  double trace_B() const { return B.trace(); }
};

struct BlockStructure {
  std::vector<int> p;
  int r = 0;
  int Q = 0;
  std::vector<int> q;

  int N() const { return static_cast<int>(q.size()); }
  /// First index of block j.
  int offset(int j) const { return std::accumulate(p.begin(), p.begin() + j, 0); }
  /// Trivial structure for N coordinates all in block 0.
  static BlockStructure isotropic(int n) {
    BlockStructure s;
    s.p = {n};
    s.q.assign(n, 1);
    s.Q = n;
    return s;
  }
};

/// Checks ν|ξ|² ≤ <A0ξ,ξ> ≤ |ξ|²/ν.
inline void check_ellipticity(const OperatorSpec& spec) {
  if (spec.A0.rows() != spec.A0.cols() || spec.B.rows() != spec.B.cols() || spec.p0 > spec.N || spec.p0 < 1)
    fail(ErrorKind::InvalidArgument, "inconsistent matrix shapes");
  if (max_abs(spec.A0 - spec.A0.transpose()) != 0.0) fail(ErrorKind::NotSymmetric, "A0 is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(spec.A0);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(spec.nu > 0) || lo < spec.nu || hi > 1.0 / spec.nu)
    fail(ErrorKind::NotSPD, "A0 eigenvalues [" + std::to_string(lo) + ", " + std::to_string(hi) + "] outside [nu, 1/nu]");
}

/// Reads the block partition off the superdiagonal pattern of B and checks
/// the rank of every block B_j.
inline BlockStructure validate_structure(const Eigen::Ref<const Mat>& A0, const Eigen::Ref<const Mat>& B,
                                         double tol = 1e-10) {
  const int N = static_cast<int>(B.rows());
  const int p0 = static_cast<int>(A0.rows());
  if (B.cols() != N || A0.cols() != p0 || p0 < 1 || p0 > N)
    fail(ErrorKind::InvalidArgument, "A0 must be p0 x p0 and B square with p0 <= N");
  if (max_abs(A0 - A0.transpose()) > tol) fail(ErrorKind::NotSymmetric, "A0 is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(A0));
  if (es.eigenvalues().minCoeff() <= tol) fail(ErrorKind::NotSPD, "A0 is not positive definite");

  const double zero = tol * std::max(1.0, max_abs(B));
  BlockStructure st;
  st.p.push_back(p0);
  int s = 0;
  while (true) {
    const int pj1 = st.p.back();
    const int next = s + pj1;
    if (next == N) break;
    int extent = 0;
    for (int row = s; row < next; ++row)
      for (int col = next; col < N; ++col)
        if (std::abs(B(row, col)) > zero) extent = std::max(extent, col - next + 1);
    for (int row = 0; row < s; ++row)
      for (int col = next; col < N; ++col)
        if (std::abs(B(row, col)) > zero) fail(ErrorKind::NotBlockForm, "nonzero entry above the block superdiagonal");
    if (extent == 0) {
      if (max_abs(B.bottomRows(N - next)) > zero || max_abs(B.rightCols(N - next)) > zero)
        fail(ErrorKind::NotBlockForm, "coordinates past index " + std::to_string(next) + " are not reached by a superdiagonal block");
      fail(ErrorKind::RankDeficientBlock, "empty superdiagonal block after index " + std::to_string(next));
    }
    if (extent > pj1) fail(ErrorKind::NotBlockForm, "superdiagonal block wider than the block above it");
    Eigen::JacobiSVD<Mat> svd(B.block(s, next, pj1, extent));
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= tol * sv(0))
      fail(ErrorKind::RankDeficientBlock, "block " + std::to_string(st.p.size()) + " has rank below its width");
    st.p.push_back(extent);
    s = next;
  }
  st.r = static_cast<int>(st.p.size()) - 1;
  for (int j = 0; j <= st.r; ++j)
    for (int k = 0; k < st.p[j]; ++k) st.q.push_back(2 * j + 1);
  st.Q = std::accumulate(st.q.begin(), st.q.end(), 0);
  return st;
}

inline BlockStructure validate_structure(const OperatorSpec& spec, double tol = 1e-10) {
  return validate_structure(spec.A0, spec.B, tol);
}

/// B0: keeps only the superdiagonal blocks B_1..B_r.
inline Mat principal_part(const OperatorSpec& spec, const BlockStructure& st) {
  Mat b0 = Mat::Zero(spec.N, spec.N);
  for (int j = 1; j <= st.r; ++j) {
    int row = st.offset(j - 1), col = st.offset(j);
    b0.block(row, col, st.p[j - 1], st.p[j]) = spec.B.block(row, col, st.p[j - 1], st.p[j]);
  }
  return b0;
}

inline OperatorSpec principal_spec(const OperatorSpec& spec, const BlockStructure& st) {
  return OperatorSpec(spec.A0, principal_part(spec, st), spec.nu);
}

/// Diagonal entries λ^{q_k}.
inline Vec dilation_diag(const BlockStructure& st, double lambda) {
  Vec d(st.N());
  for (int k = 0; k < st.N(); ++k) d(k) = std::pow(lambda, st.q[k]);
  return d;
}

struct Dilation {
  Mat D;
  Mat delta;
};

inline Dilation dilation(const BlockStructure& st, double lambda) {
  if (!(lambda > 0)) fail(ErrorKind::InvalidArgument, "dilation needs lambda > 0");
  Vec d = dilation_diag(st, lambda);
  Dilation out;
  out.D = d.asDiagonal();
  Vec dd(st.N() + 1);
  dd << d, lambda * lambda;
  out.delta = dd.asDiagonal();
  return out;
}

}  // namespace hypo
