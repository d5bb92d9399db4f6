#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hypo/error.hpp"
#include "hypo/group_geometry.hpp"
#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"

namespace hypo {

/// Value, spatial gradient, spatial Hessian and ∂t at one point.
struct Jet {
  double value = 0;
  Vec grad;
  Mat hess;
  double dt = 0;

  static Jet zero(int n) { return {0.0, Vec::Zero(n), Mat::Zero(n, n), 0.0}; }
};

enum class Profile { Polynomial, Gaussian };

/// One-dimensional profile and its first two derivatives.
struct Profile1 {
  double f = 0, d1 = 0, d2 = 0;
};

/// (1-s²)⁴ on |s| < 1, or e^{-3s²}(1-s²)⁴.
inline Profile1 profile(Profile kind, double s) {
  if (std::abs(s) >= 1.0) return {};
  double m = 1.0 - s * s;
  double m2 = m * m, m3 = m2 * m;
  double P = m2 * m2, P1 = -8.0 * s * m3, P2 = -8.0 * m3 + 48.0 * s * s * m2;
  if (kind == Profile::Polynomial) return {P, P1, P2};
  double e = std::exp(-3.0 * s * s);
  return {e * P, e * (P1 - 6.0 * s * P), e * (P2 - 12.0 * s * P1 + (36.0 * s * s - 6.0) * P)};
}

/// ψ(t) = φ(t)/φ(½) with φ the polynomial profile: supported in [-1,1] and ≥ 1 on [-½,½].
inline Profile1 psi_cutoff(double t) {
  static const double norm = std::pow(0.75, 4);
  Profile1 p = profile(Profile::Polynomial, t);
  return {p.f / norm, p.d1 / norm, p.d2 / norm};
}

/// Compactly supported test function with closed-form derivatives.
///
/// Bumps are tensor products a ∏ φ((x_k - c_k)/w_k) · φ((t - c_t)/w_t); a
/// spatial bump has no t factor. Composite kinds: v = u∘ℓ_g (translated),
/// v = u∘δ_λ (scaled), U = u(x)ψ(t) (psi-extended, u spatial).
class TestFunction {
 public:
  enum class Kind { Bump, Translated, Scaled, PsiExtended };

  static TestFunction bump(Profile profile, GroupPoint center, Vec widths, double width_t, double amplitude = 1.0) {
    if ((widths.array() <= 0).any() || !(width_t > 0))
      fail(ErrorKind::InvalidArgument, "bump widths must be positive");
    TestFunction u;
    u.kind_ = Kind::Bump;
    u.profile_ = profile;
    u.center_ = std::move(center);
    u.widths_ = std::move(widths);
    u.width_t_ = width_t;
    u.amplitude_ = amplitude;
    return u;
  }
  static TestFunction spatial_bump(Profile profile, Vec center, Vec widths, double amplitude = 1.0) {
    TestFunction u = bump(profile, GroupPoint(std::move(center), 0.0), std::move(widths), 1.0, amplitude);
    u.spatial_ = true;
    return u;
  }
  /// v(z) = u(g∘z).
  static TestFunction translated(const TestFunction& base, const GroupPoint& g, const OperatorSpec& spec) {
    TestFunction v;
    v.kind_ = Kind::Translated;
    v.base_ = std::make_shared<TestFunction>(base);
    v.g_ = g;
    v.E_ = DriftExp(spec.B);
    v.Bt_ = spec.B.transpose();
    v.spatial_ = false;
    return v;
  }
  /// v(z) = u(δ_λ z).
  static TestFunction scaled(const TestFunction& base, double lambda, const BlockStructure& st) {
    TestFunction v;
    v.kind_ = Kind::Scaled;
    v.base_ = std::make_shared<TestFunction>(base);
    v.lambda_ = lambda;
    v.dil_ = dilation_diag(st, lambda);
    v.spatial_ = base.spatial_;
    return v;
  }
  /// U(x,t) = u(x) ψ(t).
  static TestFunction psi_extended(const TestFunction& spatial) {
    if (!spatial.spatial_) fail(ErrorKind::InvalidArgument, "psi extension needs a spatial function");
    TestFunction v;
    v.kind_ = Kind::PsiExtended;
    v.base_ = std::make_shared<TestFunction>(spatial);
    return v;
  }

  Kind kind() const { return kind_; }
  bool spatial() const { return spatial_; }
  int dim() const { return kind_ == Kind::Bump ? static_cast<int>(widths_.size()) : base_->dim(); }
  const TestFunction* base() const { return base_.get(); }

  Jet eval(const GroupPoint& z) const {
    switch (kind_) {
      case Kind::Bump: return eval_bump(z);
      case Kind::Translated: {
        Mat E = E_(z.t);
        GroupPoint gz{z.x + E * g_.x, g_.t + z.t};
        Jet j = base_->eval(gz);
        j.dt += j.grad.dot(-Bt_ * (E * g_.x));
        return j;
      }
      case Kind::Scaled: {
        Jet j = base_->eval(GroupPoint{z.x.cwiseProduct(dil_), lambda_ * lambda_ * z.t});
        j.grad = j.grad.cwiseProduct(dil_);
        j.hess = dil_.asDiagonal() * j.hess * dil_.asDiagonal();
        j.dt *= lambda_ * lambda_;
        return j;
      }
      case Kind::PsiExtended: {
        Jet j = base_->eval(GroupPoint{z.x, 0.0});
        Profile1 p = psi_cutoff(z.t);
        j.dt = j.value * p.d1;
        j.value *= p.f;
        j.grad *= p.f;
        j.hess *= p.f;
        return j;
      }
    }
    return Jet::zero(dim());
  }

  /// Bounding box of the support. For translates the x-range is swept over
  /// the t-range on 257 nodes and padded by 1% of its extent.
  Region support_box() const {
    switch (kind_) {
      case Kind::Bump: {
        Region r{center_.x - widths_, center_.x + widths_, center_.t - width_t_, center_.t + width_t_};
        if (spatial_) {
          r.t_lo = -std::numeric_limits<double>::infinity();
          r.t_hi = std::numeric_limits<double>::infinity();
        }
        return r;
      }
      case Kind::Translated: {
        Region b = base_->support_box();
        Region r = b;
        r.t_lo = b.t_lo - g_.t;
        r.t_hi = b.t_hi - g_.t;
        if (!std::isfinite(r.t_lo)) fail(ErrorKind::InvalidArgument, "translate of a spatial function has unbounded support");
        Vec lo = Vec::Constant(dim(), std::numeric_limits<double>::infinity()), hi = -lo;
        const int n = 257;
        for (int k = 0; k < n; ++k) {
          double t = r.t_lo + (r.t_hi - r.t_lo) * k / (n - 1.0);
          Vec s = E_(t) * g_.x;
          lo = lo.cwiseMin(b.lo - s);
          hi = hi.cwiseMax(b.hi - s);
        }
        Vec pad = 0.01 * (hi - lo);
        r.lo = lo - pad;
        r.hi = hi + pad;
        return r;
      }
      case Kind::Scaled: {
        Region b = base_->support_box();
        Vec inv = dil_.cwiseInverse();
        double l2 = lambda_ * lambda_;
        return {b.lo.cwiseProduct(inv), b.hi.cwiseProduct(inv), b.t_lo / l2, b.t_hi / l2};
      }
      case Kind::PsiExtended: {
        Region b = base_->support_box();
        b.t_lo = -1.0;
        b.t_hi = 1.0;
        return b;
      }
    }
    return {};
  }

  /// x-box containing the support of u(·, t); empty (lo > hi) outside the t-support.
  std::pair<Vec, Vec> slice_box(double t) const {
    switch (kind_) {
      case Kind::Bump: {
        if (!spatial_ && std::abs(t - center_.t) >= width_t_) return {Vec::Ones(dim()), -Vec::Ones(dim())};
        return {center_.x - widths_, center_.x + widths_};
      }
      case Kind::Translated: {
        auto [lo, hi] = base_->slice_box(t + g_.t);
        Vec s = E_(t) * g_.x;
        return {lo - s, hi - s};
      }
      case Kind::Scaled: {
        auto [lo, hi] = base_->slice_box(lambda_ * lambda_ * t);
        Vec inv = dil_.cwiseInverse();
        return {lo.cwiseProduct(inv), hi.cwiseProduct(inv)};
      }
      case Kind::PsiExtended: {
        if (std::abs(t) >= 1.0) return {Vec::Ones(dim()), -Vec::Ones(dim())};
        return base_->slice_box(0.0);
      }
    }
    return {};
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Bump: return std::string(profile_ == Profile::Polynomial ? "polynomial_bump" : "gaussian_bump");
      case Kind::Translated: return "translated(" + base_->describe() + ")";
      case Kind::Scaled: return "scaled(" + base_->describe() + ")";
      case Kind::PsiExtended: return "psi_extended(" + base_->describe() + ")";
    }
    return "?";
  }

 private:
  Jet eval_bump(const GroupPoint& z) const {
    const int n = static_cast<int>(widths_.size());
    Jet j = Jet::zero(n);
    Profile1 pt{1.0, 0.0, 0.0};
    if (!spatial_) {
      pt = profile(profile_, (z.t - center_.t) / width_t_);
      if (pt.f == 0.0) return j;
    }
    std::vector<Profile1> p(n);
    for (int k = 0; k < n; ++k) {
      p[k] = profile(profile_, (z.x(k) - center_.x(k)) / widths_(k));
      if (p[k].f == 0.0) return j;
      p[k].d1 /= widths_(k);
      p[k].d2 /= widths_(k) * widths_(k);
    }
    // Products of all factors but one (or two) without dividing.
    auto prod_except = [&](int a, int b) {
      double s = amplitude_ * pt.f;
      for (int k = 0; k < n; ++k)
        if (k != a && k != b) s *= p[k].f;
      return s;
    };
    double all = prod_except(-1, -1);
    j.value = all;
    for (int a = 0; a < n; ++a) {
      double rest = prod_except(a, -1);
      j.grad(a) = p[a].d1 * rest;
      j.hess(a, a) = p[a].d2 * rest;
      for (int b = a + 1; b < n; ++b) j.hess(a, b) = j.hess(b, a) = p[a].d1 * p[b].d1 * prod_except(a, b);
    }
    if (!spatial_) {
      double sp = amplitude_;
      for (int k = 0; k < n; ++k) sp *= p[k].f;
      j.dt = sp * pt.d1 / width_t_;
    }
    return j;
  }

  Kind kind_ = Kind::Bump;
  Profile profile_ = Profile::Polynomial;
  GroupPoint center_;
  Vec widths_;
  double width_t_ = 1.0;
  double amplitude_ = 1.0;
  bool spatial_ = false;
  std::shared_ptr<const TestFunction> base_;
  GroupPoint g_;
  DriftExp E_;
  Mat Bt_;
  double lambda_ = 1.0;
  Vec dil_;
};

inline Jet eval(const TestFunction& u, const GroupPoint& z) { return u.eval(z); }

/// Σ a_ij ∂²_ij u.
inline double apply_A(const OperatorSpec& spec, const Jet& j) {
  return (spec.A0.array() * j.hess.topLeftCorner(spec.p0, spec.p0).array()).sum();
}
/// <x, B∇u>.
inline double apply_Y0(const OperatorSpec& spec, const Vec& x, const Jet& j) { return x.dot(spec.B * j.grad); }
/// 𝒜u = div(A∇u) + <x, B∇u>.
inline double apply_calA(const OperatorSpec& spec, const Vec& x, const Jet& j) {
  return apply_A(spec, j) + apply_Y0(spec, x, j);
}
/// Lu = 𝒜u - ∂t u.
inline double apply_L(const OperatorSpec& spec, const Vec& x, const Jet& j) { return apply_calA(spec, x, j) - j.dt; }

inline double apply_A(const OperatorSpec& spec, const TestFunction& u, const GroupPoint& z) {
  return apply_A(spec, u.eval(z));
}
inline double apply_Y0(const OperatorSpec& spec, const TestFunction& u, const GroupPoint& z) {
  return apply_Y0(spec, z.x, u.eval(z));
}
inline double apply_calA(const OperatorSpec& spec, const TestFunction& u, const GroupPoint& z) {
  return apply_calA(spec, z.x, u.eval(z));
}
inline double apply_L(const OperatorSpec& spec, const TestFunction& u, const GroupPoint& z) {
  return apply_L(spec, z.x, u.eval(z));
}
/// L0 = div(A∇) + <x, B0∇> - ∂t.
inline double apply_L0(const OperatorSpec& spec, const BlockStructure& st, const TestFunction& u, const GroupPoint& z) {
  return apply_L(principal_spec(spec, st), u, z);
}

struct FamilySpec {
  int count = 50;
  std::uint64_t seed = 2024;
  double width_lo = 0.1;
  double width_hi = 0.5;
  double center_half = 2.0;
  double center_t_half = 0.5;
  Profile profile = Profile::Polynomial;
};

/// Bumps with centers uniform in [-2,2]^N × [-½,½] and per-coordinate widths
/// log-uniform in [0.1, 0.5].
inline std::vector<TestFunction> random_family(int N, const FamilySpec& fs = {}) {
  std::mt19937_64 rng(fs.seed);
  std::uniform_real_distribution<double> uc(-fs.center_half, fs.center_half);
  std::uniform_real_distribution<double> ut(-fs.center_t_half, fs.center_t_half);
  std::uniform_real_distribution<double> lw(std::log(fs.width_lo), std::log(fs.width_hi));
  std::vector<TestFunction> out;
  for (int k = 0; k < fs.count; ++k) {
    Vec c(N), w(N);
    for (int d = 0; d < N; ++d) c(d) = uc(rng);
    for (int d = 0; d < N; ++d) w(d) = std::exp(lw(rng));
    double ct = ut(rng), wt = std::exp(lw(rng));
    out.push_back(TestFunction::bump(fs.profile, GroupPoint(c, ct), w, wt));
  }
  return out;
}

/// Spatial bumps with the same center and width laws.
inline std::vector<TestFunction> random_spatial_family(int N, const FamilySpec& fs = {}) {
  std::mt19937_64 rng(fs.seed + 1);
  std::uniform_real_distribution<double> uc(-fs.center_half, fs.center_half);
  std::uniform_real_distribution<double> lw(std::log(fs.width_lo), std::log(fs.width_hi));
  std::vector<TestFunction> out;
  for (int k = 0; k < fs.count; ++k) {
    Vec c(N), w(N);
    for (int d = 0; d < N; ++d) c(d) = uc(rng);
    for (int d = 0; d < N; ++d) w(d) = std::exp(lw(rng));
    out.push_back(TestFunction::spatial_bump(fs.profile, c, w));
  }
  return out;
}

}  // namespace hypo
