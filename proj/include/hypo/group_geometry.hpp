#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypo/audit.hpp"
#include "hypo/covariance.hpp"
#include "hypo/error.hpp"
#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"

namespace hypo {

struct GroupPoint {
  Vec x;
  double t = 0.0;

  GroupPoint() = default;
  GroupPoint(Vec x_, double t_) : x(std::move(x_)), t(t_) {}
  static GroupPoint zero(int n) { return {Vec::Zero(n), 0.0}; }
  Vec stacked() const {
    Vec v(x.size() + 1);
    v << x, t;
    return v;
  }
};

/// E(τ) = exp(-τBᵀ), exact finite series when B is nilpotent.
class DriftExp {
 public:
  DriftExp() = default;
  explicit DriftExp(const Mat& B) : Bt_(B.transpose()) {
    const int n = static_cast<int>(B.rows());
    Mat p = Mat::Identity(n, n);
    powers_.push_back(p);
    for (int k = 1; k <= n; ++k) {
      p = p * Bt_;
      if (max_abs(p) == 0.0) {
        nilpotent_ = true;
        break;
      }
      powers_.push_back(p);
    }
    if (!nilpotent_) powers_.clear();
  }
  Mat operator()(double tau) const {
    if (nilpotent_) {
      Mat out = powers_[0];
      double c = 1.0;
      for (std::size_t k = 1; k < powers_.size(); ++k) {
        c *= -tau / static_cast<double>(k);
        out += c * powers_[k];
      }
      return out;
    }
    return expm(-tau * Bt_);
  }
  bool nilpotent() const { return nilpotent_; }

 private:
  Mat Bt_;
  bool nilpotent_ = false;
  std::vector<Mat> powers_;
};

/// (x,t)∘(ξ,τ) = (ξ + E(τ)x, t + τ).
class Group {
 public:
  Group() = default;
  explicit Group(const OperatorSpec& spec) : E_(spec.B), trB_(spec.trace_B()), n_(spec.N) {}

  Mat E(double tau) const { return E_(tau); }
  GroupPoint compose(const GroupPoint& z, const GroupPoint& w) const { return {w.x + E_(w.t) * z.x, z.t + w.t}; }
  GroupPoint invert(const GroupPoint& w) const { return {-(E_(-w.t) * w.x), -w.t}; }
  /// ζ⁻¹∘z = (x - E(t-τ)ξ, t-τ).
  GroupPoint left_quotient(const GroupPoint& zeta, const GroupPoint& z) const {
    return {z.x - E_(z.t - zeta.t) * zeta.x, z.t - zeta.t};
  }
  /// z∘w⁻¹ = (E(-τ)(x-ξ), t-τ).
  GroupPoint right_quotient(const GroupPoint& z, const GroupPoint& w) const {
    return {E_(-w.t) * (z.x - w.x), z.t - w.t};
  }
  double trace_B() const { return trB_; }
  int N() const { return n_; }

 private:
  DriftExp E_;
  double trB_ = 0;
  int n_ = 0;
};

inline GroupPoint compose(const OperatorSpec& spec, const GroupPoint& z, const GroupPoint& w) {
  return Group(spec).compose(z, w);
}
inline GroupPoint invert(const OperatorSpec& spec, const GroupPoint& w) { return Group(spec).invert(w); }
inline GroupPoint compose0(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& z, const GroupPoint& w) {
  return Group(principal_spec(spec, st)).compose(z, w);
}
inline GroupPoint invert0(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& w) {
  return Group(principal_spec(spec, st)).invert(w);
}

/// ‖(x,t)‖ = Σ|x_k|^{1/q_k} + |t|^{1/2}.
inline double homogeneous_norm(const BlockStructure& st, const Vec& x, double t) {
  double s = std::sqrt(std::abs(t));
  for (int k = 0; k < x.size(); ++k) {
    double a = std::abs(x(k));
    switch (st.q[k]) {
      case 1: s += a; break;
      case 3: s += std::cbrt(a); break;
      default: s += std::pow(a, 1.0 / st.q[k]);
    }
  }
  return s;
}
inline double homogeneous_norm(const BlockStructure& st, const GroupPoint& z) { return homogeneous_norm(st, z.x, z.t); }

inline GroupPoint dilate(const BlockStructure& st, double lambda, const GroupPoint& z) {
  return {z.x.cwiseProduct(dilation_diag(st, lambda)), lambda * lambda * z.t};
}

/// d(z,ζ) = ‖ζ⁻¹∘z‖.
inline double quasidistance(const Group& g, const BlockStructure& st, const GroupPoint& z, const GroupPoint& zeta) {
  return homogeneous_norm(st, g.left_quotient(zeta, z));
}
inline double quasidistance(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& z,
                            const GroupPoint& zeta) {
  return quasidistance(Group(spec), st, z, zeta);
}

/// e^{τ Tr B}.
inline double jacobian_factor(const OperatorSpec& spec, double tau) { return std::exp(tau * spec.trace_B()); }

/// Axis-aligned box in ℝ^N × ℝ.
struct Region {
  Vec lo, hi;
  double t_lo = -1.0, t_hi = 1.0;

  static Region cube(int n, double half, double t_lo = -1.0, double t_hi = 1.0) {
    return {Vec::Constant(n, -half), Vec::Constant(n, half), t_lo, t_hi};
  }
  GroupPoint sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(lo.size());
    for (int k = 0; k < x.size(); ++k) x(k) = lo(k) + (hi(k) - lo(k)) * u(rng);
    return {x, t_lo + (t_hi - t_lo) * u(rng)};
  }
};

/// Random point with ‖v‖ = ρ: a uniform direction in the unit box pushed onto
/// the norm sphere by δ.
inline GroupPoint sample_norm_sphere(const BlockStructure& st, double rho, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GroupPoint v;
  double n = 0.0;
  while (n == 0.0) {
    v.x.resize(st.N());
    for (int k = 0; k < st.N(); ++k) v.x(k) = u(rng);
    v.t = u(rng);
    n = homogeneous_norm(st, v);
  }
  return dilate(st, rho / n, v);
}

struct QuasiConstants {
  double c_sym = 0;
  double c_tri = 0;
};

/// Empirical maxima of d(z,ζ)/d(ζ,z) (with d(ζ,z) ≤ 1) and of
/// d(z,ζ)/(d(z,w)+d(w,ζ)) (both legs ≤ 1). Radii are log-uniform in [1e-3, 1].
inline QuasiConstants probe_quasi_constants(const OperatorSpec& spec, const BlockStructure& st, int samples,
                                            const Region& region, std::uint64_t seed = 1) {
  Group g(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lr(std::log(1e-3), 0.0);
  QuasiConstants out;
  for (int s = 0; s < samples; ++s) {
    GroupPoint z = region.sample(rng);
    GroupPoint v = sample_norm_sphere(st, std::exp(lr(rng)), rng);
    GroupPoint zeta = g.compose(z, v);  // z⁻¹∘ζ = v
    double back = quasidistance(g, st, zeta, z);
    double fwd = quasidistance(g, st, z, zeta);
    if (back > 0) out.c_sym = std::max(out.c_sym, fwd / back);

    GroupPoint a = sample_norm_sphere(st, std::exp(lr(rng)), rng);
    GroupPoint b = sample_norm_sphere(st, std::exp(lr(rng)), rng);
    GroupPoint w = g.compose(z, g.invert(a));  // w⁻¹∘z = a
    GroupPoint zeta2 = g.compose(w, g.invert(b));  // ζ⁻¹∘w = b
    double dzw = quasidistance(g, st, z, w), dwz = quasidistance(g, st, w, zeta2);
    if (dzw <= 1.0 && dwz <= 1.0)
      out.c_tri = std::max(out.c_tri, quasidistance(g, st, z, zeta2) / (dzw + dwz));
  }
  return out;
}

/// Monte Carlo |B(z,ρ)| (optionally ∩ S) in w = ζ⁻¹∘z coordinates:
/// ζ = z∘w⁻¹ has time t - τ and dζ = e^{τ Tr B} dw.
inline double ball_volume(const OperatorSpec& spec, const BlockStructure& st, const GroupPoint& z, double rho,
                          long mc_samples, std::uint64_t seed = 1, bool clip_to_strip = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double trB = spec.trace_B();
  Vec half = dilation_diag(st, rho);
  double box = std::pow(2.0, st.N() + 1) * half.prod() * rho * rho;
  Vec w(st.N());
  double acc = 0.0;
  for (long s = 0; s < mc_samples; ++s) {
    for (int k = 0; k < st.N(); ++k) w(k) = half(k) * u(rng);
    double tau = rho * rho * u(rng);
    if (homogeneous_norm(st, w, tau) >= rho) continue;
    if (clip_to_strip && std::abs(z.t - tau) > 1.0) continue;
    acc += std::exp(tau * trB);
  }
  return box * acc / static_cast<double>(mc_samples);
}

/// Log–log slope of ρ ↦ |B(0,ρ)| over the given radii.
inline AuditEntry audit_ball_volume_slope(const OperatorSpec& spec, const BlockStructure& st,
                                          std::vector<double> radii = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1},
                                          long mc = 200000, std::uint64_t seed = 3) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "geometry.ball_volume_slope";
  e.anchor = "|B(z,rho)| ~ rho^{Q+2} as rho -> 0";
  e.param("Q", st.Q).param("mc", static_cast<double>(mc));
  std::vector<double> vols;
  for (std::size_t k = 0; k < radii.size(); ++k)
    vols.push_back(ball_volume(spec, st, GroupPoint::zero(st.N()), radii[k], mc, seed + k));
  double slope = loglog_slope(radii, vols);
  e.value("slope", slope).value("expected", st.Q + 2.0);
  for (std::size_t k = 0; k < radii.size(); ++k) e.value("V(" + fmt_double(radii[k]) + ")", vols[k]);
  e.bound = st.Q + 2.0;
  e.tolerance = 0.1;
  e.pass = std::isfinite(slope) && std::abs(slope - (st.Q + 2.0)) <= 0.1;
  e.runtime_ms = sw.ms();
  return e;
}

/// sup over sampled centers z ∈ S and radii ρ ≤ 1 of |B(z,2ρ)∩S| / |B(z,ρ)∩S|
/// with S = {|t| < 1}, at mc and 4·mc samples. Both balls reuse one sample
/// stream, so w ↦ δ_2 w pairs their samples. The ratio must be finite, at most
/// 2^{Q+2} e^{3|Tr B|} (δ_{1/2} maps B(z,2ρ)∩S into B(z,ρ)∩S), and move by
/// less than 10% under refinement.
inline AuditEntry audit_doubling(const OperatorSpec& spec, const BlockStructure& st, int centers = 16,
                                 long mc = 20000, std::uint64_t seed = 5) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "geometry.doubling";
  e.anchor = "|B(z,2rho) cap S| <= c |B(z,rho) cap S|";
  e.param("centers", centers).param("mc", static_cast<double>(mc));
  Region strip = Region::cube(st.N(), 1.0, -1.0, 1.0);
  std::mt19937_64 rng(seed);
  std::vector<GroupPoint> zs;
  for (int k = 0; k < centers; ++k) zs.push_back(strip.sample(rng));
  // Centers on the strip edge make the clipping bite.
  zs.push_back({Vec::Zero(st.N()), 0.999});
  zs.push_back({Vec::Zero(st.N()), -0.999});
  const std::vector<double> radii{1e-2, 1e-1, 0.5, 1.0};
  auto sup_ratio = [&](long n, std::uint64_t s0) {
    double c = 0;
    std::uint64_t s = s0;
    for (const auto& z : zs)
      for (double r : radii) {
        ++s;
        double small = ball_volume(spec, st, z, r, n, s, true);
        double large = ball_volume(spec, st, z, 2 * r, n, s, true);
        c = std::max(c, small > 0 ? large / small : std::numeric_limits<double>::infinity());
      }
    return c;
  };
  double c1 = sup_ratio(mc, seed * 1000), c2 = sup_ratio(4 * mc, seed * 1000 + 500);
  double bound = std::pow(2.0, st.Q + 2) * std::exp(3.0 * std::abs(spec.trace_B()));
  double drift = std::abs(c2 - c1) / c2;
  e.value("c", c2).value("c_coarse", c1).value("refinement_drift", drift).value("bound", bound);
  e.bound = bound;
  e.tolerance = 0.1;
  e.pass = std::isfinite(c2) && c2 <= bound && drift < 0.1;
  e.runtime_ms = sw.ms();
  return e;
}

struct Covering {
  std::vector<GroupPoint> centers;
  double rho = 0;
  double K = 0;
  double C = 0;
  int overlap = 0;
  bool covered = false;
  long validation_points = 0;
  long uncovered = 0;
  Region region;
};

/// ρ from the chain ρ ≤ 1, Kρ ≤ 1, Kρ·C(1 + C(1 + C)) ≤ R.
inline double covering_radius(double R, double K, double C) {
  if (!(R > 0) || !(K > 1) || !(C >= 1)) fail(ErrorKind::ConstraintInfeasible, "need R > 0, K > 1, C >= 1");
  double rho = std::min({1.0, 1.0 / K, R / (K * C * (1.0 + C * (1.0 + C)))});
  if (!(rho > 0)) fail(ErrorKind::ConstraintInfeasible, "no admissible radius");
  return rho;
}

namespace internal {

/// Centers bucketed by time for range queries |t - t_c| < h.
class TimeBuckets {
 public:
  explicit TimeBuckets(double width) : width_(width) {}
  void insert(std::size_t id, double t) { buckets_[key(t)].push_back(id); }
  template <class Fn>
  void visit(double t, double h, Fn&& fn) const {
    for (long k = key(t - h); k <= key(t + h); ++k) {
      auto it = buckets_.find(k);
      if (it == buckets_.end()) continue;
      for (auto id : it->second) fn(id);
    }
  }

 private:
  long key(double t) const { return static_cast<long>(std::floor(t / width_)); }
  double width_;
  std::map<long, std::vector<std::size_t>> buckets_;
};

inline void lattice_visit(const Vec& lo, const Vec& hi, const Vec& pitch, double t_lo, double t_hi, double t_pitch,
                          const std::function<void(const GroupPoint&)>& fn) {
  const int n = static_cast<int>(lo.size());
  std::vector<long> count(n + 1);
  for (int k = 0; k < n; ++k) count[k] = static_cast<long>(std::floor((hi(k) - lo(k)) / pitch(k) + 1e-9)) + 1;
  count[n] = static_cast<long>(std::floor((t_hi - t_lo) / t_pitch + 1e-9)) + 1;
  std::vector<long> idx(n + 1, 0);
  GroupPoint p(Vec(n), 0.0);
  while (true) {
    for (int k = 0; k < n; ++k) p.x(k) = lo(k) + idx[k] * pitch(k);
    p.t = t_lo + idx[n] * t_pitch;
    fn(p);
    // Lexicographic with t slowest and x_1 fastest.
    int d = 0;
    for (; d <= n; ++d) {
      if (++idx[d] < count[d]) break;
      idx[d] = 0;
    }
    if (d > n) break;
  }
}

inline long lattice_size(const Vec& lo, const Vec& hi, const Vec& pitch, double t_lo, double t_hi, double t_pitch) {
  double c = std::floor((t_hi - t_lo) / t_pitch + 1e-9) + 1;
  for (int k = 0; k < lo.size(); ++k) c *= std::floor((hi(k) - lo(k)) / pitch(k) + 1e-9) + 1;
  return c > 9e18 ? std::numeric_limits<long>::max() : static_cast<long>(c);
}

}  // namespace internal

/// Greedy maximal family on a candidate lattice of pitch ρ^{q_k}/(4C(C+1))
/// (ρ²/(4C(C+1)) in t). A candidate is accepted iff its quasidistance to every
/// accepted center, in both orders, is at least ρ/(C+1). Coverage at radius ρ
/// is then checked on a shifted validation lattice and the overlap of the Kρ
/// balls is measured there.
inline Covering cover_region(const OperatorSpec& spec, const BlockStructure& st, const Region& region, double r0,
                             double K, double C, long max_candidates = 20'000'000) {
  Covering cov;
  cov.region = region;
  cov.K = K;
  cov.C = C;
  cov.rho = covering_radius(r0, K, C);
  const double rho = cov.rho;
  const double sep = rho / (C + 1.0);
  const double denom = 4.0 * C * (C + 1.0);
  Vec pitch = dilation_diag(st, rho) / denom;
  double t_pitch = rho * rho / denom;
  long ncand = internal::lattice_size(region.lo, region.hi, pitch, region.t_lo, region.t_hi, t_pitch);
  if (ncand > max_candidates)
    fail(ErrorKind::CoveringTooLarge, "candidate lattice has " + std::to_string(ncand) + " points (limit " +
                                          std::to_string(max_candidates) + ")");
  Group g(spec);
  // Both d(c,·) and d(·,c) < r force |Δt| < r².
  internal::TimeBuckets accepted(std::max(sep * sep, t_pitch));
  internal::lattice_visit(region.lo, region.hi, pitch, region.t_lo, region.t_hi, t_pitch, [&](const GroupPoint& p) {
    bool ok = true;
    accepted.visit(p.t, sep * sep, [&](std::size_t id) {
      if (!ok) return;
      const auto& c = cov.centers[id];
      if (quasidistance(g, st, c, p) < sep || quasidistance(g, st, p, c) < sep) ok = false;
    });
    if (ok) {
      accepted.insert(cov.centers.size(), p.t);
      cov.centers.push_back(p);
    }
  });

  internal::TimeBuckets all(std::max(rho * rho, t_pitch));
  for (std::size_t k = 0; k < cov.centers.size(); ++k) all.insert(k, cov.centers[k].t);
  const double Kr = K * rho;
  internal::TimeBuckets big(std::max(Kr * Kr, t_pitch));
  for (std::size_t k = 0; k < cov.centers.size(); ++k) big.insert(k, cov.centers[k].t);

  // Validation lattice: pitch 1.5× the candidate pitch, offset by a third.
  Vec vpitch = 1.5 * pitch;
  Vec vlo = region.lo + pitch / 3.0;
  double vt_pitch = 1.5 * t_pitch, vt_lo = region.t_lo + t_pitch / 3.0;
  cov.overlap = 0;
  internal::lattice_visit(vlo, region.hi, vpitch, vt_lo, region.t_hi, vt_pitch, [&](const GroupPoint& v) {
    ++cov.validation_points;
    bool hit = false;
    all.visit(v.t, rho * rho, [&](std::size_t id) {
      if (!hit && quasidistance(g, st, cov.centers[id], v) < rho) hit = true;
    });
    if (!hit) ++cov.uncovered;
    int m = 0;
    big.visit(v.t, Kr * Kr, [&](std::size_t id) {
      if (quasidistance(g, st, cov.centers[id], v) < Kr) ++m;
    });
    cov.overlap = std::max(cov.overlap, m);
  });
  cov.covered = cov.uncovered == 0;
  return cov;
}

}  // namespace hypo
