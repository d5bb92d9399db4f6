#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypo/audit.hpp"
#include "hypo/covariance.hpp"
#include "hypo/error.hpp"
#include "hypo/kernels.hpp"
#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"

namespace hypo {

/// Samples of X_t for dX = BᵀX dt + √2 A^{1/2} dW, X_0 = x0.
struct SampleSet {
  Vec x0;
  double t = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::vector<Vec> points;

  std::size_t size() const { return points.size(); }

  /// Columns: index, y_1..y_N.
  void write_table(std::ostream& os) const {
    os << "# method=" << method << " t=" << fmt_double(t) << " seed=" << seed << " n=" << points.size() << "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      os << i;
      for (int k = 0; k < points[i].size(); ++k) os << " " << fmt_double(points[i](k));
      os << "\n";
    }
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for sample `index` under `seed`, independent of evaluation order.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ index));
}

/// Symmetric square root with eigenvalues above -1e-12·max clamped to 0.
inline Mat psd_sqrt(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  Vec ev = es.eigenvalues();
  double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  for (int k = 0; k < ev.size(); ++k) {
    if (ev(k) < -1e-12 * top) fail(ErrorKind::SingularCovariance, "covariance has a negative eigenvalue");
    ev(k) = std::sqrt(std::max(ev(k), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Exact one-step law X_t | X_0 = x ~ N(exp(tBᵀ)x, 2Q_t).
class GaussianTransition {
 public:
  GaussianTransition(const OperatorSpec& spec, double t) : t_(t) {
    if (!(t > 0)) fail(ErrorKind::InvalidArgument, "t must be positive");
    if (!is_hypoelliptic(spec)) fail(ErrorKind::SingularCovariance, "C(t) is singular");
    mean_map_ = drift_exponential(spec, -t);
    cov_ = 2.0 * gramian_Q(spec, t);
    root_ = psd_sqrt(cov_);
  }

  template <class Rng>
  Vec sample(const Vec& x, Rng& rng) const {
    std::normal_distribution<double> nd;
    Vec z(x.size());
    for (int k = 0; k < z.size(); ++k) z(k) = nd(rng);
    return mean_map_ * x + root_ * z;
  }
  Vec mean(const Vec& x) const { return mean_map_ * x; }
  const Mat& cov() const { return cov_; }

 private:
  double t_;
  Mat mean_map_, cov_, root_;
};

inline SampleSet exact_sample(const OperatorSpec& spec, const Vec& x0, double t, std::size_t n, std::uint64_t seed,
                              int threads = 1) {
  GaussianTransition tr(spec, t);
  SampleSet s{x0, t, seed, "exact", std::vector<Vec>(n)};
  parallel_for(n, threads, [&](std::size_t i) {
    auto rng = sample_rng(seed, i);
    s.points[i] = tr.sample(x0, rng);
  });
  return s;
}

/// Explicit Euler: X ← X + BᵀX Δt + √(2Δt) A0^{1/2} ζ on the first p0 coordinates.
inline SampleSet euler_maruyama(const OperatorSpec& spec, const Vec& x0, double t, int steps, std::size_t n,
                                std::uint64_t seed, int threads = 1) {
  if (steps < 16) fail(ErrorKind::InvalidArgument, "euler_maruyama needs at least 16 steps");
  if (!(t > 0)) fail(ErrorKind::InvalidArgument, "t must be positive");
  const int p0 = spec.p0;
  const double dt = t / steps;
  const Mat Bt = spec.B.transpose();
  const Mat root = psd_sqrt(spec.A0) * std::sqrt(2.0 * dt);
  SampleSet s{x0, t, seed, "euler_maruyama", std::vector<Vec>(n)};
  parallel_for(n, threads, [&](std::size_t i) {
    auto rng = sample_rng(seed, i);
    std::normal_distribution<double> nd;
    Vec x = x0, z(p0);
    for (int k = 0; k < steps; ++k) {
      for (int j = 0; j < p0; ++j) z(j) = nd(rng);
      Vec dx = dt * (Bt * x);
      dx.head(p0) += root * z;
      x += dx;
    }
    s.points[i] = x;
  });
  return s;
}

/// p(t, x0, y) = γ(x0 - E(t)y, t), E(t) = exp(-tBᵀ).
class TransitionDensity {
 public:
  TransitionDensity(const OperatorSpec& spec, const Vec& x0, double t)
      : x0_(x0), E_(drift_exponential(spec, t)), slice_(spec, validate_structure(spec), t, true) {}
  double operator()(const Vec& y) const { return slice_.gamma(x0_ - E_ * y); }

 private:
  Vec x0_;
  Mat E_;
  KernelSlice slice_;
};

/// Normal(e^{bt}x0, (a/b)(e^{2bt} - 1)) for dX = bX dt + √(2a) dW; b = 0 gives 2at.
inline double scalar_ou_density(double a, double b, double t, double x0, double y) {
  double var = std::abs(b) < 1e-14 ? 2.0 * a * t : a / b * std::expm1(2.0 * b * t);
  double m = std::exp(b * t) * x0;
  return std::exp(-0.5 * (y - m) * (y - m) / var) / std::sqrt(2.0 * M_PI * var);
}

/// Scalar gate: the candidate γ(x0 - E(t)y, t) against the textbook OU density
/// on a grid covering ±8 standard deviations, for several (a, b, t, x0).
inline AuditEntry audit_scalar_ou_gate() {
  Stopwatch sw;
  AuditEntry e;
  e.check = "sde.scalar_ou_gate";
  e.anchor = "p(t, x0, y) = gamma(x0 - exp(-t b) y, t) for the scalar OU process";
  struct Case {
    double a, b, t, x0;
  };
  double worst = 0;
  for (Case c : {Case{1.0, 0.5, 1.0, 0.7}, Case{2.0, -1.3, 0.4, -1.1}, Case{0.5, 0.0, 2.0, 0.3}, Case{1.0, 2.0, 0.1, 2.0}}) {
    OperatorSpec spec((Mat(1, 1) << c.a).finished(), (Mat(1, 1) << c.b).finished());
    TransitionDensity p(spec, Vec::Constant(1, c.x0), c.t);
    double var = std::abs(c.b) < 1e-14 ? 2.0 * c.a * c.t : c.a / c.b * std::expm1(2.0 * c.b * c.t);
    double m = std::exp(c.b * c.t) * c.x0, sd = std::sqrt(var), peak = 1.0 / std::sqrt(2.0 * M_PI * var);
    for (int k = -400; k <= 400; ++k) {
      double y = m + sd * k / 50.0;
      worst = std::max(worst, std::abs(p(Vec::Constant(1, y)) - scalar_ou_density(c.a, c.b, c.t, c.x0, y)) / peak);
    }
  }
  e.value("max_rel_diff", worst);
  e.tolerance = 1e-12;
  e.pass = worst < 1e-12;
  e.runtime_ms = sw.ms();
  return e;
}

/// Axis-aligned box at the exact mean ± 6 marginal standard deviations.
inline std::pair<Vec, Vec> transition_box(const OperatorSpec& spec, const Vec& x0, double t, double half = 6.0) {
  Vec m = drift_exponential(spec, -t) * x0;
  Vec sd = (2.0 * gramian_Q(spec, t)).diagonal().cwiseSqrt();
  return {m - half * sd, m + half * sd};
}

/// ∫ p(t, x0, y) dy over the ±6σ box by tensor Gauss, plus the Gaussian tail bound.
struct DensityMass {
  double box = 0;
  double tail_bound = 0;
};

inline DensityMass density_mass(const OperatorSpec& spec, const Vec& x0, double t, int panels = 12) {
  TransitionDensity p(spec, x0, t);
  auto [lo, hi] = transition_box(spec, x0, t);
  const int N = spec.N;
  const GaussRule& g = gauss_legendre(10);
  std::vector<std::vector<double>> xs(N), ws(N);
  for (int k = 0; k < N; ++k) {
    double h = (hi(k) - lo(k)) / panels;
    for (int a = 0; a < panels; ++a)
      for (int i = 0; i < g.size(); ++i) {
        xs[k].push_back(lo(k) + (a + 0.5) * h + 0.5 * h * g.x[i]);
        ws[k].push_back(0.5 * h * g.w[i]);
      }
  }
  std::vector<std::size_t> idx(N, 0);
  std::vector<double> parts;
  Vec y(N);
  while (true) {
    double w = 1;
    for (int k = 0; k < N; ++k) {
      y(k) = xs[k][idx[k]];
      w *= ws[k][idx[k]];
    }
    parts.push_back(w * p(y));
    int d = 0;
    for (; d < N; ++d) {
      if (++idx[d] < xs[d].size()) break;
      idx[d] = 0;
    }
    if (d == N) break;
  }
  return {pairwise_sum(parts), N * std::erfc(6.0 / std::sqrt(2.0))};
}

/// Total variation between the binned samples and the candidate density on
/// `bins` cells per coordinate over the ±6σ box; mass outside the box counts
/// on both sides. A candidate whose box mass misses 1 by more than 1e-6 plus
/// the tail bound is a convention error and throws DensityMismatch.
inline AuditEntry density_crosscheck(const OperatorSpec& spec, const Vec& x0, double t, const SampleSet& samples,
                                     int bins) {
  Stopwatch sw;
  if (samples.size() < 1000) fail(ErrorKind::InvalidArgument, "statistical audits need at least 1000 samples");
  const int N = spec.N;
  AuditEntry e;
  e.check = "sde.density_crosscheck";
  e.anchor = "transition density of the SDE is gamma(x0 - E(t) y, t)";
  e.param("t", t).param("n", static_cast<double>(samples.size())).param("bins", bins);
  TransitionDensity p(spec, x0, t);
  auto [lo, hi] = transition_box(spec, x0, t);
  Vec h = (hi - lo) / bins;
  long cells = 1;
  for (int k = 0; k < N; ++k) cells *= bins;
  std::vector<double> emp(cells, 0.0), cand(cells, 0.0);
  double outside = 0;
  for (const Vec& y : samples.points) {
    long c = 0, stride = 1;
    bool in = true;
    for (int k = 0; k < N; ++k) {
      long b = static_cast<long>(std::floor((y(k) - lo(k)) / h(k)));
      if (b < 0 || b >= bins) {
        in = false;
        break;
      }
      c += b * stride;
      stride *= bins;
    }
    if (in)
      emp[c] += 1.0;
    else
      outside += 1.0;
  }
  const GaussRule& g = gauss_legendre(6);
  std::vector<int> q(N, 0);
  Vec y(N);
  for (long c = 0; c < cells; ++c) {
    Vec clo(N);
    long r = c;
    for (int k = 0; k < N; ++k) {
      clo(k) = lo(k) + (r % bins) * h(k);
      r /= bins;
    }
    std::fill(q.begin(), q.end(), 0);
    double acc = 0;
    while (true) {
      double w = 1;
      for (int k = 0; k < N; ++k) {
        y(k) = clo(k) + 0.5 * h(k) * (1.0 + g.x[q[k]]);
        w *= 0.5 * h(k) * g.w[q[k]];
      }
      acc += w * p(y);
      int d = 0;
      for (; d < N; ++d) {
        if (++q[d] < g.size()) break;
        q[d] = 0;
      }
      if (d == N) break;
    }
    cand[c] = acc;
  }
  const double n = static_cast<double>(samples.size());
  double tv = 0, box_mass = 0;
  for (long c = 0; c < cells; ++c) {
    tv += std::abs(emp[c] / n - cand[c]);
    box_mass += cand[c];
  }
  tv += std::abs(outside / n - (1.0 - box_mass));
  tv *= 0.5;
  DensityMass mass = density_mass(spec, x0, t);
  if (std::abs(mass.box - 1.0) > 1e-6 + mass.tail_bound)
    fail(ErrorKind::DensityMismatch, "candidate density has mass " + fmt_double(mass.box));
  e.value("tv", tv).value("candidate_mass", mass.box).value("tail_bound", mass.tail_bound);
  e.bound = 0.02;
  e.tolerance = 0.02;
  e.pass = tv <= 0.02;
  e.runtime_ms = sw.ms();
  return e;
}

/// V-statistic 2E|X-Y| - E|X-X'| - E|Y-Y'|.
inline double energy_distance(const std::vector<Vec>& X, const std::vector<Vec>& Y) {
  auto mean_dist = [](const std::vector<Vec>& A, const std::vector<Vec>& B) {
    std::vector<double> rows(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) {
      double s = 0;
      for (const Vec& b : B) s += (A[i] - b).norm();
      rows[i] = s / B.size();
    }
    return pairwise_sum(rows) / A.size();
  };
  return 2.0 * mean_dist(X, Y) - mean_dist(X, X) - mean_dist(Y, Y);
}

/// exact_sample(x0, t + s) against exact_sample(exact_sample(x0, t), s) by
/// energy distance, thresholded at mean + 4 sd of same-law replicate pairs.
inline AuditEntry audit_chapman_kolmogorov(const OperatorSpec& spec, const Vec& x0, double t, double s,
                                           std::size_t m = 1500, int replicates = 20, std::uint64_t seed = 7) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "sde.chapman_kolmogorov";
  e.anchor = "X_{t+s} equals in law the s-step from X_t";
  e.param("t", t).param("s", s).param("m", static_cast<double>(m)).param("replicates", replicates);
  GaussianTransition first(spec, t), second(spec, s);
  SampleSet direct = exact_sample(spec, x0, t + s, m, seed);
  std::vector<Vec> composed(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto rng = sample_rng(seed + 1, i);
    composed[i] = second.sample(first.sample(x0, rng), rng);
  }
  double stat = energy_distance(direct.points, composed);
  std::vector<double> null;
  for (int r = 0; r < replicates; ++r) {
    SampleSet a = exact_sample(spec, x0, t + s, m, seed + 100 + 2 * r);
    SampleSet b = exact_sample(spec, x0, t + s, m, seed + 101 + 2 * r);
    null.push_back(energy_distance(a.points, b.points));
  }
  double mu = 0, var = 0;
  for (double v : null) mu += v / null.size();
  for (double v : null) var += (v - mu) * (v - mu) / (null.size() - 1);
  double threshold = mu + 4.0 * std::sqrt(var);
  e.value("energy_distance", stat).value("threshold", threshold).value("null_mean", mu);
  e.bound = threshold;
  e.pass = std::isfinite(stat) && stat < threshold;
  e.runtime_ms = sw.ms();
  return e;
}

/// Log-log slope of the sample variance of the last coordinate over t.
inline AuditEntry audit_variance_slope(const OperatorSpec& spec, const std::vector<double>& ts, double expected,
                                       std::size_t n = 100000, std::uint64_t seed = 9, int threads = 1) {
  Stopwatch sw;
  AuditEntry e;
  e.check = "sde.variance_slope";
  e.anchor = "Var X_t in the last block scales as t^(2 q_max + 1)";
  e.param("n", static_cast<double>(n)).param("expected", expected);
  const int last = spec.N - 1;
  std::vector<double> vars;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    SampleSet s = exact_sample(spec, Vec::Zero(spec.N), ts[k], n, seed + k, threads);
    double m = 0, v = 0;
    for (const Vec& y : s.points) m += y(last);
    m /= n;
    for (const Vec& y : s.points) v += (y(last) - m) * (y(last) - m);
    vars.push_back(v / (n - 1));
    e.value("var(t=" + fmt_double(ts[k]) + ")", vars.back());
  }
  double slope = loglog_slope(ts, vars);
  e.measured.insert(e.measured.begin(), {"slope", slope});
  e.value("expected", expected);
  e.bound = expected;
  e.tolerance = 0.15;
  e.pass = std::abs(slope - expected) <= 0.15;
  e.runtime_ms = sw.ms();
  return e;
}

}  // namespace hypo
