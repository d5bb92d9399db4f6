#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hypo/linalg.hpp"
#include "hypo/operator_core.hpp"

namespace hypo {

/// Adaptive Gauss–Kronrod (7/15) by bisection. A subinterval is accepted when
/// its error estimate is below rel_tol times its own L1 mass, or abs_tol
/// scaled by its share of [a, b], or when max_depth is exhausted.
template <class F>
double adaptive_gk(F&& f, double a, double b, double rel_tol, int max_depth, double abs_tol = 0.0) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  double err = 0, l1 = 0;
  double est = GK::integrate(f, a, b, 0, 0.0, &err, &l1);
  if (max_depth <= 0 || err <= rel_tol * l1 || err <= abs_tol) return est;
  double mid = 0.5 * (a + b);
  return adaptive_gk(f, a, mid, rel_tol, max_depth - 1, 0.5 * abs_tol) +
         adaptive_gk(f, mid, b, rel_tol, max_depth - 1, 0.5 * abs_tol);
}

/// Generalized polar coordinates w = δ(r)ω on the unit sphere ‖ω‖ = 1.
/// With a_k = |ξ_k|^{1/q_k} = r s_k and √|τ| = r s_{N+1}, s on the simplex,
///   dw = r^{Q+1} · 2 s_{N+1} ∏ q_k s_k^{q_k-1} dr ds.
/// s_{N+1} = v0 is swept outermost so every inner evaluation shares τ;
/// the remaining masses use nested conical coordinates.
struct PolarRule {
  int n_r = 8;
  /// Largest log-r panel, in natural-log units.
  double max_log_panel = 0.7;
  double tol = 1e-10;
  int max_depth = 10;
  /// Only τ > 0 (kernels supported in the future half-space).
  bool causal = true;
};

namespace internal {

inline std::vector<std::pair<double, double>> panels_from_breaks(const std::vector<double>& br, double max_log) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double a = br[k], b = br[k + 1];
    if (!(b > a)) continue;
    if (a <= 0) {
      out.emplace_back(a, b);
      continue;
    }
    int m = std::max(1, static_cast<int>(std::ceil(std::log(b / a) / max_log)));
    double la = std::log(a), h = (std::log(b) - la) / m;
    for (int i = 0; i < m; ++i) out.emplace_back(std::exp(la + i * h), std::exp(la + (i + 1) * h));
  }
  return out;
}

template <class Leaf>
double conical(int N, int k, double mass, std::vector<double>& s, Leaf& leaf, const PolarRule& rule, int depth,
               double abs_tol) {
  if (k == N - 1) {
    s[k] = mass;
    return leaf(s);
  }
  return adaptive_gk(
      [&](double v) {
        s[k] = mass * v;
        return mass * conical(N, k + 1, mass * (1.0 - v), s, leaf, rule, depth, abs_tol);
      },
      0.0, 1.0, rule.tol, depth, abs_tol);
}

}  // namespace internal

/// ∫ over r in the panels given by r_breaks (increasing) of the sphere
/// integral. make_slice(r, τ) returns a callable ξ ↦ integrand(ξ, τ); it is
/// invoked once per (r, v0) node. Panels with a > 0 use Gauss in log r.
template <class MakeSlice>
double polar_integrate(const BlockStructure& st, const std::vector<double>& r_breaks, const PolarRule& rule,
                       MakeSlice&& make_slice) {
  const int N = st.N();
  const GaussRule& gr = gauss_legendre(rule.n_r);
  auto panels = internal::panels_from_breaks(r_breaks, rule.max_log_panel);
  const int nsign = 1 << N;
  std::vector<double> partial;
  for (const auto& [ra, rb] : panels) {
    const bool logp = ra > 0;
    const double la = logp ? std::log(ra) : ra, lb = logp ? std::log(rb) : rb;
    for (int ir = 0; ir < gr.size(); ++ir) {
      double u = 0.5 * (la + lb) + 0.5 * (lb - la) * gr.x[ir];
      double r = logp ? std::exp(u) : u;
      double wr = 0.5 * (lb - la) * gr.w[ir] * (logp ? r : 1.0) * std::pow(r, st.Q + 1);
      int depth = 0;
      double abs_tol = 0.0;
      auto sphere = [&](double v0) {
        double total = 0.0;
        for (int ts = 0; ts < (rule.causal ? 1 : 2); ++ts) {
          double tau = (ts == 0 ? 1.0 : -1.0) * (r * v0) * (r * v0);
          auto eval = make_slice(r, tau);
          Vec xi(N);
          auto leaf = [&](const std::vector<double>& s) {
            double w = 1.0;
            for (int k = 0; k < N; ++k) {
              const int q = st.q[k];
              xi(k) = std::pow(r * s[k], q);
              if (q > 1) w *= q * std::pow(s[k], q - 1);
            }
            double acc = 0.0;
            for (int sg = 0; sg < nsign; ++sg) {
              Vec x = xi;
              for (int k = 0; k < N; ++k)
                if (sg >> k & 1) x(k) = -x(k);
              acc += eval(static_cast<const Vec&>(x));
            }
            return w * acc;
          };
          std::vector<double> s(N);
          total += internal::conical(N, 0, 1.0 - v0, s, leaf, rule, depth, abs_tol);
        }
        return 2.0 * v0 * total;
      };
      // A single-panel pass sets the absolute floor for the refined pass.
      double err = 0, l1 = 0;
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(sphere, 0.0, 1.0, 0, 0.0, &err, &l1);
      depth = rule.max_depth;
      abs_tol = rule.tol * l1;
      partial.push_back(wr * adaptive_gk(sphere, 0.0, 1.0, rule.tol, rule.max_depth, abs_tol));
    }
  }
  return pairwise_sum(partial);
}

}  // namespace hypo
