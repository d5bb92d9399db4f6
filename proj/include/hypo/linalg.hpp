#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss.hpp>

#include "hypo/error.hpp"

namespace hypo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat symmetrize(const Eigen::Ref<const Mat>& m) { return 0.5 * (m + m.transpose()); }

inline Mat expm(const Eigen::Ref<const Mat>& m) {
  Mat in = m;
  Mat out = in.exp();
  if (!out.allFinite()) fail(ErrorKind::ExpOverflow, "matrix exponential is not finite");
  return out;
}

inline double max_abs(const Eigen::Ref<const Mat>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Gauss–Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

namespace internal {

template <int N>
GaussRule make_gauss() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& wt = G::weights();
  GaussRule rule;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) {
      rule.x.push_back(0.0);
      rule.w.push_back(wt[k]);
    } else {
      rule.x.push_back(a[k]);
      rule.w.push_back(wt[k]);
      rule.x.push_back(-a[k]);
      rule.w.push_back(wt[k]);
    }
  }
  std::vector<std::size_t> idx(rule.x.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return rule.x[i] < rule.x[j]; });
  GaussRule sorted;
  for (auto k : idx) {
    sorted.x.push_back(rule.x[k]);
    sorted.w.push_back(rule.w[k]);
  }
  return sorted;
}

}  // namespace internal

/// Returns the smallest supported Gauss–Legendre rule with at least n nodes.
inline const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  constexpr int kOrders[] = {2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 40, 48, 64};
  int order = 64;
  for (int o : kOrders) {
    if (o >= n) {
      order = o;
      break;
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  GaussRule rule;
  switch (order) {
    case 2: rule = internal::make_gauss<2>(); break;
    case 3: rule = internal::make_gauss<3>(); break;
    case 4: rule = internal::make_gauss<4>(); break;
    case 5: rule = internal::make_gauss<5>(); break;
    case 6: rule = internal::make_gauss<6>(); break;
    case 8: rule = internal::make_gauss<8>(); break;
    case 10: rule = internal::make_gauss<10>(); break;
    case 12: rule = internal::make_gauss<12>(); break;
    case 16: rule = internal::make_gauss<16>(); break;
    case 20: rule = internal::make_gauss<20>(); break;
    case 24: rule = internal::make_gauss<24>(); break;
    case 32: rule = internal::make_gauss<32>(); break;
    case 40: rule = internal::make_gauss<40>(); break;
    case 48: rule = internal::make_gauss<48>(); break;
    default: rule = internal::make_gauss<64>(); break;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

/// Pairwise (cascade) summation; order-fixed, so results are bit-stable.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += v[k];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Runs fn(k) for k in [0, n) over at most `threads` workers with a static
/// contiguous partition. Results must be written to per-index slots.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  int t = std::max(1, threads);
  if (t == 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  t = static_cast<int>(std::min<std::size_t>(t, n));
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (int w = 0; w < t; ++w) {
    std::size_t lo = n * w / t, hi = n * (w + 1) / t;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t k = lo; k < hi; ++k) fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

/// Least-squares slope of log|y| against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(std::abs(y[k]));
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(std::abs(y[k])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace hypo
