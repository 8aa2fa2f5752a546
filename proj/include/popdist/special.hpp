#pragma once

// Log-space combinatorics shared by the Bernstein, moment and coefficient code.

#include <cmath>
#include <cstdint>
#include <limits>

namespace popdist {

inline double log_factorial(std::int64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

/// log C(n, k); -inf when k is outside [0, n].
inline double log_binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n || n < 0) return -std::numeric_limits<double>::infinity();
  if (k == 0 || k == n) return 0.0;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// C(n, k) as a double. Exact for small arguments, log-gamma accurate beyond.
inline double binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n || n < 0) return 0.0;
  if (k > n - k) k = n - k;
  if (n <= 50) {
    // multiplicative form stays exact while the running value fits in 53 bits
    double r = 1.0;
    for (std::int64_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
  }
  return std::exp(log_binomial(n, k));
}

/// B_s^t(x) = C(t,s) x^s (1-x)^(t-s), evaluated in log space. 0^0 is taken as 1.
inline double bernstein(int t, int s, double x) {
  if (s < 0 || s > t) return 0.0;
  if (x <= 0.0) return s == 0 ? 1.0 : 0.0;
  if (x >= 1.0) return s == t ? 1.0 : 0.0;
  const double log_value =
      log_binomial(t, s) + s * std::log(x) + (t - s) * std::log1p(-x);
  return std::exp(log_value);
}

/// Ratio C(x, l) / C(n, l): the unbiased estimator of p^l from x successes in n trials.
inline double binomial_ratio(int x, int l, int n) {
  if (l == 0) return 1.0;
  if (x < l) return 0.0;
  double r = 1.0;
  for (int i = 0; i < l; ++i) r *= static_cast<double>(x - i) / static_cast<double>(n - i);
  return r;
}

}  // namespace popdist
