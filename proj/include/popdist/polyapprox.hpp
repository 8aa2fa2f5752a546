#pragma once

// Shifted Chebyshev fits, their expansion in the degree-t Bernstein basis, and
// numeric checks of the coefficient bounds that control the MLE error analysis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "popdist/error.hpp"
#include "popdist/special.hpp"

namespace popdist {

/// T~_m(x) = T_m(2x - 1) by the three-term recurrence.
inline double shifted_chebyshev(int m, double x) {
  detail::require(m >= 0, "Chebyshev degree must be >= 0");
  if (m == 0) return 1.0;
  const double y = 2.0 * x - 1.0;
  double prev = 1.0, cur = y;
  for (int k = 2; k <= m; ++k) {
    const double next = 2.0 * y * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Sum_j b_j B_j^t(x) with t = b.size() - 1.
inline double bernstein_eval(const std::vector<double>& b, double x) {
  const int t = static_cast<int>(b.size()) - 1;
  double v = 0.0;
  for (int j = 0; j <= t; ++j) v += b[j] * bernstein(t, j, x);
  return v;
}

struct ChebyshevFit {
  int degree = 0;
  std::vector<double> coefficients;  // a_0..a_k
  double uniform_error = 0.0;

  double operator()(double x) const {
    double v = 0.0;
    for (int m = 0; m <= degree; ++m) v += coefficients[m] * shifted_chebyshev(m, x);
    return v;
  }
  double l2_norm() const {
    double s = 0.0;
    for (double a : coefficients) s += a * a;
    return std::sqrt(s);
  }
};

/// Interpolates f at the k+1 shifted Chebyshev points; uniform_error is measured
/// on 10k+1 equispaced points of [0,1].
inline ChebyshevFit chebyshev_fit(const std::function<double(double)>& f, int k) {
  detail::require(k >= 1, "Chebyshev fit needs k >= 1");
  const int n = k + 1;
  std::vector<double> theta(n), values(n);
  for (int i = 0; i < n; ++i) {
    theta[i] = std::numbers::pi * (i + 0.5) / n;
    values[i] = f(0.5 * (1.0 + std::cos(theta[i])));
  }
  ChebyshevFit fit;
  fit.degree = k;
  fit.coefficients.assign(n, 0.0);
  for (int m = 0; m < n; ++m) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += values[i] * std::cos(m * theta[i]);
    fit.coefficients[m] = (m == 0 ? 1.0 : 2.0) * s / n;
  }
  const int points = 10 * k;
  for (int i = 0; i <= points; ++i) {
    const double x = static_cast<double>(i) / points;
    fit.uniform_error = std::max(fit.uniform_error, std::abs(f(x) - fit(x)));
  }
  return fit;
}

/// Coefficients of B_i^m in the degree-t Bernstein basis: C(m,i) C(t-m, j-i) / C(t,j).
inline std::vector<double> degree_raise(int m, int i, int t) {
  detail::require(0 <= i && i <= m && m <= t, "degree raising needs 0 <= i <= m <= t");
  std::vector<double> c(static_cast<std::size_t>(t) + 1, 0.0);
  for (int j = i; j <= i + t - m; ++j) {
    c[j] = std::exp(log_binomial(m, i) + log_binomial(t - m, j - i) - log_binomial(t, j));
  }
  return c;
}

namespace detail {

inline long double log_binomial_l(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<long double>::infinity();
  return std::lgamma(static_cast<long double>(n) + 1) - std::lgamma(static_cast<long double>(k) + 1) -
         std::lgamma(static_cast<long double>(n - k) + 1);
}

struct SignedLog {
  int sign = 0;  // -1, 0, +1
  long double log_magnitude = -std::numeric_limits<long double>::infinity();

  double value() const { return sign == 0 ? 0.0 : sign * static_cast<double>(std::exp(log_magnitude)); }
};

// Sum of sign_l * exp(log_l), accumulated relative to the largest term.
inline SignedLog signed_log_sum(const std::vector<int>& signs, const std::vector<long double>& logs) {
  long double top = -std::numeric_limits<long double>::infinity();
  for (long double l : logs) top = std::max(top, l);
  SignedLog out;
  if (!std::isfinite(top)) return out;
  long double acc = 0.0L;
  for (std::size_t i = 0; i < logs.size(); ++i) acc += signs[i] * std::exp(logs[i] - top);
  if (acc == 0.0L) return out;
  out.sign = acc > 0 ? 1 : -1;
  out.log_magnitude = top + std::log(std::abs(acc));
  return out;
}

}  // namespace detail

/// C(t,m,j): coefficient of B_j^t in the Bernstein expansion of T~_m.
class CoeffTable {
 public:
  CoeffTable(int t, int m_max) : t_(t), m_max_(m_max) {
    detail::require(t >= 1 && 0 <= m_max && m_max <= t, "coeff_table needs 0 <= m_max <= t, t >= 1");
    entries_.resize(static_cast<std::size_t>(m_max + 1) * (t + 1));
    std::vector<int> signs;
    std::vector<long double> logs;
    for (int m = 0; m <= m_max; ++m) {
      for (int j = 0; j <= t; ++j) {
        signs.clear();
        logs.clear();
        for (int l = std::max(0, j - (t - m)); l <= std::min(m, j); ++l) {
          signs.push_back((m - l) % 2 == 0 ? 1 : -1);
          logs.push_back(detail::log_binomial_l(2 * m, 2 * l) + detail::log_binomial_l(t - m, j - l) -
                         detail::log_binomial_l(t, j));
        }
        entries_[index(m, j)] = detail::signed_log_sum(signs, logs);
      }
    }
  }

  int t() const { return t_; }
  int m_max() const { return m_max_; }
  double operator()(int m, int j) const { return entries_[index(m, j)].value(); }
  int sign(int m, int j) const { return entries_[index(m, j)].sign; }
  double log_abs(int m, int j) const { return static_cast<double>(entries_[index(m, j)].log_magnitude); }

  std::vector<double> row(int m) const {
    std::vector<double> r(static_cast<std::size_t>(t_) + 1);
    for (int j = 0; j <= t_; ++j) r[j] = (*this)(m, j);
    return r;
  }

 private:
  std::size_t index(int m, int j) const { return static_cast<std::size_t>(m) * (t_ + 1) + j; }

  int t_;
  int m_max_;
  std::vector<detail::SignedLog> entries_;
};

inline CoeffTable coeff_table(int t, int m_max) { return CoeffTable(t, m_max); }

/// Bound checks for one (t, m) row, all done on logarithms.
struct CoeffBoundRow {
  int t = 0;
  int m = 0;
  double max_abs_coeff = 0.0;
  double l2_norm = 0.0;
  double lemma4_bound = 0.0;      // (t+1) e^{m^2/t}
  double conjecture_bound = 0.0;  // e^{m^2/t}
  bool lemma4_ok = true;          // max |C| within the bound
  bool l2_ok = true;              // l2 norm within the bound
  bool conjecture_ok = true;      // informational only
  double ratio = 0.0;             // max |C| / lemma4_bound
};

struct CoeffBoundReport {
  int t = 0;
  std::vector<CoeffBoundRow> rows;
  int violations = 0;  // rows failing the sup or the L2 coefficient bound
  int conjecture_violations = 0;
  double max_ratio = 0.0;
};

inline CoeffBoundReport verify_coeff_bound(int t) {
  detail::require(t >= 1, "verify_coeff_bound needs t >= 1");
  constexpr double kSlack = 1e-12;
  const CoeffTable table(t, t);
  CoeffBoundReport rep;
  rep.t = t;
  for (int m = 0; m <= t; ++m) {
    CoeffBoundRow row;
    row.t = t;
    row.m = m;
    const double log_conj = static_cast<double>(m) * m / t;
    const double log_bound = std::log(t + 1.0) + log_conj;
    double log_max = -std::numeric_limits<double>::infinity();
    std::vector<int> ones;
    std::vector<long double> sq;
    for (int j = 0; j <= t; ++j) {
      if (table.sign(m, j) == 0) continue;
      const double la = table.log_abs(m, j);
      log_max = std::max(log_max, la);
      ones.push_back(1);
      sq.push_back(2.0L * la);
    }
    const double log_l2 = 0.5 * static_cast<double>(detail::signed_log_sum(ones, sq).log_magnitude);
    row.max_abs_coeff = std::exp(log_max);
    row.l2_norm = std::exp(log_l2);
    row.lemma4_bound = std::exp(log_bound);
    row.conjecture_bound = std::exp(log_conj);
    row.lemma4_ok = log_max <= log_bound + kSlack;
    row.l2_ok = log_l2 <= log_bound + kSlack;
    row.conjecture_ok = log_max <= log_conj + kSlack;
    row.ratio = std::exp(log_max - log_bound);
    if (!row.lemma4_ok || !row.l2_ok) ++rep.violations;
    if (!row.conjecture_ok) ++rep.conjecture_violations;
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  return rep;
}

/// max over `samples` points on |z| = 1 of |sum_j C(t,m,j) z^(t-j)|.
inline double coeff_generating_max(const CoeffTable& table, int m, int samples = 256) {
  detail::require(m <= table.m_max() && samples >= 1, "coeff_generating_max: bad arguments");
  const int t = table.t();
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * k / samples);
    std::complex<double> v = 0.0;
    for (int j = 0; j <= t; ++j) v = v * z + table(m, j);  // Horner in z^(t-j)
    best = std::max(best, std::abs(v));
  }
  return best;
}

struct BernsteinAssembly {
  std::vector<double> b;
  double max_abs = 0.0;
  double bound = 0.0;            // sqrt(k) (t+1) e^{k^2/t}
  bool bound_ok = true;
  double full_degree_bound = 0.0;  // sqrt(t) 2^t, reported when k == t
  double max_deviation = 0.0;      // sup |sum b_j B_j^t - fit| on 1001 points
};

/// b_j = sum_m a_m C(t,m,j).
inline BernsteinAssembly assemble_bernstein_coeffs(const ChebyshevFit& fit, int t) {
  detail::require(fit.degree <= t, "Chebyshev degree exceeds t");
  const int k = fit.degree;
  const CoeffTable table(t, k);
  BernsteinAssembly out;
  out.b.assign(static_cast<std::size_t>(t) + 1, 0.0);
  for (int j = 0; j <= t; ++j) {
    for (int m = 0; m <= k; ++m) out.b[j] += fit.coefficients[m] * table(m, j);
    out.max_abs = std::max(out.max_abs, std::abs(out.b[j]));
  }
  out.bound = std::sqrt(static_cast<double>(k)) * (t + 1.0) * std::exp(static_cast<double>(k) * k / t);
  out.bound_ok = out.max_abs <= out.bound;
  if (k == t) out.full_degree_bound = std::sqrt(static_cast<double>(t)) * std::pow(2.0, t);
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    out.max_deviation = std::max(out.max_deviation, std::abs(bernstein_eval(out.b, x) - fit(x)));
  }
  return out;
}

/// sup |f - sum_j f(j/t) B_j^t| on `points` + 1 equispaced points.
inline double bernstein_sampling_error(const std::function<double(double)>& f, int t, int points = 2000) {
  detail::require(t >= 1 && points >= 1, "bernstein_sampling_error: bad arguments");
  std::vector<double> b(static_cast<std::size_t>(t) + 1);
  for (int j = 0; j <= t; ++j) b[j] = f(static_cast<double>(j) / t);
  double err = 0.0;
  for (int i = 0; i <= points; ++i) {
    const double x = static_cast<double>(i) / points;
    err = std::max(err, std::abs(f(x) - bernstein_eval(b, x)));
  }
  return err;
}

struct ParsevalReport {
  double sum_squares = 0.0;
  double sup_on_samples = 0.0;
  bool holds = true;
};

/// Compares sum a_i^2 with the squared max of |p| over `samples` roots of unity.
/// Exact (discrete Parseval) whenever samples > degree.
inline ParsevalReport parseval_check(const std::vector<double>& a, int samples = 64) {
  detail::require(!a.empty() && samples >= 1, "parseval_check: bad arguments");
  ParsevalReport rep;
  for (double c : a) rep.sum_squares += c * c;
  for (int k = 0; k < samples; ++k) {
    const std::complex<double> z = std::polar(1.0, -2.0 * std::numbers::pi * k / samples);
    std::complex<double> v = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) v = v * z + *it;
    rep.sup_on_samples = std::max(rep.sup_on_samples, std::abs(v));
  }
  rep.holds = rep.sum_squares <= rep.sup_on_samples * rep.sup_on_samples + 1e-8;
  return rep;
}

struct KravchukReport {
  int t = 0;
  int k = 0;
  double sum_abs = 0.0;  // sum_j |B_j^(k)(1/2) / k!|
  double bound = 0.0;    // sqrt(t) e^k t^(k/2) / k^(k/2)
  bool holds = true;
  bool identity_ok = true;  // generating identity at z in {-1/2, 1/2, 2}, checked exactly
};

namespace detail {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// K_j(k; t) = sum_i (-1)^i C(k,i) C(t-k, j-i), read off as the coefficients of
// (1+z)^(t-k) (1-z)^k. Integer arithmetic throughout: the alternating sums
// cancel too strongly for floating point once t reaches a few hundred.
inline std::vector<cpp_int> kravchuk_exact(int t, int k) {
  std::vector<cpp_int> c(static_cast<std::size_t>(t) + 1, 0);
  c[0] = 1;
  for (int d = 1; d <= t - k; ++d)
    for (int j = d; j >= 1; --j) c[j] += c[j - 1];
  for (int d = t - k + 1; d <= t; ++d)
    for (int j = d; j >= 1; --j) c[j] -= c[j - 1];
  return c;
}

// Direct sum, used to cross-check the product expansion.
inline cpp_int kravchuk_direct(int t, int k, int j) {
  auto choose = [](int n, int r) {
    if (r < 0 || r > n) return cpp_int(0);
    cpp_int v = 1;
    for (int i = 1; i <= r; ++i) v = v * (n - r + i) / i;
    return v;
  };
  cpp_int s = 0;
  for (int i = std::max(0, j - (t - k)); i <= std::min(k, j); ++i) {
    const cpp_int term = choose(k, i) * choose(t - k, j - i);
    s += (i % 2 == 0) ? term : cpp_int(-term);
  }
  return s;
}

}  // namespace detail

/// Derivative sums of the Bernstein basis at 1/2 through Kravchuk polynomials:
/// B_j^(k)(1/2) / k! = (-1)^k 2^-(t-k) C(t,k) K_j(k; t),
/// from B_j^(k) / k! = C(t,k) sum_i (-1)^(k-i) C(k,i) B_(j-i)^(t-k).
inline KravchukReport kravchuk_bound_check(int t, int k) {
  using detail::cpp_int;
  using detail::cpp_rational;
  detail::require(1 <= k && k <= t, "kravchuk_bound_check needs 1 <= k <= t");
  KravchukReport rep;
  rep.t = t;
  rep.k = k;
  rep.bound = std::exp(0.5 * std::log(static_cast<double>(t)) + k + 0.5 * k * std::log(static_cast<double>(t)) -
                       0.5 * k * std::log(static_cast<double>(k)));

  const auto kj = detail::kravchuk_exact(t, k);
  cpp_int abs_sum = 0;
  for (const auto& v : kj) abs_sum += abs(v);
  cpp_int choose_tk = 1;
  for (int i = 1; i <= k; ++i) choose_tk = choose_tk * (t - k + i) / i;
  const cpp_rational total(choose_tk * abs_sum, cpp_int(1) << (t - k));
  rep.sum_abs = total.convert_to<double>();
  rep.holds = rep.sum_abs <= rep.bound;

  for (const cpp_rational& z : {cpp_rational(-1, 2), cpp_rational(1, 2), cpp_rational(2)}) {
    cpp_rational lhs = 0, power = 1;
    for (int j = 0; j <= t; ++j) {
      lhs += kj[j] * power;
      power *= z;
    }
    cpp_rational rhs = 1;
    for (int i = 0; i < t - k; ++i) rhs *= 1 + z;
    for (int i = 0; i < k; ++i) rhs *= 1 - z;
    rep.identity_ok = rep.identity_ok && lhs == rhs;
  }
  return rep;
}

}  // namespace popdist
