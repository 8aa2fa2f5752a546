#pragma once

// Pairs of distributions that share their first s moments yet sit far apart in
// W1, and the total variation they induce through the binomial channel.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "popdist/core.hpp"
#include "popdist/error.hpp"
#include "popdist/lp.hpp"
#include "popdist/metrics.hpp"
#include "popdist/polyapprox.hpp"

namespace popdist {

struct MomentMatchedPair {
  AtomicDistribution p = AtomicDistribution::delta(0.0);
  AtomicDistribution q = AtomicDistribution::delta(0.0);
  int s = 0;
  double a = 0.0;
  double b = 1.0;
  double w1 = 0.0;
  /// max_{l <= s} |E_P x^l - E_Q x^l|
  double moment_residual = 0.0;
  int lp_solves = 0;
};

namespace detail {

struct GridPair {
  Eigen::VectorXd p, q;
  double w1 = 0.0;
};

// With the sign pattern sigma_j of F_P - F_Q fixed on each grid cell, W1 is the
// linear functional sum_i (P_i - Q_i) g_i with g_i = dx * sum_{j >= i} sigma_j.
inline GridPair pair_lp(int s, int m, const std::vector<double>& sigma, int& solves) {
  const int n = m + 1;
  const double dx = 1.0 / m;
  lp::Problem prob;
  prob.A = Eigen::MatrixXd::Zero(s + 2, 2 * n);
  prob.b = Eigen::VectorXd::Zero(s + 2);
  prob.c = Eigen::VectorXd::Zero(2 * n);
  double tail = 0.0;
  for (int i = m; i >= 0; --i) {
    if (i < m) tail += sigma[i] * dx;
    prob.c(i) = -tail;
    prob.c(n + i) = tail;
  }
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / m;
    prob.A(0, i) = 1.0;
    prob.A(1, n + i) = 1.0;
    // matched moments expressed in the shifted Chebyshev basis, which keeps rows of order one
    for (int l = 1; l <= s; ++l) {
      const double v = shifted_chebyshev(l, x);
      prob.A(1 + l, i) = v;
      prob.A(1 + l, n + i) = -v;
    }
  }
  prob.b(0) = 1.0;
  prob.b(1) = 1.0;
  const lp::Solution sol = lp::solve(prob);
  ++solves;
  if (sol.status != lp::Status::optimal) {
    throw ConvergenceError("moment-matched pair LP ended with status " + lp::to_string(sol.status));
  }
  GridPair out{sol.x.head(n), sol.x.tail(n), 0.0};
  double cdf = 0.0;
  for (int i = 0; i < m; ++i) {
    cdf += out.p(i) - out.q(i);
    out.w1 += std::abs(cdf) * dx;
  }
  return out;
}

inline std::vector<double> sign_of(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= 0.0 ? 1.0 : -1.0;
  return out;
}

}  // namespace detail

/// Pair P, Q on [a, b] with equal moments of order 1..s and large W1.
///
/// Maximizing W1 under the moment constraints is not a linear program, but it is
/// one once the sign of F_P - F_Q per grid cell is fixed. Alternating between
/// solving that LP and re-reading the signs never decreases W1; three oscillating
/// starting patterns are tried and the best pair is kept. The pair is built on
/// [0,1] and moved to [a, b] by x -> a + (b - a) x.
inline MomentMatchedPair moment_matched_pair(int s, double a = 0.0, double b = 1.0, int grid_size = 200,
                                             int max_rounds = 50) {
  detail::require(s >= 1, "moment-matched pair needs s >= 1");
  detail::require(b > a && a >= 0.0 && b <= 1.0, "moment-matched pair needs 0 <= a < b <= 1");
  detail::require(grid_size >= 4 * s, "moment-matched pair needs grid_size >= 4 s");
  const int m = grid_size;

  std::vector<double> mid(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) mid[j] = (j + 0.5) / m;
  std::vector<std::vector<double>> starts;
  {
    std::vector<double> v1(m), v2(m), v3(m);
    for (int j = 0; j < m; ++j) {
      v1[j] = std::sin((s + 1) * std::acos(2.0 * mid[j] - 1.0));
      v2[j] = shifted_chebyshev(s, mid[j]);
      v3[j] = std::sin(std::numbers::pi * s * mid[j] + 1e-9);
    }
    starts = {detail::sign_of(v1), detail::sign_of(v2), detail::sign_of(v3)};
  }

  MomentMatchedPair out;
  out.s = s;
  out.a = a;
  out.b = b;
  detail::GridPair best;
  bool have = false;
  for (auto sigma : starts) {
    detail::GridPair cur;
    for (int round = 0; round < max_rounds; ++round) {
      cur = detail::pair_lp(s, m, sigma, out.lp_solves);
      std::vector<double> next = sigma;
      double cdf = 0.0;
      for (int j = 0; j < m; ++j) {
        cdf += cur.p(j) - cur.q(j);
        if (std::abs(cdf) > 1e-12) next[j] = cdf > 0.0 ? 1.0 : -1.0;
      }
      if (next == sigma) break;
      sigma = std::move(next);
    }
    if (!have || cur.w1 > best.w1) {
      best = cur;
      have = true;
    }
  }

  std::vector<Atom> pa, qa;
  for (int i = 0; i <= m; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / m;
    if (best.p(i) > 0.0) pa.push_back({x, best.p(i)});
    if (best.q(i) > 0.0) qa.push_back({x, best.q(i)});
  }
  out.p = AtomicDistribution::normalize(std::move(pa));
  out.q = AtomicDistribution::normalize(std::move(qa));
  out.w1 = wasserstein1(out.p, out.q);
  const MomentVector mp = moments(out.p, s), mq = moments(out.q, s);
  for (int l = 1; l <= s; ++l) out.moment_residual = std::max(out.moment_residual, std::abs(mp[l] - mq[l]));
  return out;
}

/// Half-L1 distance between the Binomial(t) mixtures over P and Q.
inline double binomial_channel_tv(const AtomicDistribution& p, const AtomicDistribution& q, int t) {
  return total_variation_fingerprint(expected_fingerprint(p, t), expected_fingerprint(q, t));
}

struct Theorem4Report {
  double n = 0.0;
  int t = 0;
  int s = 0;
  double a = 0.0;
  double b = 0.0;
  double achieved_w1 = 0.0;
  double target_w1 = 0.0;  // 1 / (e^4 sqrt(t ln N))
  double channel_tv = 0.0;
  double channel_tv_s1 = 0.0;  // same interval, only the mean matched
  double moment_residual = 0.0;
};

inline constexpr int kMomentOrderCap = 40;

/// Lower-bound construction for population size N and t trials: a pair on
/// [1/2 - sqrt(ln N / t), 1/2 + sqrt(ln N / t)] ∩ [0,1] matching
/// s = min(ceil(e^4 ln N), cap) moments.
inline Theorem4Report theorem4_scenario(double n, int t, int cap = kMomentOrderCap, int grid_size = 0) {
  detail::require(n > 1.0 && t >= 1, "theorem4 scenario needs N > 1 and t >= 1");
  detail::require(cap >= 1, "moment cap must be >= 1");
  const double log_n = std::log(n);
  const double half = std::sqrt(log_n / t);
  Theorem4Report rep;
  rep.n = n;
  rep.t = t;
  rep.a = std::max(0.0, 0.5 - half);
  rep.b = std::min(1.0, 0.5 + half);
  detail::require(rep.b > rep.a, "theorem4 scenario interval is degenerate");
  // the tiny offset keeps ceil(e^4 * 1) from rounding up past an exact product
  rep.s = std::min(static_cast<int>(std::ceil(std::exp(4.0) * log_n - 1e-9)), cap);
  const int grid = grid_size > 0 ? grid_size : std::max(400, 4 * rep.s);
  const MomentMatchedPair pair = moment_matched_pair(rep.s, rep.a, rep.b, grid);
  const MomentMatchedPair mean_only = moment_matched_pair(1, rep.a, rep.b, grid);
  rep.achieved_w1 = pair.w1;
  rep.target_w1 = 1.0 / (std::exp(4.0) * std::sqrt(t * log_n));
  rep.channel_tv = binomial_channel_tv(pair.p, pair.q, t);
  rep.channel_tv_s1 = binomial_channel_tv(mean_only.p, mean_only.q, t);
  rep.moment_residual = pair.moment_residual;
  return rep;
}

inline nlohmann::json theorem4_to_json(const Theorem4Report& r) {
  return nlohmann::json{{"N", r.n},
                        {"t", r.t},
                        {"s", r.s},
                        {"interval", {r.a, r.b}},
                        {"achieved_w1", r.achieved_w1},
                        {"target_w1", r.target_w1},
                        {"channel_tv", r.channel_tv},
                        {"channel_tv_s1", r.channel_tv_s1},
                        {"moment_residual", r.moment_residual}};
}

}  // namespace popdist
