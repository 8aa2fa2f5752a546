#pragma once

// Distances between distributions (W1) and between fingerprints (KL, TV),
// plus raw and shifted moments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "popdist/core.hpp"

namespace popdist {

/// mu_k = sum mass * (x - shift)^k for k = 1..order.
struct MomentVector {
  double shift = 0.0;
  std::vector<double> values;

  int order() const { return static_cast<int>(values.size()); }
  double operator[](int k) const { return values.at(static_cast<std::size_t>(k) - 1); }
};

namespace detail {

template <typename AtomRange>
double merged_cdf_distance(const AtomRange& p, const AtomRange& q) {
  // Walk the union of breakpoints; between consecutive breakpoints F_P - F_Q is constant.
  std::size_t i = 0, j = 0;
  double diff = 0.0, total = 0.0;
  double prev = 0.0;
  bool started = false;
  while (i < p.size() || j < q.size()) {
    double x;
    if (j >= q.size() || (i < p.size() && p[i].location <= q[j].location)) {
      x = p[i].location;
    } else {
      x = q[j].location;
    }
    if (started) total += std::abs(diff) * (x - prev);
    while (i < p.size() && p[i].location == x) diff += p[i++].mass;
    while (j < q.size() && q[j].location == x) diff -= q[j++].mass;
    prev = x;
    started = true;
  }
  return total;
}

}  // namespace detail

/// Wasserstein-1 distance: integral of |F_P - F_Q| over [0,1], computed exactly.
inline double wasserstein1(const AtomicDistribution& p, const AtomicDistribution& q) {
  return detail::merged_cdf_distance(p.atoms(), q.atoms());
}

/// W1 between two measures of equal total mass.
inline double wasserstein1(const AtomicMeasure& p, const AtomicMeasure& q) {
  detail::require(std::abs(p.total_mass() - q.total_mass()) <= 1e-9 * std::max(1.0, p.total_mass()),
                  "wasserstein1 needs measures of equal mass");
  return detail::merged_cdf_distance(p.atoms(), q.atoms());
}

/// KL(A, B) = sum A_s log(A_s / B_s); +inf when A puts mass where B has none.
inline double kl_divergence(const Fingerprint& a, const Fingerprint& b) {
  detail::require(a.t() == b.t(), "kl_divergence: fingerprints have different t");
  double kl = 0.0;
  for (int s = 0; s <= a.t(); ++s) {
    const double as = a[s];
    if (as <= 0.0) continue;
    if (b[s] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += as * std::log(as / b[s]);
  }
  return std::max(0.0, kl);
}

inline double l1_distance(const Fingerprint& a, const Fingerprint& b) {
  detail::require(a.t() == b.t(), "l1_distance: fingerprints have different t");
  double d = 0.0;
  for (int s = 0; s <= a.t(); ++s) d += std::abs(a[s] - b[s]);
  return d;
}

/// Half-normalized total variation, in [0,1].
inline double total_variation_fingerprint(const Fingerprint& a, const Fingerprint& b) {
  detail::require(a.t() == b.t(), "total_variation: fingerprints have different t");
  return 0.5 * l1_distance(a, b);
}

template <typename AtomRange>
MomentVector moments_of_atoms(const AtomRange& atoms, int k_max, double shift) {
  detail::require(k_max >= 1, "moments need k_max >= 1");
  MomentVector out{shift, std::vector<double>(static_cast<std::size_t>(k_max), 0.0)};
  for (const Atom& a : atoms) {
    const double d = a.location - shift;
    double power = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      power *= d;
      out.values[k - 1] += a.mass * power;
    }
  }
  return out;
}

inline MomentVector moments(const AtomicDistribution& p, int k_max, double shift = 0.0) {
  return moments_of_atoms(p.atoms(), k_max, shift);
}

inline MomentVector moments(const AtomicMeasure& p, int k_max, double shift = 0.0) {
  return moments_of_atoms(p.atoms(), k_max, shift);
}

/// Re-expands moments about `from.shift` into moments about `new_shift` with the
/// binomial theorem; `mass` is the zeroth moment.
inline MomentVector reshift_moments(const MomentVector& from, double new_shift, double mass = 1.0) {
  const double delta = from.shift - new_shift;  // (x - new) = (x - old) + delta
  MomentVector out{new_shift, std::vector<double>(from.values.size(), 0.0)};
  for (int k = 1; k <= from.order(); ++k) {
    double sum = 0.0;
    for (int l = 0; l <= k; ++l) {
      const double mu_l = l == 0 ? mass : from[l];
      sum += binomial(k, l) * mu_l * std::pow(delta, k - l);
    }
    out.values[k - 1] = sum;
  }
  return out;
}

/// KL measured in bits.
inline double kl_divergence_bits(const Fingerprint& a, const Fingerprint& b) {
  return kl_divergence(a, b) / std::numbers::ln2;
}

/// Pinsker: KL(A,B) >= ||A - B||_1^2 / (2 ln 2). The constant is the one for KL in
/// bits, so the nats value from kl_divergence is converted first.
inline bool pinsker_check(const Fingerprint& a, const Fingerprint& b) {
  const double kl_bits = kl_divergence_bits(a, b);
  const double l1 = l1_distance(a, b);
  return kl_bits >= l1 * l1 / (2.0 * std::numbers::ln2) - 1e-12;
}

struct MetricRecord {
  std::string metric;
  double value = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const MetricRecord& r) {
  j = nlohmann::json{{"metric", r.metric}, {"value", r.value}, {"details", r.details}};
}

}  // namespace popdist
