#pragma once

// Domain types shared by every estimator: observations, fingerprints, atomic
// distributions on [0,1] and the Bernstein evaluation matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "popdist/error.hpp"
#include "popdist/special.hpp"

namespace popdist {

inline constexpr double kAtomMergeDistance = 1e-12;
inline constexpr double kDistributionMassTolerance = 1e-10;
inline constexpr double kFingerprintSumTolerance = 1e-9;

/// Success counts X_i out of t trials, one per individual.
class ObservationSet {
 public:
  ObservationSet(int t, std::vector<int> counts) : t_(t), counts_(std::move(counts)) {
    detail::require(t_ >= 1, "observations need t >= 1");
    detail::require(!counts_.empty(), "observations need at least one individual");
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] < 0 || counts_[i] > t_) {
        throw InputError("count " + std::to_string(counts_[i]) + " at index " + std::to_string(i) +
                         " is outside [0, " + std::to_string(t_) + "]");
      }
    }
  }

  int t() const { return t_; }
  std::size_t size() const { return counts_.size(); }
  std::span<const int> counts() const { return counts_; }

 private:
  int t_;
  std::vector<int> counts_;
};

/// Raw Bernoulli outcomes, one row of t trials per individual.
class TrialMatrix {
 public:
  TrialMatrix(int t, std::size_t individuals, std::vector<std::uint8_t> outcomes)
      : t_(t), individuals_(individuals), outcomes_(std::move(outcomes)) {
    detail::require(t_ >= 1, "trial matrix needs t >= 1");
    detail::require(individuals_ >= 1, "trial matrix needs at least one individual");
    detail::require(outcomes_.size() == individuals_ * static_cast<std::size_t>(t_),
                    "trial matrix size is not N * t");
    for (std::uint8_t v : outcomes_) detail::require(v <= 1, "trial outcome must be 0 or 1");
  }

  int t() const { return t_; }
  std::size_t size() const { return individuals_; }
  bool operator()(std::size_t i, int k) const { return outcomes_[i * t_ + k] != 0; }
  std::span<const std::uint8_t> row(std::size_t i) const {
    return std::span<const std::uint8_t>(outcomes_).subspan(i * t_, static_cast<std::size_t>(t_));
  }

  /// Successes among trials [first, last) of individual i.
  int successes(std::size_t i, int first, int last) const {
    int s = 0;
    for (int k = first; k < last; ++k) s += outcomes_[i * t_ + k];
    return s;
  }

  ObservationSet counts() const {
    std::vector<int> x(individuals_);
    for (std::size_t i = 0; i < individuals_; ++i) x[i] = successes(i, 0, t_);
    return ObservationSet(t_, std::move(x));
  }

 private:
  int t_;
  std::size_t individuals_;
  std::vector<std::uint8_t> outcomes_;
};

/// Fractions h_0..h_t of individuals showing s successes.
class Fingerprint {
 public:
  Fingerprint(int t, std::vector<double> fractions, std::size_t total_count = 0)
      : t_(t), fractions_(std::move(fractions)), total_count_(total_count) {
    detail::require(t_ >= 1, "fingerprint needs t >= 1");
    detail::require(fractions_.size() == static_cast<std::size_t>(t_) + 1,
                    "fingerprint needs t+1 fractions");
    double sum = 0.0;
    for (double h : fractions_) {
      detail::require(h >= -1e-15 && h <= 1.0 + 1e-12, "fingerprint fraction outside [0,1]");
      sum += h;
    }
    detail::require(std::abs(sum - 1.0) <= kFingerprintSumTolerance, "fingerprint does not sum to 1");
  }

  int t() const { return t_; }
  /// N when built from observations, 0 for model fingerprints.
  std::size_t total_count() const { return total_count_; }
  std::span<const double> fractions() const { return fractions_; }
  double operator[](std::size_t s) const { return fractions_[s]; }

 private:
  int t_;
  std::vector<double> fractions_;
  std::size_t total_count_;
};

struct Atom {
  double location;
  double mass;
};

namespace detail {

// Sort, merge atoms closer than kAtomMergeDistance and drop zero masses.
inline std::vector<Atom> canonical_atoms(std::vector<Atom> atoms) {
  for (const Atom& a : atoms) {
    require(std::isfinite(a.location) && std::isfinite(a.mass), "atom is not finite");
    require(a.location >= -kAtomMergeDistance && a.location <= 1.0 + kAtomMergeDistance,
            "atom location outside [0,1]");
    require(a.mass >= 0.0, "atom mass is negative");
  }
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const Atom& a, const Atom& b) { return a.location < b.location; });
  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (Atom a : atoms) {
    if (a.mass <= 0.0) continue;
    a.location = std::clamp(a.location, 0.0, 1.0);
    if (!merged.empty() && a.location - merged.back().location < kAtomMergeDistance) {
      merged.back().mass += a.mass;
    } else {
      merged.push_back(a);
    }
  }
  return merged;
}

}  // namespace detail

class AtomicDistribution;

/// Finite positive measure on [0,1] with arbitrary total mass.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(std::vector<Atom> atoms) : atoms_(detail::canonical_atoms(std::move(atoms))) {}

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_mass() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.mass;
    return m;
  }

  AtomicMeasure scaled(double factor) const {
    std::vector<Atom> out(atoms_.begin(), atoms_.end());
    for (Atom& a : out) a.mass *= factor;
    return AtomicMeasure(std::move(out));
  }

  AtomicDistribution normalized() const;

 private:
  std::vector<Atom> atoms_;
};

/// Probability distribution on [0,1] given by finitely many atoms.
/// Locations are strictly increasing and every retained mass is positive.
class AtomicDistribution {
 public:
  explicit AtomicDistribution(std::vector<Atom> atoms) : atoms_(detail::canonical_atoms(std::move(atoms))) {
    detail::require(!atoms_.empty(), "distribution has no atoms");
    double sum = 0.0;
    for (const Atom& a : atoms_) sum += a.mass;
    detail::require(std::abs(sum - 1.0) <= kDistributionMassTolerance, "distribution masses do not sum to 1");
  }

  static AtomicDistribution delta(double location) { return AtomicDistribution({{location, 1.0}}); }

  /// Rescales nonnegative weights to unit mass.
  static AtomicDistribution normalize(std::vector<Atom> atoms) {
    double sum = 0.0;
    for (const Atom& a : atoms) sum += a.mass;
    detail::require(sum > 0.0 && std::isfinite(sum), "cannot normalize a zero measure");
    for (Atom& a : atoms) a.mass /= sum;
    return AtomicDistribution(std::move(atoms));
  }

  /// Distribution on nodes x_j with the given weights (normalized).
  static AtomicDistribution on_grid(std::span<const double> nodes, std::span<const double> weights) {
    detail::require(nodes.size() == weights.size(), "grid and weight sizes differ");
    std::vector<Atom> atoms;
    atoms.reserve(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) atoms.push_back({nodes[j], std::max(0.0, weights[j])});
    return normalize(std::move(atoms));
  }

  /// Mixture sum_i w_i D_i of distributions.
  static AtomicDistribution mixture(std::span<const std::pair<double, const AtomicDistribution*>> parts) {
    std::vector<Atom> atoms;
    for (const auto& [w, d] : parts) {
      for (const Atom& a : d->atoms()) atoms.push_back({a.location, w * a.mass});
    }
    return normalize(std::move(atoms));
  }

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

  double mean() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.mass * a.location;
    return m;
  }

  double cdf(double x) const {
    double c = 0.0;
    for (const Atom& a : atoms_) {
      if (a.location > x) break;
      c += a.mass;
    }
    return c;
  }

  AtomicMeasure as_measure() const { return AtomicMeasure(std::vector<Atom>(atoms_.begin(), atoms_.end())); }

 private:
  std::vector<Atom> atoms_;
};

inline AtomicDistribution AtomicMeasure::normalized() const {
  return AtomicDistribution::normalize(std::vector<Atom>(atoms_.begin(), atoms_.end()));
}

/// Uniform grid x_j = lo + (hi - lo) j / m, j = 0..m.
inline std::vector<double> uniform_grid(int m, double lo = 0.0, double hi = 1.0) {
  detail::require(m >= 1, "grid needs m >= 1");
  std::vector<double> x(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) x[j] = lo + (hi - lo) * static_cast<double>(j) / m;
  x.back() = hi;
  return x;
}

/// Table of B_s^t(x_j) on the uniform grid x_j = j/m; column j is the Binomial(t, x_j) pmf.
class BernsteinMatrix {
 public:
  BernsteinMatrix(int t, int m) : t_(t), grid_(uniform_grid(m)) {
    detail::require(t >= 1, "Bernstein matrix needs t >= 1");
    entries_.resize(t + 1, m + 1);
    for (int j = 0; j <= m; ++j) {
      for (int s = 0; s <= t; ++s) entries_(s, j) = bernstein(t, s, grid_[j]);
    }
  }

  int t() const { return t_; }
  int m() const { return static_cast<int>(grid_.size()) - 1; }
  std::span<const double> grid() const { return grid_; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int s, int j) const { return entries_(s, j); }

  /// Expected fingerprint of grid weights q (sum to 1).
  Eigen::VectorXd apply(const Eigen::VectorXd& q) const { return entries_ * q; }

 private:
  int t_;
  std::vector<double> grid_;
  Eigen::MatrixXd entries_;
};

inline BernsteinMatrix bernstein_matrix(int t, int m) {
  detail::require(t >= 1 && m >= 1, "bernstein_matrix needs t >= 1 and m >= 1");
  return BernsteinMatrix(t, m);
}

inline Fingerprint fingerprint_of(const ObservationSet& obs) {
  std::vector<std::size_t> n(static_cast<std::size_t>(obs.t()) + 1, 0);
  for (int x : obs.counts()) ++n[x];
  const double total = static_cast<double>(obs.size());
  std::vector<double> h(n.size());
  for (std::size_t s = 0; s < n.size(); ++s) h[s] = static_cast<double>(n[s]) / total;
  return Fingerprint(obs.t(), std::move(h), obs.size());
}

/// Histogram n_s of success counts.
inline std::vector<std::size_t> fingerprint_counts(const ObservationSet& obs) {
  std::vector<std::size_t> n(static_cast<std::size_t>(obs.t()) + 1, 0);
  for (int x : obs.counts()) ++n[x];
  return n;
}

/// E_Q[h_s] = sum over atoms of mass * B_s^t(location).
inline Fingerprint expected_fingerprint(const AtomicDistribution& q, int t) {
  detail::require(t >= 1, "expected_fingerprint needs t >= 1");
  std::vector<double> h(static_cast<std::size_t>(t) + 1, 0.0);
  for (const Atom& a : q.atoms()) {
    for (int s = 0; s <= t; ++s) h[s] += a.mass * bernstein(t, s, a.location);
  }
  return Fingerprint(t, std::move(h));
}

}  // namespace popdist
