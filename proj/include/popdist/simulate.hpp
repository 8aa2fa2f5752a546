#pragma once

// Synthetic populations, Bernoulli trial matrices and the replication harness
// behind the EMD-versus-N and EMD-versus-t experiments.
//
// Random streams: every draw comes from a std::mt19937_64 whose 64-bit seed is
// produced by std::seed_seq over (seed, replication, stream kind, individual).
// Individual i therefore owns its own substream in every replication, and
// results do not depend on how replications are spread over threads.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "popdist/core.hpp"
#include "popdist/error.hpp"
#include "popdist/estimators.hpp"
#include "popdist/metrics.hpp"

namespace popdist {

struct Spike {
  double location = 0.5;
};
/// Equal thirds at 0.25, 0.5 and 0.75.
struct ThreeSpikes {};
/// Normal(mean, variance) conditioned on [0,1].
struct TruncatedGaussian {
  double mean = 0.5;
  double variance = 0.1;
};
struct Uniform {};
struct Custom {
  AtomicDistribution distribution = AtomicDistribution::delta(0.5);
};

using Truth = std::variant<Spike, ThreeSpikes, TruncatedGaussian, Uniform, Custom>;

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " '" + s + "' as a number");
  }
  if (used != s.size() || !std::isfinite(v)) throw InputError("cannot parse " + what + " '" + s + "' as a number");
  return v;
}

}  // namespace detail

/// Accepts spike:<c>, three_spikes, truncated_gaussian[:<mean>:<variance>], uniform.
inline Truth parse_truth(const std::string& text) {
  const auto parts = detail::split(text, ':');
  const std::string& kind = parts[0];
  if (kind == "spike") {
    detail::require(parts.size() == 2, "spike truth needs a location, e.g. spike:0.5");
    const double c = detail::parse_double(parts[1], "spike location");
    detail::require(c >= 0.0 && c <= 1.0, "spike location must lie in [0,1]");
    return Spike{c};
  }
  if (kind == "three_spikes" && parts.size() == 1) return ThreeSpikes{};
  if (kind == "uniform" && parts.size() == 1) return Uniform{};
  if (kind == "truncated_gaussian") {
    if (parts.size() == 1) return TruncatedGaussian{};
    detail::require(parts.size() == 3, "truncated_gaussian takes mean and variance, e.g. truncated_gaussian:0.5:0.1");
    TruncatedGaussian g{detail::parse_double(parts[1], "mean"), detail::parse_double(parts[2], "variance")};
    detail::require(g.variance > 0.0, "truncated_gaussian variance must be positive");
    return g;
  }
  throw InputError("unknown truth '" + text +
                   "'; valid: spike:<c>, three_spikes, truncated_gaussian[:<mean>:<var>], uniform");
}

inline std::string truth_name(const Truth& truth) {
  struct Visitor {
    std::string operator()(const Spike& s) const {
      char buf[64];
      std::snprintf(buf, sizeof buf, "spike:%.12g", s.location);
      return buf;
    }
    std::string operator()(const ThreeSpikes&) const { return "three_spikes"; }
    std::string operator()(const TruncatedGaussian& g) const {
      char buf[96];
      std::snprintf(buf, sizeof buf, "truncated_gaussian:%.12g:%.12g", g.mean, g.variance);
      return buf;
    }
    std::string operator()(const Uniform&) const { return "uniform"; }
    std::string operator()(const Custom&) const { return "custom"; }
  };
  return std::visit(Visitor{}, truth);
}

inline constexpr int kInverseCdfPoints = 100000;

namespace detail {

enum class Stream : std::uint32_t { population = 1, trials = 2 };

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t rep, Stream kind, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(kind),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return std::mt19937_64((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
}

// 53 random bits mapped to [0,1).
inline double unit_uniform(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// CDF of the truncated Gaussian on the uniform grid k / points.
inline std::vector<double> truncated_gaussian_cdf(const TruncatedGaussian& g, int points) {
  const double sd = std::sqrt(g.variance);
  const double lo = normal_cdf((0.0 - g.mean) / sd);
  const double hi = normal_cdf((1.0 - g.mean) / sd);
  require(hi - lo > 0.0, "truncated_gaussian puts no mass on [0,1]");
  std::vector<double> cdf(static_cast<std::size_t>(points) + 1);
  for (int k = 0; k <= points; ++k) cdf[k] = (normal_cdf((k / static_cast<double>(points) - g.mean) / sd) - lo) / (hi - lo);
  cdf.front() = 0.0;
  cdf.back() = 1.0;
  return cdf;
}

// Inverse of a tabulated CDF on k / points by bisection plus linear interpolation.
inline double invert_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, cdf.size() - 1);
  const double f0 = cdf[k - 1], f1 = cdf[k];
  const double frac = f1 > f0 ? (u - f0) / (f1 - f0) : 0.0;
  return std::clamp((static_cast<double>(k - 1) + frac) / static_cast<double>(cdf.size() - 1), 0.0, 1.0);
}

}  // namespace detail

/// Biases p_1..p_N drawn independently from the truth.
inline std::vector<double> sample_population(const Truth& truth, std::size_t n, std::uint64_t seed,
                                             std::uint64_t rep = 0) {
  detail::require(n >= 1, "population size must be >= 1");
  std::vector<double> p(n);
  std::vector<double> table;
  std::vector<double> cumulative;
  if (const auto* g = std::get_if<TruncatedGaussian>(&truth)) table = detail::truncated_gaussian_cdf(*g, kInverseCdfPoints);
  if (const auto* c = std::get_if<Custom>(&truth)) {
    double acc = 0.0;
    for (const Atom& a : c->distribution.atoms()) cumulative.push_back(acc += a.mass);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto eng = detail::substream(seed, rep, detail::Stream::population, i);
    const double u = detail::unit_uniform(eng);
    if (const auto* s = std::get_if<Spike>(&truth)) {
      p[i] = s->location;
    } else if (std::holds_alternative<ThreeSpikes>(truth)) {
      p[i] = 0.25 * (1 + std::min(2, static_cast<int>(3.0 * u)));
    } else if (std::holds_alternative<Uniform>(truth)) {
      p[i] = u;
    } else if (std::holds_alternative<TruncatedGaussian>(truth)) {
      p[i] = detail::invert_cdf(table, u);
    } else {
      const auto& atoms = std::get<Custom>(truth).distribution.atoms();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
      p[i] = atoms[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), atoms.size() - 1)].location;
    }
  }
  return p;
}

/// Independent Bernoulli(p_i) outcomes, t per individual.
inline TrialMatrix sample_trials(const std::vector<double>& p, int t, std::uint64_t seed, std::uint64_t rep = 0) {
  detail::require(t >= 1 && !p.empty(), "sample_trials needs t >= 1 and a nonempty population");
  std::vector<std::uint8_t> bits(p.size() * static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    detail::require(p[i] >= 0.0 && p[i] <= 1.0, "bias outside [0,1]");
    auto eng = detail::substream(seed, rep, detail::Stream::trials, i);
    for (int k = 0; k < t; ++k) bits[i * t + k] = detail::unit_uniform(eng) < p[i] ? 1 : 0;
  }
  return TrialMatrix(t, p.size(), std::move(bits));
}

/// Atomic stand-in for the truth when measuring W1. Continuous truths become
/// 10^5 equal-width cells with their exact masses at the cell midpoints, which
/// moves W1 by at most 1/(4 * 10^5).
inline AtomicDistribution truth_reference(const Truth& truth) {
  if (const auto* s = std::get_if<Spike>(&truth)) return AtomicDistribution::delta(s->location);
  if (std::holds_alternative<ThreeSpikes>(truth))
    return AtomicDistribution::normalize({{0.25, 1.0}, {0.5, 1.0}, {0.75, 1.0}});
  if (const auto* c = std::get_if<Custom>(&truth)) return c->distribution;
  const int k = kInverseCdfPoints;
  std::vector<Atom> atoms(static_cast<std::size_t>(k));
  std::vector<double> cdf;
  if (const auto* g = std::get_if<TruncatedGaussian>(&truth)) cdf = detail::truncated_gaussian_cdf(*g, k);
  for (int i = 0; i < k; ++i) {
    const double mass = cdf.empty() ? 1.0 : cdf[i + 1] - cdf[i];
    atoms[i] = {(i + 0.5) / k, std::max(0.0, mass)};
  }
  return AtomicDistribution::normalize(std::move(atoms));
}

struct ScenarioSpec {
  std::string scenario_id = "scenario";
  Truth truth = Spike{0.5};
  std::size_t n = 1000;
  int t = 10;
  std::uint64_t seed = 1;
  int replications = 5;
  std::vector<Method> methods{Method::mle, Method::empirical};
  int grid_size = 1000;
  /// Moment count for global moment matching; 0 means t.
  int moments = 0;
  LmmConfig lmm;
  /// Worker threads across replications; 0 means one per hardware thread.
  int jobs = 1;
};

struct ResultRow {
  std::string scenario_id;
  Method estimator = Method::mle;
  std::size_t n = 0;
  int t = 0;
  int rep = 0;
  double w1 = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms = 0.0;
  std::string error;  // empty when the estimator succeeded
};

struct SummaryRow {
  Method estimator = Method::mle;
  int succeeded = 0;
  int failed = 0;
  double mean_w1 = std::numeric_limits<double>::quiet_NaN();
  double stderr_w1 = std::numeric_limits<double>::quiet_NaN();
};

struct ScenarioResult {
  std::vector<ResultRow> rows;  // replication-major, estimators in spec order
  std::vector<SummaryRow> summary;
};

inline EstimateReport run_estimator(Method method, const TrialMatrix& trials, const ScenarioSpec& spec) {
  switch (method) {
    case Method::mle: {
      MleConfig cfg;
      cfg.grid_size = spec.grid_size;
      return estimate_mle(trials.counts(), cfg);
    }
    case Method::empirical: return estimate_empirical(trials.counts());
    case Method::moment_matching:
      return estimate_moment_matching(trials.counts(), spec.moments > 0 ? spec.moments : trials.t(), spec.grid_size);
    case Method::local_moment_matching: return estimate_local_moment_matching(trials, spec.lmm);
  }
  throw InputError("unknown method");
}

inline ScenarioResult run_scenario(const ScenarioSpec& spec) {
  detail::require(spec.n >= 1 && spec.t >= 1 && spec.replications >= 1, "scenario needs N >= 1, t >= 1, reps >= 1");
  detail::require(!spec.methods.empty(), "scenario needs at least one estimator");
  const AtomicDistribution reference = truth_reference(spec.truth);
  const std::size_t per_rep = spec.methods.size();
  ScenarioResult result;
  result.rows.resize(per_rep * static_cast<std::size_t>(spec.replications));

  auto run_rep = [&](int rep) {
    const auto p = sample_population(spec.truth, spec.n, spec.seed, static_cast<std::uint64_t>(rep));
    const TrialMatrix trials = sample_trials(p, spec.t, spec.seed, static_cast<std::uint64_t>(rep));
    for (std::size_t e = 0; e < per_rep; ++e) {
      ResultRow& row = result.rows[static_cast<std::size_t>(rep) * per_rep + e];
      row.scenario_id = spec.scenario_id;
      row.estimator = spec.methods[e];
      row.n = spec.n;
      row.t = spec.t;
      row.rep = rep;
      try {
        const EstimateReport r = run_estimator(spec.methods[e], trials, spec);
        row.w1 = wasserstein1(r.distribution, reference);
        row.runtime_ms = r.elapsed.count();
      } catch (const std::exception& ex) {
        row.error = ex.what();
      }
    }
  };

  int workers = spec.jobs > 0 ? spec.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, spec.replications);
  if (workers <= 1) {
    for (int rep = 0; rep < spec.replications; ++rep) run_rep(rep);
  } else {
    std::mutex mu;
    int next = 0;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          int rep;
          {
            std::lock_guard lock(mu);
            if (next >= spec.replications) return;
            rep = next++;
          }
          run_rep(rep);  // each replication writes only its own rows
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t e = 0; e < per_rep; ++e) {
    SummaryRow s;
    s.estimator = spec.methods[e];
    std::vector<double> values;
    for (int rep = 0; rep < spec.replications; ++rep) {
      const ResultRow& row = result.rows[static_cast<std::size_t>(rep) * per_rep + e];
      if (row.error.empty()) values.push_back(row.w1);
    }
    s.succeeded = static_cast<int>(values.size());
    s.failed = spec.replications - s.succeeded;
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean_w1 = sum / values.size();
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean_w1) * (v - s.mean_w1);
      s.stderr_w1 = values.size() > 1 ? std::sqrt(ss / (values.size() - 1) / values.size()) : 0.0;
    }
    result.summary.push_back(s);
  }
  return result;
}

}  // namespace popdist
