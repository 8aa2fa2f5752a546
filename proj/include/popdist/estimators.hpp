#pragma once

// The four mixing-distribution estimators and the moment LP they share.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "popdist/core.hpp"
#include "popdist/error.hpp"
#include "popdist/lp.hpp"
#include "popdist/metrics.hpp"
#include "popdist/nnls.hpp"

namespace popdist {

enum class Method { mle, empirical, moment_matching, local_moment_matching };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::mle: return "mle";
    case Method::empirical: return "empirical";
    case Method::moment_matching: return "moment_matching";
    case Method::local_moment_matching: return "local_moment_matching";
  }
  return "unknown";
}

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"mle", "empirical", "moment_matching", "local_moment_matching"};
  return names;
}

inline Method parse_method(const std::string& name) {
  if (name == "mle") return Method::mle;
  if (name == "empirical") return Method::empirical;
  if (name == "moment_matching" || name == "mm") return Method::moment_matching;
  if (name == "local_moment_matching" || name == "lmm") return Method::local_moment_matching;
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InputError("unknown method '" + name + "'; valid methods: " + valid);
}

struct EstimateReport {
  Method method = Method::empirical;
  AtomicDistribution distribution = AtomicDistribution::delta(0.0);
  int iterations = 0;
  /// KL for the MLE, max moment residual for the LP methods, 0 for the empirical estimator.
  double final_objective = 0.0;
  bool converged = true;
  std::chrono::duration<double, std::milli> elapsed{0.0};
  /// MLE objective after every accepted step, when requested.
  std::vector<double> objective_trace;
};

/// Timing is left out unless asked for so that reports are reproducible byte for byte.
inline nlohmann::json report_to_json(const EstimateReport& r, bool include_timing = false) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const Atom& a : r.distribution.atoms()) atoms.push_back({a.location, a.mass});
  return nlohmann::json{{"method", to_string(r.method)},
                        {"atoms", atoms},
                        {"iterations", r.iterations},
                        {"final_objective", r.final_objective},
                        {"converged", r.converged},
                        {"elapsed_ms", include_timing ? r.elapsed.count() : 0.0}};
}

struct MleConfig {
  int grid_size = 1000;
  int max_iterations = 20000;
  /// Stop once the objective drops by less than this over `window` steps.
  double tolerance = 1e-10;
  int window = 10;
  /// Atoms lighter than max(support_floor, 1e-12) are pruned from the output.
  double support_floor = 0.0;
  /// Starting grid weights (m+1 positive values); uniform when empty.
  std::vector<double> initial_weights;
  /// Follow the EM warm-up with constrained Newton steps.
  bool newton_polish = true;
  /// Stop when max_j grad_j - 1 falls below this (first-order optimality on the simplex).
  double kkt_tolerance = 1e-10;
  bool record_trace = false;
};

enum class MomentNorm { linf, l1 };

struct LmmConfig {
  double c1 = 1.0;
  double c2 = 1.0;
  int grid_size = 200;
  double lp_tolerance = 1e-9;
  MomentNorm norm = MomentNorm::linf;
  /// Forces the number of bins M instead of the sqrt(t / (c2 log N)) rule.
  std::optional<int> bin_count;
};

namespace detail {

inline std::chrono::steady_clock::time_point now() { return std::chrono::steady_clock::now(); }

// KL restricted to the rows with h_s > 0.
inline double kl_active(const Eigen::VectorXd& h, const Eigen::VectorXd& f) {
  double kl = 0.0;
  for (Eigen::Index s = 0; s < h.size(); ++s) {
    if (f(s) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += h(s) * std::log(h(s) / f(s));
  }
  return kl;
}

inline AtomicDistribution grid_output(std::span<const double> grid, const Eigen::VectorXd& q, double floor) {
  const double cut = std::max(floor, 1e-12);
  std::vector<Atom> atoms;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q(j) > cut) atoms.push_back({grid[j], q(j)});
  }
  if (atoms.empty()) {
    Eigen::Index best;
    q.maxCoeff(&best);
    atoms.push_back({grid[best], 1.0});
  }
  return AtomicDistribution::normalize(std::move(atoms));
}

}  // namespace detail

/// Nonparametric MLE on the grid j/m: minimizes KL(h_obs, B q) over the simplex.
///
/// Multiplicative EM steps from a positive start, then (by default) constrained
/// Newton steps: each solves the weighted least-squares model of the objective on
/// the current support plus the local maxima of the gradient, and a backtracking
/// search keeps the objective non-increasing.
inline EstimateReport estimate_mle(const ObservationSet& obs, const MleConfig& cfg = {}) {
  const auto start = detail::now();
  detail::require(cfg.grid_size >= 1, "MLE grid size must be >= 1");
  detail::require(cfg.tolerance > 0.0, "MLE tolerance must be positive");
  detail::require(cfg.max_iterations >= 1 && cfg.window >= 1, "MLE iteration limits must be positive");

  const Fingerprint fp = fingerprint_of(obs);
  const BernsteinMatrix bm(obs.t(), cfg.grid_size);
  const Eigen::Index cols = cfg.grid_size + 1;

  std::vector<int> active;
  for (int s = 0; s <= obs.t(); ++s)
    if (fp[s] > 0.0) active.push_back(s);
  const Eigen::Index rows = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd b(rows, cols);
  Eigen::VectorXd h(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    b.row(r) = bm.entries().row(active[r]);
    h(r) = fp[active[r]];
  }

  Eigen::VectorXd q;
  if (cfg.initial_weights.empty()) {
    q = Eigen::VectorXd::Constant(cols, 1.0 / static_cast<double>(cols));
  } else {
    detail::require(static_cast<Eigen::Index>(cfg.initial_weights.size()) == cols,
                    "initial weights need grid_size + 1 entries");
    q = Eigen::Map<const Eigen::VectorXd>(cfg.initial_weights.data(), cols);
    detail::require(q.minCoeff() > 0.0, "initial weights must be positive");
    q /= q.sum();
  }

  Eigen::VectorXd f = b * q;
  detail::require(f.minCoeff() > 0.0, "initial weights give zero probability to an observed count");
  double kl = detail::kl_active(h, f);

  EstimateReport rep;
  rep.method = Method::mle;
  std::vector<double> history{kl};
  if (cfg.record_trace) rep.objective_trace.push_back(kl);

  auto accept = [&](Eigen::VectorXd q_new, Eigen::VectorXd f_new, double kl_new) {
    q = std::move(q_new);
    f = std::move(f_new);
    kl = kl_new;
    ++rep.iterations;
    history.push_back(kl);
    if (cfg.record_trace) rep.objective_trace.push_back(kl);
  };
  auto stalled = [&](double tol) {
    const std::size_t w = static_cast<std::size_t>(cfg.window);
    return history.size() > w && history[history.size() - 1 - w] - history.back() < tol;
  };
  auto em_step = [&] {
    const Eigen::VectorXd g = b.transpose() * h.cwiseQuotient(f);
    Eigen::VectorXd q_new = q.cwiseProduct(g);
    q_new /= q_new.sum();
    Eigen::VectorXd f_new = b * q_new;
    const double kl_new = detail::kl_active(h, f_new);
    accept(std::move(q_new), std::move(f_new), kl_new);
  };

  // EM warm-up; without polishing this loop is the whole solver.
  const double warm_tol = cfg.newton_polish ? std::max(cfg.tolerance, 1e-7) : cfg.tolerance;
  const int warm_cap = cfg.newton_polish ? std::min(cfg.max_iterations, 2000) : cfg.max_iterations;
  bool done = false;
  while (rep.iterations < warm_cap) {
    em_step();
    if (stalled(warm_tol)) {
      done = !cfg.newton_polish;
      break;
    }
  }
  if (!cfg.newton_polish) rep.converged = done;

  if (cfg.newton_polish) {
    constexpr double kPenalty = 1e3;
    const Eigen::VectorXd sqrt_h = h.cwiseSqrt();
    rep.converged = false;
    while (rep.iterations < cfg.max_iterations) {
      const Eigen::VectorXd g = b.transpose() * h.cwiseQuotient(f);
      if (g.maxCoeff() - 1.0 <= cfg.kkt_tolerance) {
        rep.converged = true;
        break;
      }
      std::vector<Eigen::Index> support;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const bool peak = g(j) > 1.0 && (j == 0 || g(j) >= g(j - 1)) && (j + 1 == cols || g(j) >= g(j + 1));
        if (q(j) > 0.0 || peak) support.push_back(j);
      }
      // model: || diag(sqrt(h)/f) B_S w - 2 sqrt(h) ||^2 with a penalty row for 1'w = 1
      const Eigen::Index k = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd a(rows + 1, k);
      const Eigen::VectorXd weight = sqrt_h.cwiseQuotient(f);
      for (Eigen::Index c = 0; c < k; ++c) {
        a.col(c).head(rows) = weight.cwiseProduct(b.col(support[c]));
        a(rows, c) = kPenalty;
      }
      Eigen::VectorXd rhs(rows + 1);
      rhs.head(rows) = 2.0 * sqrt_h;
      rhs(rows) = kPenalty;
      const Eigen::VectorXd w = nnls::solve(a, rhs).x;

      bool moved = false;
      if (w.sum() > 0.0) {
        Eigen::VectorXd target = Eigen::VectorXd::Zero(cols);
        for (Eigen::Index c = 0; c < k; ++c) target(support[c]) = w(c);
        target /= target.sum();
        const Eigen::VectorXd step = target - q;
        const Eigen::VectorXd f_step = b * step;
        for (double alpha = 1.0; alpha >= 1e-12; alpha *= 0.5) {
          Eigen::VectorXd f_new = f + alpha * f_step;
          const double kl_new = detail::kl_active(h, f_new);
          if (kl_new <= kl) {
            Eigen::VectorXd q_new = (q + alpha * step).cwiseMax(0.0);
            q_new /= q_new.sum();
            accept(std::move(q_new), std::move(f_new), kl_new);
            moved = true;
            break;
          }
        }
      }
      if (!moved) em_step();
      if (stalled(cfg.tolerance)) {
        rep.converged = true;
        break;
      }
    }
  }

  rep.distribution = detail::grid_output(bm.grid(), q, cfg.support_floor);
  rep.final_objective = kl_divergence(fp, expected_fingerprint(rep.distribution, obs.t()));
  rep.elapsed = detail::now() - start;
  return rep;
}

/// Plug-in estimate: mass 1/N at each X_i / t.
inline EstimateReport estimate_empirical(const ObservationSet& obs) {
  const auto start = detail::now();
  const auto n = fingerprint_counts(obs);
  std::vector<Atom> atoms;
  for (int s = 0; s <= obs.t(); ++s) {
    if (n[s] > 0) atoms.push_back({static_cast<double>(s) / obs.t(), static_cast<double>(n[s]) / obs.size()});
  }
  EstimateReport rep;
  rep.method = Method::empirical;
  rep.distribution = AtomicDistribution::normalize(std::move(atoms));
  rep.elapsed = detail::now() - start;
  return rep;
}

/// mu_l = mean over individuals of C(X_i, l) / C(t, l), l = 1..k; unbiased for E[p^l].
inline MomentVector unbiased_moments(const ObservationSet& obs, int k) {
  detail::require(k >= 1 && k <= obs.t(), "moment order must satisfy 1 <= k <= t");
  const auto n = fingerprint_counts(obs);
  MomentVector out{0.0, std::vector<double>(static_cast<std::size_t>(k), 0.0)};
  for (int l = 1; l <= k; ++l) {
    double sum = 0.0;
    for (int s = l; s <= obs.t(); ++s) sum += static_cast<double>(n[s]) * binomial_ratio(s, l, obs.t());
    out.values[l - 1] = sum / static_cast<double>(obs.size());
  }
  return out;
}

struct MomentLpResult {
  AtomicMeasure measure;
  /// max_k |moment_k(measure) - target_k| in the target's units.
  double residual = 0.0;
  int iterations = 0;
};

/// Measure of total `mass` on the uniform grid over [lo, hi] whose moments about
/// target.shift best match the target (L-infinity by default).
///
/// The LP is posed in u = (x - shift) / (hi - lo) with targets scaled to unit
/// mass, so coefficients stay of order one. Optima are generally not unique; the
/// returned vertex is a deterministic function of the input.
inline MomentLpResult solve_moment_lp(double lo, double hi, int grid_size, const MomentVector& target, double mass,
                                      MomentNorm norm = MomentNorm::linf, const lp::Options& opt = {}) {
  detail::require(hi > lo, "moment LP needs a nonempty interval");
  detail::require(mass > 0.0, "moment LP needs positive mass");
  detail::require(grid_size >= 1, "moment LP needs grid_size >= 1");
  detail::require(target.order() >= 1, "moment LP needs at least one moment");

  const std::vector<double> x = uniform_grid(grid_size, lo, hi);
  const int n = grid_size + 1;
  const int k = target.order();
  const double width = hi - lo;

  // columns: q (n) | r+ (k) | r- (k) | [eps | slack (k)]
  const bool linf = norm == MomentNorm::linf;
  const int cols = n + 2 * k + (linf ? 1 + k : 0);
  const int rows = k + 1 + (linf ? k : 0);
  lp::Problem p;
  p.A = Eigen::MatrixXd::Zero(rows, cols);
  p.b = Eigen::VectorXd::Zero(rows);
  p.c = Eigen::VectorXd::Zero(cols);

  for (int j = 0; j < n; ++j) {
    const double u = (x[j] - target.shift) / width;
    double power = 1.0;
    for (int r = 0; r < k; ++r) {
      power *= u;
      p.A(r, j) = power;
    }
    p.A(k, j) = 1.0;
  }
  double scale = 1.0;
  for (int r = 0; r < k; ++r) {
    scale *= width;
    p.b(r) = target.values[r] / (mass * scale);
    p.A(r, n + r) = -1.0;
    p.A(r, n + k + r) = 1.0;
  }
  p.b(k) = 1.0;
  if (linf) {
    const int eps = n + 2 * k;
    for (int r = 0; r < k; ++r) {
      p.A(k + 1 + r, n + r) = 1.0;
      p.A(k + 1 + r, n + k + r) = 1.0;
      p.A(k + 1 + r, eps) = -1.0;
      p.A(k + 1 + r, eps + 1 + r) = 1.0;
    }
    p.c(eps) = 1.0;
  } else {
    for (int r = 0; r < 2 * k; ++r) p.c(n + r) = 1.0;
  }

  const lp::Solution sol = lp::solve(p, opt);
  if (sol.status != lp::Status::optimal) {
    throw ConvergenceError("moment LP ended with status " + lp::to_string(sol.status));
  }
  std::vector<Atom> atoms;
  for (int j = 0; j < n; ++j) {
    if (sol.x(j) > 0.0) atoms.push_back({x[j], mass * sol.x(j)});
  }
  MomentLpResult out;
  out.measure = AtomicMeasure(std::move(atoms));
  out.iterations = sol.iterations;
  const MomentVector got = moments(out.measure, k, target.shift);
  for (int r = 0; r < k; ++r) out.residual = std::max(out.residual, std::abs(got.values[r] - target.values[r]));
  return out;
}

/// Global moment matching on the first k unbiased moments over the grid j/m.
inline EstimateReport estimate_moment_matching(const ObservationSet& obs, int k, int grid_size = 1000,
                                               MomentNorm norm = MomentNorm::linf, const lp::Options& opt = {}) {
  const auto start = detail::now();
  detail::require(k >= 1, "moment matching needs k >= 1");
  detail::require(k <= obs.t(), "moment matching needs k <= t: higher moments have no unbiased estimate");
  const MomentLpResult fit = solve_moment_lp(0.0, 1.0, grid_size, unbiased_moments(obs, k), 1.0, norm, opt);
  EstimateReport rep;
  rep.method = Method::moment_matching;
  rep.distribution = fit.measure.normalized();
  rep.iterations = fit.iterations;
  rep.final_objective = fit.residual;
  rep.elapsed = detail::now() - start;
  return rep;
}

/// Bin layout used by local moment matching.
struct LmmPlan {
  double log_n = 1.0;
  int bins = 1;
  int moments = 1;
  int first_batch = 0;   // trials forming X'
  int second_batch = 0;  // trials forming X
  std::vector<double> left, right;
  std::vector<double> wide_left, wide_right;
};

inline LmmPlan lmm_plan(int t, std::size_t n, const LmmConfig& cfg) {
  detail::require(cfg.c1 > 0.0 && cfg.c2 > 0.0, "local moment matching needs c1, c2 > 0");
  detail::require(t >= 4, "local moment matching needs t >= 4");
  detail::require(n >= 1, "local moment matching needs at least one individual");
  LmmPlan plan;
  plan.log_n = std::max(1.0, std::log(static_cast<double>(n)));
  plan.first_batch = t / 2;
  plan.second_batch = t - plan.first_batch;
  if (cfg.bin_count) {
    detail::require(*cfg.bin_count >= 1, "bin count must be >= 1");
    plan.bins = *cfg.bin_count;
  } else {
    plan.bins = std::max(1, static_cast<int>(std::floor(std::sqrt(t / (cfg.c2 * plan.log_n)))));
  }
  plan.moments = std::min(static_cast<int>(std::ceil(cfg.c2 * plan.log_n)), plan.first_batch);
  const double unit = cfg.c1 * plan.log_n / t;
  for (int j = 1; j <= plan.bins; ++j) {
    const bool last = j == plan.bins;
    plan.left.push_back(std::min(1.0, (j - 1.0) * (j - 1.0) * unit));
    plan.right.push_back(last ? 1.0 : std::min(1.0, static_cast<double>(j) * j * unit));
    const double wl = std::max(0.0, j - 1.5);
    plan.wide_left.push_back(std::min(1.0, wl * wl * unit));
    plan.wide_right.push_back(last ? 1.0 : std::min(1.0, (j + 1.0) * (j + 1.0) * unit));
  }
  return plan;
}

inline EstimateReport estimate_local_moment_matching(const TrialMatrix& trials, const LmmConfig& cfg = {}) {
  const auto start = detail::now();
  const int t = trials.t();
  const std::size_t n = trials.size();
  const LmmPlan plan = lmm_plan(t, n, cfg);
  lp::Options opt;
  opt.tolerance = cfg.lp_tolerance;

  // bin index of each individual from the first batch
  std::vector<std::vector<int>> members(static_cast<std::size_t>(plan.bins));
  for (std::size_t i = 0; i < n; ++i) {
    const double est = static_cast<double>(trials.successes(i, 0, plan.first_batch)) / plan.first_batch;
    int bin = plan.bins - 1;
    for (int j = 0; j < plan.bins; ++j) {
      if (est >= plan.left[j] && est < plan.right[j]) {
        bin = j;
        break;
      }
    }
    members[bin].push_back(trials.successes(i, plan.first_batch, t));
  }

  EstimateReport rep;
  rep.method = Method::local_moment_matching;
  std::vector<Atom> atoms;
  const int k = plan.moments;
  const int tb = plan.second_batch;
  for (int j = 0; j < plan.bins; ++j) {
    if (members[j].empty()) continue;
    const double shift = plan.left[j];
    // shifted moments: sum_i sum_l C(k,l) (-shift)^(k-l) C(X_i,l)/C(tb,l), divided by N
    MomentVector target{shift, std::vector<double>(static_cast<std::size_t>(k), 0.0)};
    for (int x : members[j]) {
      for (int order = 1; order <= k; ++order) {
        double sum = 0.0;
        for (int l = 0; l <= order; ++l) {
          const double neg_shift_power = order == l ? 1.0 : std::pow(-shift, order - l);
          sum += binomial(order, l) * neg_shift_power * binomial_ratio(x, l, tb);
        }
        target.values[order - 1] += sum;
      }
    }
    for (double& v : target.values) v /= static_cast<double>(n);
    const double mass = static_cast<double>(members[j].size()) / static_cast<double>(n);
    const MomentLpResult fit =
        solve_moment_lp(plan.wide_left[j], plan.wide_right[j], cfg.grid_size, target, mass, cfg.norm, opt);
    for (const Atom& a : fit.measure.atoms()) atoms.push_back(a);
    rep.iterations += fit.iterations;
    rep.final_objective = std::max(rep.final_objective, fit.residual);
  }
  rep.distribution = AtomicDistribution::normalize(std::move(atoms));
  rep.elapsed = detail::now() - start;
  return rep;
}

/// Counts alone cannot be split into two batches.
inline EstimateReport estimate_local_moment_matching(const ObservationSet&, const LmmConfig& = {}) {
  throw InputError("raw trials required: local moment matching splits each individual's trials into two batches");
}

}  // namespace popdist
