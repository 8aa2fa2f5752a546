#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "popdist/estimators.hpp"
#include "popdist/metrics.hpp"

using namespace popdist;

namespace {

ObservationSet spike_counts(std::size_t n, int t, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> counts(n);
  for (int& x : counts) x = oracle::binomial_draw(rng, t, p);
  return ObservationSet(t, counts);
}

TrialMatrix spike_trials(std::size_t n, int t, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> bits(n * t);
  for (auto& b : bits) b = u(rng) < p ? 1 : 0;
  return TrialMatrix(t, n, std::move(bits));
}

// E|Binomial(t, 1/2)/t - 1/2| in exact arithmetic.
double binomial_mad(int t) {
  oracle::cpp_rational s = 0;
  for (int k = 0; k <= t; ++k) {
    oracle::cpp_rational d(2 * k - t, 2 * t);
    if (d < 0) d = -d;
    s += d * oracle::binomial(t, k);
  }
  return (s / oracle::cpp_rational(oracle::cpp_int(1) << t)).convert_to<double>();
}

}  // namespace

TEST(Methods, ParseNamesAndAliases) {
  EXPECT_EQ(parse_method("mle"), Method::mle);
  EXPECT_EQ(parse_method("mm"), Method::moment_matching);
  EXPECT_EQ(parse_method("lmm"), Method::local_moment_matching);
  try {
    parse_method("bogus");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("local_moment_matching"), std::string::npos);
  }
}

TEST(Mle, RealizableFingerprintRecoversSpike) {
  MleConfig cfg;
  cfg.grid_size = 2;
  const auto r = estimate_mle(ObservationSet(2, {0, 1, 1, 2}), cfg);
  EXPECT_LE(r.final_objective, 1e-10);
  EXPECT_LE(wasserstein1(r.distribution, AtomicDistribution::delta(0.5)), 1e-6);
  EXPECT_TRUE(r.converged);
}

TEST(Mle, AllSuccessesGiveSpikeAtOne) {
  const auto r = estimate_mle(ObservationSet(5, std::vector<int>(100, 5)));
  EXPECT_LE(wasserstein1(r.distribution, AtomicDistribution::delta(1.0)), 1e-6);
}

TEST(Mle, BeatsEmpiricalOnSpike) {
  const ObservationSet obs = spike_counts(100000, 10, 0.5, 11);
  const auto mle = estimate_mle(obs);
  const auto emp = estimate_empirical(obs);
  const auto truth = AtomicDistribution::delta(0.5);
  EXPECT_LT(wasserstein1(mle.distribution, truth), wasserstein1(emp.distribution, truth));
}

TEST(Mle, ObjectiveTraceIsMonotone) {
  MleConfig cfg;
  cfg.grid_size = 100;
  cfg.record_trace = true;
  const auto r = estimate_mle(spike_counts(500, 8, 0.3, 2), cfg);
  ASSERT_GE(r.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-12) << "step " << i;
  }
  EXPECT_GE(r.final_objective, 0.0);
}

TEST(Mle, NewtonPolishNoWorseThanLongEm) {
  const ObservationSet obs = spike_counts(800, 9, 0.35, 5);
  MleConfig em;
  em.grid_size = 100;
  em.newton_polish = false;
  em.max_iterations = 200000;
  em.tolerance = 1e-14;
  MleConfig cnm;
  cnm.grid_size = 100;
  const auto a = estimate_mle(obs, em), b = estimate_mle(obs, cnm);
  EXPECT_LE(b.final_objective, a.final_objective + 1e-9);
}

TEST(Mle, RejectsBadConfiguration) {
  const ObservationSet obs(2, {0, 1});
  MleConfig cfg;
  cfg.grid_size = 0;
  EXPECT_THROW(estimate_mle(obs, cfg), InputError);
  cfg.grid_size = 4;
  cfg.initial_weights = {1.0, 1.0};
  EXPECT_THROW(estimate_mle(obs, cfg), InputError);
}

TEST(Empirical, ToyAndSpikeExamples) {
  const auto r = estimate_empirical(ObservationSet(2, {0, 1, 1, 2}));
  ASSERT_EQ(r.distribution.size(), 3u);
  EXPECT_DOUBLE_EQ(r.distribution.atoms()[0].mass, 0.25);
  EXPECT_DOUBLE_EQ(r.distribution.atoms()[1].location, 0.5);
  EXPECT_DOUBLE_EQ(r.distribution.atoms()[1].mass, 0.5);
  const auto s = estimate_empirical(ObservationSet(4, {2, 2}));
  EXPECT_EQ(wasserstein1(s.distribution, AtomicDistribution::delta(0.5)), 0.0);
}

TEST(Empirical, SpikeErrorMatchesMeanAbsoluteDeviation) {
  const double mad = binomial_mad(10);
  EXPECT_NEAR(mad, 126.0 / 1024.0, 1e-15);
  const auto r = estimate_empirical(spike_counts(10000, 10, 0.5, 3));
  const double w1 = wasserstein1(r.distribution, AtomicDistribution::delta(0.5));
  EXPECT_NEAR(w1, 0.121, 0.2 * 0.121);
  EXPECT_NEAR(w1, mad, 0.01);
}

TEST(UnbiasedMoments, ExactOnBinomialProportions) {
  // 16 individuals in proportions 1:4:6:4:1 are exactly Binomial(4, 1/2)
  std::vector<int> counts;
  const int reps[] = {1, 4, 6, 4, 1};
  for (int s = 0; s <= 4; ++s) counts.insert(counts.end(), reps[s], s);
  const MomentVector m = unbiased_moments(ObservationSet(4, counts), 4);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(m[k], std::pow(0.5, k), 1e-15);
  EXPECT_THROW(unbiased_moments(ObservationSet(4, counts), 5), InputError);
}

TEST(MomentLp, PointMassTargetOnGrid) {
  const MomentVector target = moments(AtomicDistribution::delta(0.3), 5);
  const auto r = solve_moment_lp(0.0, 1.0, 10, target, 1.0);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(MomentLp, MeanOnlyTarget) {
  const MomentVector target{0.0, {0.5}};
  EXPECT_LE(solve_moment_lp(0.0, 1.0, 20, target, 1.0).residual, 1e-14);
  EXPECT_LE(solve_moment_lp(0.0, 1.0, 20, target, 1.0, MomentNorm::l1).residual, 1e-14);
}

TEST(MomentLp, UniformMomentsOnFineGrid) {
  MomentVector target{0.0, {}};
  for (int k = 1; k <= 5; ++k) target.values.push_back(1.0 / (k + 1));
  const auto r = solve_moment_lp(0.0, 1.0, 100, target, 1.0);
  EXPECT_LE(r.residual, 1e-6);
  const auto grid = uniform_grid(10000);
  const auto uniform = AtomicDistribution::on_grid(grid, std::vector<double>(grid.size(), 1.0));
  EXPECT_LE(wasserstein1(r.measure.normalized(), uniform), 0.1);
}

TEST(MomentLp, ScaledMassAndShift) {
  // measure of mass 0.25 on [0.4, 0.6] with moments about 0.4 of 0.25 * delta(0.5)
  const MomentVector target = moments(AtomicMeasure({{0.5, 0.25}}), 4, 0.4);
  const auto r = solve_moment_lp(0.4, 0.6, 20, target, 0.25);
  EXPECT_NEAR(r.measure.total_mass(), 0.25, 1e-12);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(MomentMatching, PointMassFromExactProportions) {
  std::vector<int> counts;
  const int reps[] = {1, 4, 6, 4, 1};
  for (int s = 0; s <= 4; ++s) counts.insert(counts.end(), reps[s], s);
  const auto r = estimate_moment_matching(ObservationSet(4, counts), 4);
  EXPECT_LE(r.final_objective, 1e-8);
  EXPECT_LE(wasserstein1(r.distribution, AtomicDistribution::delta(0.5)), 1.0 / 8.0 + 1e-3);
}

TEST(MomentMatching, OneMomentFeasibility) {
  const auto r = estimate_moment_matching(ObservationSet(1, {1, 1, 0, 0}), 1, 50);
  EXPECT_LE(r.final_objective, 1e-14);
  EXPECT_NEAR(r.distribution.mean(), 0.5, 1e-12);
  EXPECT_THROW(estimate_moment_matching(ObservationSet(1, {1, 0}), 2), InputError);
}

TEST(MomentMatching, ThreeSpikesRecorded) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<int> counts(100000);
  for (int& x : counts) x = oracle::binomial_draw(rng, 8, 0.25 * (1 + pick(rng)));
  const auto r = estimate_moment_matching(ObservationSet(8, counts), 8, 200);
  const auto truth = AtomicDistribution::normalize({{0.25, 1}, {0.5, 1}, {0.75, 1}});
  const double w1 = wasserstein1(r.distribution, truth);
  EXPECT_LE(w1, 0.08);
  // frozen from the reference run
  EXPECT_NEAR(w1, 0.023954, 0.2 * 0.023954);
}

TEST(LocalMomentMatching, SpikeAtHalf) {
  const auto r = estimate_local_moment_matching(spike_trials(10000, 100, 0.5, 4));
  EXPECT_LE(wasserstein1(r.distribution, AtomicDistribution::delta(0.5)), 0.05);
}

TEST(LocalMomentMatching, CountsOnlyInputIsRejected) {
  try {
    estimate_local_moment_matching(ObservationSet(4, {1, 2}));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("raw trials required"), std::string::npos);
  }
}

TEST(LocalMomentMatching, PlanShape) {
  const LmmPlan one = lmm_plan(10, 1, {});
  EXPECT_EQ(one.log_n, 1.0);
  EXPECT_GE(one.bins, 1);
  const LmmPlan p = lmm_plan(100, 10000, {});
  EXPECT_EQ(p.bins, static_cast<int>(std::sqrt(100 / std::log(10000.0))));
  EXPECT_EQ(p.moments, static_cast<int>(std::ceil(std::log(10000.0))));
  EXPECT_EQ(p.first_batch, 50);
  EXPECT_EQ(p.right.back(), 1.0);
  EXPECT_EQ(p.wide_right.back(), 1.0);
  for (int j = 0; j < p.bins; ++j) {
    EXPECT_LE(p.wide_left[j], p.left[j]);
    EXPECT_GE(p.wide_right[j], p.right[j]);
    if (j > 0) {
      EXPECT_EQ(p.left[j], p.right[j - 1]);
    }
  }
}

TEST(LocalMomentMatching, SingleBinEqualsGlobalMatchingOnSecondBatch) {
  const TrialMatrix trials = spike_trials(300, 4, 0.4, 9);
  LmmConfig cfg;
  cfg.bin_count = 1;
  const auto local = estimate_local_moment_matching(trials, cfg);
  std::vector<int> second(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) second[i] = trials.successes(i, 2, 4);
  const int k = std::min(static_cast<int>(std::ceil(std::log(300.0))), 2);
  const auto global = estimate_moment_matching(ObservationSet(2, second), k, cfg.grid_size);
  const MomentVector a = moments(local.distribution, k), b = moments(global.distribution, k);
  for (int l = 1; l <= k; ++l) EXPECT_NEAR(a[l], b[l], 1e-9);
  EXPECT_NEAR(local.final_objective, global.final_objective, 1e-9);
}

TEST(Report, JsonOmitsTimingByDefault) {
  auto r = estimate_empirical(ObservationSet(2, {0, 2}));
  r.elapsed = std::chrono::duration<double, std::milli>(12.5);
  EXPECT_EQ(report_to_json(r).at("elapsed_ms"), 0.0);
  EXPECT_EQ(report_to_json(r, true).at("elapsed_ms"), 12.5);
  EXPECT_EQ(report_to_json(r).at("atoms").size(), 2u);
}
