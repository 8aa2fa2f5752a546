#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <random>

#include "oracles.hpp"
#include "popdist/simulate.hpp"

using namespace popdist;

TEST(Truth, ParsesAllKinds) {
  EXPECT_DOUBLE_EQ(std::get<Spike>(parse_truth("spike:0.25")).location, 0.25);
  EXPECT_TRUE(std::holds_alternative<ThreeSpikes>(parse_truth("three_spikes")));
  EXPECT_TRUE(std::holds_alternative<Uniform>(parse_truth("uniform")));
  const auto g = std::get<TruncatedGaussian>(parse_truth("truncated_gaussian:0.4:0.05"));
  EXPECT_DOUBLE_EQ(g.mean, 0.4);
  EXPECT_DOUBLE_EQ(g.variance, 0.05);
  EXPECT_THROW(parse_truth("spike"), InputError);
  EXPECT_THROW(parse_truth("spike:2"), InputError);
  EXPECT_THROW(parse_truth("gamma"), InputError);
  EXPECT_EQ(truth_name(parse_truth("spike:0.5")), "spike:0.5");
}

TEST(Population, SpikeIsConstant) {
  EXPECT_EQ(sample_population(Spike{0.5}, 3, 1), (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(Population, ThreeSpikesShares) {
  const auto p = sample_population(ThreeSpikes{}, 30000, 2);
  int c[3] = {0, 0, 0};
  for (double x : p) {
    ASSERT_TRUE(x == 0.25 || x == 0.5 || x == 0.75);
    ++c[static_cast<int>(std::lround(x * 4)) - 1];
  }
  for (int k : c) EXPECT_NEAR(k / 30000.0, 1.0 / 3.0, 0.01);
}

TEST(Population, UniformMean) {
  const auto p = sample_population(Uniform{}, 100000, 3);
  double s = 0.0;
  for (double x : p) s += x;
  EXPECT_NEAR(s / p.size(), 0.5, 0.005);
}

TEST(Population, TruncatedGaussianMoments) {
  // mean of N(0.3, 0.1) truncated to [0,1] from the closed form
  const double mu = 0.3, sd = std::sqrt(0.1);
  auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); };
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double a = (0 - mu) / sd, b = (1 - mu) / sd;
  const double exact = mu + sd * (phi(a) - phi(b)) / (cdf(b) - cdf(a));
  const auto p = sample_population(TruncatedGaussian{mu, 0.1}, 100000, 4);
  double s = 0.0;
  for (double x : p) {
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
    s += x;
  }
  EXPECT_NEAR(s / p.size(), exact, 0.005);
}

TEST(Population, CustomTruthFollowsAtoms) {
  const auto p = sample_population(Custom{AtomicDistribution({{0.1, 0.2}, {0.9, 0.8}})}, 20000, 5);
  int high = 0;
  for (double x : p) high += x == 0.9;
  EXPECT_NEAR(high / 20000.0, 0.8, 0.015);
}

TEST(Population, DependsOnSeedAndReplicationOnly) {
  const auto a = sample_population(Uniform{}, 50, 9, 2), b = sample_population(Uniform{}, 50, 9, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_population(Uniform{}, 50, 9, 3));
  EXPECT_NE(a, sample_population(Uniform{}, 50, 10, 2));
  // a prefix of a larger population is the smaller population
  const auto big = sample_population(Uniform{}, 80, 9, 2);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), big.begin()));
}

TEST(Trials, Endpoints) {
  const auto zero = sample_trials({0.0}, 7, 1);
  EXPECT_EQ(zero.successes(0, 0, 7), 0);
  const auto one = sample_trials({1.0}, 5, 1);
  EXPECT_EQ(one.successes(0, 0, 5), 5);
  EXPECT_THROW(sample_trials({1.5}, 5, 1), InputError);
}

TEST(Trials, MeanRowSum) {
  const auto m = sample_trials(std::vector<double>(10000, 0.5), 10, 8);
  const ObservationSet obs = m.counts();
  double s = 0.0;
  for (int x : obs.counts()) s += x;
  EXPECT_NEAR(s / 10000.0, 5.0, 0.1);
}

TEST(Trials, RowSumsAreBinomial) {
  const int t = 6;
  const auto m = sample_trials(std::vector<double>(10000, 0.3), t, 12);
  const ObservationSet obs = m.counts();
  std::vector<double> observed(t + 1, 0.0);
  for (int x : obs.counts()) observed[x] += 1.0;
  double chi2 = 0.0;
  for (int s = 0; s <= t; ++s) {
    const double pmf = oracle::binomial(t, s).convert_to<double>() * std::pow(0.3, s) * std::pow(0.7, t - s);
    const double expected = 10000.0 * pmf;
    chi2 += (observed[s] - expected) * (observed[s] - expected) / expected;
  }
  const double p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(t), chi2));
  EXPECT_GT(p_value, 0.001);
}

TEST(Reference, ContinuousTruthsAreFineGrids) {
  const auto u = truth_reference(Uniform{});
  EXPECT_EQ(u.size(), static_cast<std::size_t>(kInverseCdfPoints));
  EXPECT_NEAR(u.mean(), 0.5, 1e-12);
  EXPECT_EQ(truth_reference(Spike{0.3}).size(), 1u);
}

TEST(Scenario, MleBeatsEmpiricalOnSpike) {
  ScenarioSpec spec;
  spec.n = 10000;
  spec.t = 10;
  spec.replications = 5;
  const auto r = run_scenario(spec);
  ASSERT_EQ(r.rows.size(), 10u);
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_LT(r.summary[0].mean_w1, r.summary[1].mean_w1);
}

TEST(Scenario, TinySmoke) {
  ScenarioSpec spec;
  spec.n = 10;
  spec.t = 2;
  spec.replications = 1;
  spec.methods = {Method::mle};
  const auto r = run_scenario(spec);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_LE(r.rows[0].w1, 1.0);
}

TEST(Scenario, ErrorsAreRecordedPerRow) {
  ScenarioSpec spec;
  spec.n = 50;
  spec.t = 2;  // too few trials for local moment matching
  spec.replications = 2;
  spec.methods = {Method::local_moment_matching, Method::empirical};
  const auto r = run_scenario(spec);
  EXPECT_FALSE(r.rows[0].error.empty());
  EXPECT_TRUE(std::isnan(r.rows[0].w1));
  EXPECT_TRUE(r.rows[1].error.empty());
  EXPECT_EQ(r.summary[0].failed, 2);
  EXPECT_EQ(r.summary[1].succeeded, 2);
}

TEST(Scenario, ThreadCountDoesNotChangeResults) {
  ScenarioSpec spec;
  spec.truth = Uniform{};
  spec.n = 2000;
  spec.t = 6;
  spec.replications = 4;
  spec.grid_size = 200;
  spec.jobs = 1;
  const auto a = run_scenario(spec);
  spec.jobs = 4;
  const auto b = run_scenario(spec);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].w1, b.rows[i].w1);
}
