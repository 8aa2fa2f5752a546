#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "popdist/lowerbound.hpp"
#include "popdist/metrics.hpp"

using namespace popdist;

TEST(Wasserstein, WorkedExamples) {
  EXPECT_NEAR(wasserstein1(AtomicDistribution::delta(0.5), AtomicDistribution::delta(0.45)), 0.05, 1e-15);
  EXPECT_NEAR(wasserstein1(AtomicDistribution::delta(0.5), AtomicDistribution({{0.0, 0.5}, {1.0, 0.5}})), 0.5,
              1e-15);
}

TEST(Wasserstein, IdentityAndSymmetry) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_atomic(rng, 10), q = oracle::random_atomic(rng, 10);
    EXPECT_EQ(wasserstein1(p, p), 0.0);
    EXPECT_NEAR(wasserstein1(p, q), wasserstein1(q, p), 1e-15);
  }
}

TEST(Wasserstein, MatchesTransportLinearProgram) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 50; ++i) {
    const auto p = oracle::random_atomic(rng, 10), q = oracle::random_atomic(rng, 10);
    EXPECT_NEAR(wasserstein1(p, q), oracle::transport_w1(p, q), 1e-9);
  }
}

TEST(Wasserstein, MeasuresNeedEqualMass) {
  const AtomicMeasure a({{0.2, 0.5}}), b({{0.4, 0.5}}), c({{0.4, 0.7}});
  EXPECT_NEAR(wasserstein1(a, b), 0.1, 1e-15);
  EXPECT_THROW(wasserstein1(a, c), InputError);
}

TEST(Kl, ClosedForms) {
  const Fingerprint a(1, {1.0, 0.0}), b(1, {0.5, 0.5});
  EXPECT_EQ(kl_divergence(a, a), 0.0);
  EXPECT_NEAR(kl_divergence(a, b), std::log(2.0), 1e-15);
  EXPECT_EQ(kl_divergence(b, a), std::numeric_limits<double>::infinity());
  EXPECT_THROW(kl_divergence(a, Fingerprint(2, {1, 0, 0})), InputError);
}

TEST(TotalVariation, ClosedForms) {
  const Fingerprint a(1, {1.0, 0.0}), b(1, {0.0, 1.0});
  EXPECT_EQ(total_variation_fingerprint(a, a), 0.0);
  EXPECT_DOUBLE_EQ(total_variation_fingerprint(a, b), 1.0);
}

TEST(TotalVariation, MoreMatchedMomentsGiveSmallerChannelDistance) {
  const auto p6 = moment_matched_pair(6, 0.3, 0.7), p2 = moment_matched_pair(2, 0.3, 0.7);
  const double tv6 = total_variation_fingerprint(expected_fingerprint(p6.p, 20), expected_fingerprint(p6.q, 20));
  const double tv2 = total_variation_fingerprint(expected_fingerprint(p2.p, 20), expected_fingerprint(p2.q, 20));
  EXPECT_LE(tv6, tv2);
}

TEST(Moments, PointMassesAndEndpoints) {
  const MomentVector m = moments(AtomicDistribution::delta(0.5), 3);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
  EXPECT_DOUBLE_EQ(m[2], 0.25);
  EXPECT_DOUBLE_EQ(m[3], 0.125);
  EXPECT_DOUBLE_EQ(moments(AtomicDistribution({{0.0, 0.5}, {1.0, 0.5}}), 1)[1], 0.5);
}

TEST(Moments, UniformGridSecondMoment) {
  const auto grid = uniform_grid(1000);
  const AtomicDistribution u = AtomicDistribution::on_grid(grid, std::vector<double>(grid.size(), 1.0));
  EXPECT_NEAR(moments(u, 2)[2], 1.0 / 3.0, 1e-3);
}

TEST(Moments, ShiftedMomentsBoundedAndReshiftable) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_atomic(rng, 8);
    for (double shift : {0.0, 0.3, 0.8}) {
      const MomentVector m = moments(p, 6, shift);
      const double r = std::max(std::abs(1.0 - shift), std::abs(shift));
      for (int k = 1; k <= 6; ++k) EXPECT_LE(std::abs(m[k]), std::pow(r, k) + 1e-15);
      const MomentVector back = reshift_moments(m, 0.0);
      const MomentVector raw = moments(p, 6);
      for (int k = 1; k <= 6; ++k) EXPECT_NEAR(back[k], raw[k], 1e-12);
    }
  }
}

TEST(Pinsker, HoldsOnExamplesAndRandomPairs) {
  const Fingerprint a(1, {0.9, 0.1}), b(1, {0.5, 0.5});
  EXPECT_TRUE(pinsker_check(a, a));
  EXPECT_TRUE(pinsker_check(a, b));
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(11), y(11);
    double sx = 0, sy = 0;
    for (int s = 0; s <= 10; ++s) {
      sx += x[s] = u(rng);
      sy += y[s] = u(rng);
    }
    for (int s = 0; s <= 10; ++s) {
      x[s] /= sx;
      y[s] /= sy;
    }
    EXPECT_TRUE(pinsker_check(Fingerprint(10, x), Fingerprint(10, y)));
  }
}

TEST(MetricRecord, SerializesToJson) {
  MetricRecord r;
  r.metric = "w1";
  r.value = 0.25;
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("metric"), "w1");
  EXPECT_EQ(j.at("value"), 0.25);
}
