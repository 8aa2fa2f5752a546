#include <gtest/gtest.h>

#include <cmath>

#include "popdist/lowerbound.hpp"

using namespace popdist;

TEST(MomentMatchedPair, FirstOrderReachesAnalyticOptimum) {
  const auto pair = moment_matched_pair(1);
  EXPECT_GE(pair.w1, 0.5 - 1e-6);
  EXPECT_LE(pair.moment_residual, 1e-12);
}

TEST(MomentMatchedPair, AffineMapHalvesDistance) {
  const auto unit = moment_matched_pair(1);
  const auto half = moment_matched_pair(1, 0.25, 0.75);
  EXPECT_NEAR(half.w1, 0.5 * unit.w1, 1e-12);
  EXPECT_NEAR(half.p.mean(), half.q.mean(), 1e-12);
  for (const Atom& a : half.p.atoms()) {
    EXPECT_GE(a.location, 0.25);
    EXPECT_LE(a.location, 0.75);
  }
}

TEST(MomentMatchedPair, SixMoments) {
  const auto pair = moment_matched_pair(6);
  EXPECT_LE(pair.moment_residual, 1e-8);
  EXPECT_GE(pair.w1, 1.0 / 12.0 - 1e-6);
}

TEST(MomentMatchedPair, RejectsBadArguments) {
  EXPECT_THROW(moment_matched_pair(0), InputError);
  EXPECT_THROW(moment_matched_pair(2, 0.5, 0.5), InputError);
  EXPECT_THROW(moment_matched_pair(10, 0.0, 1.0, 20), InputError);
}

TEST(ChannelTv, ClosedForms) {
  const auto d0 = AtomicDistribution::delta(0.0), d1 = AtomicDistribution::delta(1.0);
  EXPECT_EQ(binomial_channel_tv(d0, d0, 3), 0.0);
  EXPECT_DOUBLE_EQ(binomial_channel_tv(d0, d1, 1), 1.0);
}

TEST(ChannelTv, DecreasesWithMatchedOrder) {
  double prev = 2.0;
  for (int s : {2, 4, 6}) {
    const auto pair = moment_matched_pair(s, 0.3, 0.7);
    const double tv = binomial_channel_tv(pair.p, pair.q, 20);
    EXPECT_LT(tv, prev) << "s=" << s;
    prev = tv;
  }
}

TEST(Theorem4Scenario, DegenerateSmallPopulation) {
  const auto r = theorem4_scenario(std::exp(1.0), 4);
  EXPECT_EQ(r.a, 0.0);
  EXPECT_EQ(r.b, 1.0);
  EXPECT_EQ(r.s, kMomentOrderCap);
  const auto j = theorem4_to_json(r);
  for (const char* key : {"N", "t", "s", "interval", "achieved_w1", "target_w1", "channel_tv"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Theorem4Scenario, ModeratePopulation) {
  const auto r = theorem4_scenario(100.0, 64);
  EXPECT_GE(r.achieved_w1, 1.0 / (std::exp(4.0) * std::sqrt(64 * std::log(100.0))) - 1e-6);
  EXPECT_LE(r.channel_tv, r.channel_tv_s1);
  EXPECT_LE(r.moment_residual, 1e-8);
}
