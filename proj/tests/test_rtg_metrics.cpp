// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jointbid/errors.hpp"
#include "jointbid/rtg_metrics.hpp"

namespace jointbid {
namespace {

EpisodeSeries series(std::vector<double> v, std::vector<double> c,
                     std::vector<double> y = {}) {
  if (y.empty()) y.assign(v.size(), 0.0);
  return {std::move(v), std::move(c), std::move(y)};
}

TEST(RtgBidMemoryless, Examples) {
  // Only the suffix from t = 1 matters.
  EXPECT_EQ(rtg_bid_memoryless(series({99, 10}, {1, 10}), 1), 10.0);
  EXPECT_EQ(rtg_bid_memoryless(series({99, 10}, {1, 20}), 1), 2.5);
  EXPECT_EQ(rtg_bid_memoryless(series({99, 10}, {1, 5}), 1), 10.0);
}

TEST(RtgBidMemoryless, Degenerate) {
  EXPECT_EQ(rtg_bid_memoryless(series({3, 4}, {0, 0}), 0), 7.0);
  EXPECT_EQ(rtg_bid_memoryless(series({0, 0}, {5, 1}), 0), 0.0);
  EXPECT_EQ(rtg_bid_memoryless(series({3, 4}, {1, 1}), 2), 0.0);
  EXPECT_THROW(rtg_bid_memoryless(series({3}, {1}), 2), UsageError);
}

TEST(RtgBidMemoryless, IgnoresCorrections) {
  EXPECT_EQ(rtg_bid_memoryless(series({4, 6}, {5, 5}, {0, 0}), 0),
            rtg_bid_memoryless(series({4, 6}, {5, 5}, {-3, 7}), 0));
}

TEST(RtgPrice, PerfectFulfilment) {
  EXPECT_EQ(rtg_price(series({4, 6}, {5, 5}), 0), 1.0);
  EXPECT_EQ(rtg_price(series({4, 6}, {5, 5}), 1), 1.0);
}

TEST(RtgPrice, FutureCorrectionMatchesDeficit) {
  // V = 10, P = 30 - 10 = 20; at t = 1 the future correction -10 equals
  // D = 10 - 30 - 0 - (-10) = -10.
  EXPECT_DOUBLE_EQ(rtg_price(series({5, 5}, {15, 15}, {0, -10}), 1), 0.5);
}

TEST(RtgPrice, NoFutureCorrection) {
  // V = 10, P = 20, no corrections: exponent 2 |0 - 1| + 1 = 3.
  EXPECT_DOUBLE_EQ(rtg_price(series({5, 5}, {10, 10}), 1), 0.125);
}

TEST(RtgPrice, DegenerateDenominators) {
  EXPECT_EQ(rtg_price(series({0, 0}, {0, 0}), 0), 1.0);
  EXPECT_EQ(rtg_price(series({0, 0}, {1, 0}), 0), 0.0);
  EXPECT_EQ(rtg_price(series({1, 0}, {0, 0}), 0), 0.0);
}

TEST(RtgPrice, RangeFuzz) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 10.0), y(-5.0, 5.0);
  std::uniform_int_distribution<int> len(0, 12), kind(0, 5);
  for (int trial = 0; trial < 10000; ++trial) {
    const int T = len(gen);
    EpisodeSeries s;
    for (int i = 0; i < T; ++i) {
      const int k = kind(gen);
      s.values.push_back(k == 0 ? 0.0 : u(gen));
      s.precosts.push_back(k == 1 ? 0.0 : u(gen));
      s.corrections.push_back(k <= 2 ? 0.0 : y(gen));
    }
    if (trial % 7 == 0 && T > 0) {
      // Settled cost exactly equal to value.
      double v = 0, c = 0, yy = 0;
      for (int i = 0; i < T; ++i) {
        v += s.values[i];
        c += s.precosts[i];
      }
      for (int i = 0; i + 1 < T; ++i) yy += s.corrections[i];
      s.corrections[T - 1] = v - c - yy;
    }
    for (int t = 0; t <= T; ++t) {
      const double r = rtg_price(s, t);
      ASSERT_GE(r, 0.0);
      ASSERT_LE(r, 1.0);
    }
  }
}

TEST(RtgBidHistorical, FirstStepIsScore) {
  const EpisodeSeries s = series({3, 4, 5}, {2, 6, 9});
  EXPECT_EQ(rtg_bid_historical(s, 1), score(s.values, s.precosts));
}

TEST(RtgBidHistorical, OnTargetSeries) {
  const EpisodeSeries s = series({3, 4, 5, 6}, {3, 4, 5, 6});
  EXPECT_EQ(rtg_bid_historical(s, 3), 11.0);
  EXPECT_EQ(rtg_bid_historical(s, 2), 15.0);
}

TEST(RtgBidHistorical, FullyConsumed) {
  const EpisodeSeries s = series({3, 4, 5}, {2, 6, 9});
  EXPECT_EQ(rtg_bid_historical(s, 4), 0.0);
  EXPECT_THROW(rtg_bid_historical(s, 0), UsageError);
}

TEST(RtgBidHistorical, Telescopes) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    EpisodeSeries s;
    const int T = 1 + trial % 15;
    for (int i = 0; i < T; ++i) {
      s.values.push_back(u(gen));
      s.precosts.push_back(u(gen));
      s.corrections.push_back(0.0);
    }
    double total = 0.0;
    for (int t = 1; t <= T; ++t) {
      total += rtg_bid_historical(s, t) - rtg_bid_historical(s, t + 1);
    }
    EXPECT_NEAR(total, score(s.values, s.precosts), 1e-9);
  }
}

TEST(Score, Examples) {
  const std::vector<double> v{4, 6}, c10{5, 5}, c20{10, 10}, zero{0, 0};
  EXPECT_EQ(score(v, c10), 10.0);
  EXPECT_EQ(score(v, c20), 2.5);
  EXPECT_EQ(score(zero, c10), 0.0);
}

TEST(Score, EqualsMemorylessAtZero) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 3.0), y(-1, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    EpisodeSeries s;
    for (int i = 0; i < 1 + trial % 30; ++i) {
      s.values.push_back(u(gen));
      s.precosts.push_back(u(gen));
      s.corrections.push_back(y(gen));
    }
    ASSERT_EQ(score(s.values, s.precosts), rtg_bid_memoryless(s, 0));
  }
}

TEST(RtgBidMemoryless, PrefixMutationInvariant) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 10000; ++trial) {
    EpisodeSeries s;
    const int T = 1 + trial % 20;
    for (int i = 0; i < T; ++i) {
      s.values.push_back(u(gen));
      s.precosts.push_back(u(gen));
      s.corrections.push_back(u(gen) - 1.5);
    }
    const int t = trial % (T + 1);
    const double before = rtg_bid_memoryless(s, t);
    for (int i = 0; i < t; ++i) {
      s.values[i] = u(gen);
      s.precosts[i] = u(gen);
      s.corrections[i] = u(gen);
    }
    ASSERT_EQ(before, rtg_bid_memoryless(s, t));
  }
}

TEST(CpaReport, Examples) {
  const std::vector<double> v{10};
  const auto r1 = cpa_report(v, std::vector<double>{10});
  EXPECT_EQ(r1.ratio, 1.0);
  EXPECT_TRUE(r1.achieved);
  const auto r2 = cpa_report(v, std::vector<double>{12.6});
  EXPECT_NEAR(r2.ratio, 0.794, 1e-3);
  EXPECT_FALSE(r2.achieved);
  const auto r3 = cpa_report(v, std::vector<double>{12.5});
  EXPECT_EQ(r3.ratio, 0.8);
  EXPECT_TRUE(r3.achieved);
}

TEST(CpaReport, BandEdgesAndSentinel) {
  const std::vector<double> v{12};
  EXPECT_TRUE(cpa_report(v, std::vector<double>{10}).achieved);  // 1.2
  EXPECT_FALSE(cpa_report(v, std::vector<double>{9.99}).achieved);
  const auto s = cpa_report(v, std::vector<double>{0});
  EXPECT_TRUE(std::isinf(s.ratio));
  EXPECT_FALSE(s.achieved);
  const std::vector<double> none{0};
  EXPECT_FALSE(cpa_report(none, none).achieved);
}

TEST(EpisodeSeries, Validate) {
  EXPECT_THROW(series({1, 2}, {1}).validate(), UsageError);
  EXPECT_THROW(series({1, NAN}, {1, 1}).validate(), UsageError);
  EXPECT_NO_THROW(series({1, 2}, {1, 1}).validate());
}

}  // namespace
}  // namespace jointbid
