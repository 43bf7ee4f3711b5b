// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "jointbid/errors.hpp"
#include "jointbid/trajgen.hpp"

namespace jointbid {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("jointbid_trajgen_" + name);
  fs::remove_all(p);
  return p;
}

ControllerConfig zero_pricing_gains() {
  ControllerConfig k;
  k.price_gains = {0.0, 0.0, 0.0};
  return k;
}

EnvConfig early_overspend_env() {
  EnvConfig env;
  env.surge_steps = 12;
  return env;
}

TEST(JointTrajectory, ZeroGainPidHasNoAdvantage) {
  const ControllerConfig k = zero_pricing_gains();
  const EnvConfig env;
  const BaseBidPolicy base(k, env.a_max);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const JointTrajectory traj = generate_joint_trajectory(base, env, k, seed);
    ASSERT_EQ(traj.steps.size(), 48u);
    for (const auto& s : traj.steps) {
      EXPECT_EQ(s.a_p, 0.0);
      EXPECT_EQ(s.A, 0.0);
    }
  }
}

TEST(JointTrajectory, Deterministic) {
  const ControllerConfig k;
  const EnvConfig env;
  const BaseBidPolicy base(k, env.a_max);
  const JointTrajectory a = generate_joint_trajectory(base, env, k, 12);
  const JointTrajectory b = generate_joint_trajectory(base, env, k, 12);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].A, b.steps[i].A);
    EXPECT_EQ(a.steps[i].a_p, b.steps[i].a_p);
    EXPECT_EQ(a.steps[i].R_b, b.steps[i].R_b);
    EXPECT_EQ(a.steps[i].s_price, b.steps[i].s_price);
  }
}

TEST(JointTrajectory, EarlyOverspendIsRefunded) {
  const ControllerConfig k;
  const EnvConfig env = early_overspend_env();
  const BaseBidPolicy base(k, env.a_max);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const JointTrajectory traj = generate_joint_trajectory(base, env, k, seed);
    Ledger ledger(env.budget);
    double peak_bal = 0.0, offsets = 0.0;
    long wins = 0;
    for (const auto& s : traj.steps) {
      StepRecord r;
      r.value = s.accounting.step_value;
      r.precost = s.accounting.step_precost;
      r.correction = s.accounting.step_payment - s.accounting.step_precost;
      r.wins = s.accounting.wins;
      ledger = ledger.with_step(r);
      peak_bal = std::max(peak_bal, compute_bal(ledger));
      offsets += s.a_p * s.accounting.wins;
      wins += s.accounting.wins;
    }
    EXPECT_GT(peak_bal, 0.0) << seed;
    EXPECT_LT(offsets, 0.0) << seed;
    EXPECT_LE(std::abs(ledger.cum_correction()), peak_bal + env.p_max * wins)
        << seed;
  }
}

TEST(JointTrajectory, RefundStepsMostlyGainReturn) {
  const ControllerConfig k;
  const EnvConfig env = early_overspend_env();
  const BaseBidPolicy base(k, env.a_max);
  int refunds = 0, positive = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& s : generate_joint_trajectory(base, env, k, seed).steps) {
      if (s.a_p < 0.0 && s.t < env.surge_steps + 8) {
        ++refunds;
        if (s.A > 0.0) ++positive;
      }
    }
  }
  ASSERT_GT(refunds, 0);
  EXPECT_GT(positive, refunds / 2);
}

TEST(JointTrajectory, RecordRanges) {
  const ControllerConfig k;
  const EnvConfig env;
  const BaseBidPolicy base(k, env.a_max);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& s : generate_joint_trajectory(base, env, k, seed).steps) {
      EXPECT_GE(s.R_p, 0.0);
      EXPECT_LE(s.R_p, 1.0);
      EXPECT_GE(s.R_b, 0.0);
      EXPECT_TRUE(std::isfinite(s.A));
      EXPECT_EQ(s.s_bid.size(), static_cast<size_t>(kBidViewDim));
      EXPECT_EQ(s.s_price.size(), static_cast<size_t>(kPriceViewDim));
    }
  }
}

TEST(CounterfactualReturn, TerminalSnapshotIsOne) {
  const ControllerConfig k;
  const EnvConfig env;
  BaseBidPolicy base(k, env.a_max);
  EnvState s = reset_env(env, 3);
  while (!s.terminal()) s = env_step(s, 1.0, 0.0).first;
  EXPECT_EQ(counterfactual_return({s, 1.0, 0.0}, base), 1.0);
}

TEST(CounterfactualReturn, NoPricingBranchesAgree) {
  // Without pricing the factual run is its own counterfactual.
  const ControllerConfig k;
  const EnvConfig env;
  BaseBidPolicy bidder(k, env.a_max);
  EnvState s = reset_env(env, 5);
  double prev = 0.0;
  std::vector<std::pair<EnvSnapshot, std::unique_ptr<BidPolicy>>> snaps;
  while (!s.terminal()) {
    snaps.emplace_back(EnvSnapshot{s, prev, 0.0}, bidder.clone());
    const double a = bidder.bid(observe_bid(s, prev));
    s = env_step(s, a, 0.0).first;
    prev = a;
  }
  const EpisodeSeries factual = series_of(s.ledger);
  for (const auto& [snap, pol] : snaps) {
    const EpisodeSeries cf = counterfactual_series(snap, *pol);
    EXPECT_EQ(cf.values, factual.values);
    EXPECT_EQ(cf.precosts, factual.precosts);
    EXPECT_EQ(counterfactual_return(snap, *pol), rtg_price(factual, snap.state.t()));
  }
}

TEST(CommonRandomNumbers, BatchesIndependentOfActions) {
  const EnvConfig env;
  EnvState a = reset_env(env, 21), b = reset_env(env, 21);
  for (int t = 0; t < env.horizon; ++t) {
    const auto expect = sample_batch(21, t, env);
    ASSERT_EQ(a.batch.impressions.size(), expect.impressions.size());
    ASSERT_EQ(b.batch.impressions.size(), expect.impressions.size());
    for (size_t i = 0; i < expect.impressions.size(); ++i) {
      ASSERT_EQ(a.batch.impressions[i].value, expect.impressions[i].value);
      ASSERT_EQ(b.batch.impressions[i].competitor_price,
                expect.impressions[i].competitor_price);
    }
    a = env_step(a, 0.5, 0.0).first;
    b = env_step(b, 2.5, -0.4).first;
  }
}

GenerationConfig small_config(int episodes) {
  GenerationConfig g;
  g.episodes = episodes;
  g.seed = 100;
  return g;
}

TEST(Dataset, ZeroGainPoolEmpty) {
  GenerationConfig g = small_config(4);
  g.controllers = zero_pricing_gains();
  const Dataset ds = generate_dataset(g);
  EXPECT_TRUE(ds.dpo_pool.empty());
  EXPECT_EQ(ds.stage1.size(), 4u * 48);
  EXPECT_EQ(ds.manifest.dropped_zero_advantage, 4 * 48);
}

TEST(Dataset, TenEpisodesRecordCount) {
  const Dataset ds = generate_dataset(small_config(10));
  EXPECT_EQ(ds.stage1.size(), 480u);
  EXPECT_EQ(ds.manifest.stage1_records, 480);
  EXPECT_EQ(ds.manifest.seeds.size(), 10u);
  EXPECT_EQ(ds.manifest.seeds.front(), 100u);
}

TEST(Dataset, FiltersDropExactly) {
  std::vector<DatasetRecord> recs(6);
  recs[0].A = 0.0;
  recs[0].future_value = 5.0;
  recs[1].A = 0.2;
  recs[1].future_value = 0.49;
  recs[2].A = -0.1;
  recs[2].future_value = 0.5;
  recs[3].A = 0.3;
  recs[3].future_value = 10.0;
  recs[4].A = 0.0;
  recs[4].future_value = 0.0;
  recs[5].A = 1e-12;
  recs[5].future_value = 3.0;
  for (int i = 0; i < 6; ++i) recs[i].t = i;
  DatasetManifest m;
  const auto pool = filter_dpo_pool(recs, 0.0, m);
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool[0].t, 2);
  EXPECT_EQ(pool[1].t, 3);
  EXPECT_EQ(pool[2].t, 5);
  EXPECT_EQ(m.dropped_zero_advantage, 2);
  EXPECT_EQ(m.dropped_low_future_value, 1);
  EXPECT_EQ(m.dpo_records, 3);

  const auto strict = filter_dpo_pool(recs, 0.15, m);
  EXPECT_EQ(strict.size(), 1u);
}

TEST(Dataset, CountsReconcile) {
  const Dataset ds = generate_dataset(small_config(12));
  const auto& m = ds.manifest;
  EXPECT_EQ(m.stage1_records,
            m.dpo_records + m.dropped_zero_advantage + m.dropped_low_future_value);
  for (const auto& r : ds.dpo_pool) {
    EXPECT_NE(r.A, 0.0);
    EXPECT_GE(r.future_value, kFutureValueFloor);
  }
}

TEST(Dataset, WorkerCountDoesNotMatter) {
  GenerationConfig g = small_config(16);
  g.workers = 1;
  const Dataset a = generate_dataset(g);
  g.workers = 4;
  const Dataset b = generate_dataset(g);
  EXPECT_TRUE(a == b);
}

TEST(Dataset, RoundTrip) {
  const Dataset ds = generate_dataset(small_config(5));
  const fs::path dir = scratch("roundtrip");
  write_dataset(ds, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "manifest.json.tmp"));
  const Dataset back = read_dataset(dir);
  EXPECT_TRUE(back == ds);
  for (const auto& r : ds.stage1) {
    EXPECT_TRUE(record_from_line(record_to_line(r)) == r);
  }
  fs::remove_all(dir);
}

TEST(Dataset, BuildWritesManifest) {
  const fs::path dir = scratch("build");
  const DatasetManifest m = build_dataset(small_config(3), dir);
  EXPECT_EQ(read_dataset(dir).manifest, m);
  fs::remove_all(dir);
}

TEST(Dataset, ReadErrorsCarryPath) {
  const fs::path dir = scratch("broken");
  write_dataset(generate_dataset(small_config(2)), dir);
  {
    std::ofstream out(dir / "stage1.jsonl", std::ios::app);
    out << "{not json\n";
  }
  try {
    read_dataset(dir);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("stage1.jsonl"), std::string::npos);
  }
  EXPECT_THROW(read_dataset(scratch("missing")), IoError);
  fs::remove_all(dir);
}

TEST(Dataset, GroupByEpisodeSorted) {
  const Dataset ds = generate_dataset(small_config(3));
  const auto groups = group_by_episode(ds.stage1);
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& [ep, recs] : groups) {
    ASSERT_EQ(recs.size(), 48u);
    for (size_t i = 0; i < recs.size(); ++i) {
      EXPECT_EQ(recs[i]->t, static_cast<int>(i));
      EXPECT_EQ(recs[i]->episode, ep);
    }
  }
}

}  // namespace
}  // namespace jointbid
