// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jointbid/dpo_finetune.hpp"
#include "jointbid/errors.hpp"
#include "test_util.hpp"

namespace jointbid {
namespace {

double neg_log_sigmoid(double x) { return std::log1p(std::exp(-x)); }

TEST(Similarity, Examples) {
  EXPECT_EQ(similarity(0.3, 0.3, -1.0), 0.0);
  EXPECT_EQ(similarity(1, 0, 1), 1.0);
  EXPECT_EQ(similarity(1, 0, -1), -1.0);
}

TEST(EnergyDpoLoss, Examples) {
  EXPECT_NEAR(energy_dpo_loss(0.4, 0.4, 1.0, -0.2, 0.15), std::log(2.0), 1e-12);
  EXPECT_NEAR(energy_dpo_loss(1, 0, 1, -1, 1), 0.1269280110429725, 1e-6);
  EXPECT_NEAR(energy_dpo_loss(-1, 0, 1, -1, 1), 2.1269280110429727, 1e-6);
  EXPECT_NEAR(energy_dpo_loss(1, 0, 1, -1, 1), neg_log_sigmoid(2.0), 1e-15);
}

TEST(EnergyDpoLoss, LnTwoAtReference) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(gen);
    EXPECT_NEAR(energy_dpo_loss(a, a, u(gen), u(gen), 0.01 + std::abs(u(gen))),
                std::log(2.0), 1e-9);
  }
}

TEST(EnergyDpoLoss, MonotoneAndSymmetric) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(gen), ref = u(gen), beta = 0.05 + std::abs(u(gen));
    const double plus = u(gen), minus = u(gen);
    const double loss = energy_dpo_loss(a, ref, plus, minus, beta);
    ASSERT_GE(loss, 0.0);
    // Moving a toward a_plus raises S(a, a_plus) by the step.
    const double s_plus = similarity(a, ref, plus);
    const double s_minus = similarity(a, ref, minus);
    const double x = beta * (s_plus - s_minus);
    ASSERT_NEAR(loss, neg_log_sigmoid(x), 1e-12);
    const double d = 0.01 + 0.1 * std::abs(u(gen));
    ASSERT_LT(neg_log_sigmoid(beta * (s_plus + d - s_minus)), loss);
    ASSERT_GT(neg_log_sigmoid(beta * (s_plus - s_minus - d)), loss);
    // Swapping labels negates the argument.
    ASSERT_NEAR(energy_dpo_loss(a, ref, minus, plus, beta), neg_log_sigmoid(-x),
                1e-12);
  }
}

TEST(DpoTrainable, PricingAndFusionOnly) {
  EXPECT_TRUE(dpo_trainable("price.head.w"));
  EXPECT_TRUE(dpo_trainable("gca.w_enh"));
  EXPECT_FALSE(dpo_trainable("bid.head.w"));
  EXPECT_FALSE(dpo_trainable("bid.layer0.attn.wq"));
}

std::vector<DatasetRecord> one_episode() {
  GenerationConfig g;
  g.episodes = 1;
  g.seed = 5;
  return generate_dataset(g).stage1;
}

TEST(BuildPreferencePairs, Rules) {
  auto recs = one_episode();
  ASSERT_EQ(recs.size(), 48u);
  for (auto& r : recs) {
    r.A = 0.0;
    r.future_value = 10.0;
  }
  recs[10].A = 0.2;
  recs[10].a_p = -0.3;
  recs[20].A = -0.1;
  recs[20].a_p = -0.3;
  recs[30].A = 0.4;
  recs[30].a_p = -0.1;
  recs[30].future_value = 0.2;
  recs[40].A = 0.3;
  recs[40].a_p = 0.0;
  const ModelConfig c;
  const auto pairs = build_preference_pairs(recs, c, 0.0);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].a_plus, -0.3);
  EXPECT_EQ(pairs[0].a_minus, 0.0);
  EXPECT_EQ(pairs[0].t, 10);
  EXPECT_EQ(pairs[0].window.valid, 11);
  EXPECT_EQ(pairs[1].a_plus, 0.0);
  EXPECT_EQ(pairs[1].a_minus, -0.3);
  EXPECT_EQ(pairs[1].window.valid, c.context);
  EXPECT_EQ(pairs[1].window.timesteps.back(), 20);
  EXPECT_EQ(build_preference_pairs(recs, c, 0.15).size(), 1u);
}

ModelParams live_model() {
  ModelConfig c = testing::small_config();
  c.context = 8;
  ModelParams p = testing::live_params(c, 3, 0.2);
  p.norm.ap_std = 0.2;
  p.norm.ab_std = 0.5;
  return p;
}

std::vector<PreferencePair> synthetic_pairs(const ModelParams& p, int n) {
  std::vector<PreferencePair> pairs;
  for (int k = 0; k < n; ++k) {
    const auto h = testing::random_history(200 + k, 10);
    PreferencePair pp;
    pp.window = make_window(h, 9, p.config.context);
    pairs.push_back(std::move(pp));
  }
  const std::vector<double> ref = reference_outputs(p, pairs);
  for (int k = 0; k < n; ++k) {
    pairs[k].a_plus = ref[k] + 1.0;
    pairs[k].a_minus = ref[k] - 1.0;
    pairs[k].advantage = 1.0;
  }
  return pairs;
}

TEST(Finetune, EmptyPairsRejected) {
  Checkpoint c;
  c.params = live_model();
  EXPECT_THROW(finetune(c, {}, DpoConfig{}), UsageError);
}

TEST(Finetune, ZeroEpochsIsIdentity) {
  Checkpoint c;
  c.params = live_model();
  DpoConfig cfg;
  cfg.epochs = 0;
  const DpoResult r = finetune(c, synthetic_pairs(c.params, 4), cfg);
  EXPECT_TRUE(r.checkpoint == c);
}

TEST(Finetune, ReducesGapToPreferred) {
  Checkpoint c;
  c.params = live_model();
  const auto pairs = synthetic_pairs(c.params, 64);
  const DpoResult r = finetune(c, pairs, DpoConfig{});
  ASSERT_EQ(r.curve.size(), 3u);
  EXPECT_NEAR(r.initial_gap_plus, 1.0, 1e-12);
  double prev = r.initial_gap_plus;
  for (const auto& e : r.curve) {
    EXPECT_LT(e.mean_gap_plus, prev) << e.epoch;
    prev = e.mean_gap_plus;
  }
}

TEST(Finetune, BiddingFrozen) {
  Checkpoint c;
  c.params = live_model();
  const auto pairs = synthetic_pairs(c.params, 16);
  DpoConfig cfg;
  cfg.learning_rate = 1e-3;
  const DpoResult r = finetune(c, pairs, cfg);
  for (const auto& [name, m] : c.params.tensors) {
    const bool same = tensors_equal({{name, m}}, {{name, r.checkpoint.params.at(name)}});
    EXPECT_EQ(same, !dpo_trainable(name)) << name;
  }
  for (const auto& p : pairs) {
    const RawActions a = forward_all(c.params, p.window);
    const RawActions b = forward_all(r.checkpoint.params, p.window);
    EXPECT_EQ(a.a_b, b.a_b);
  }
}

TEST(Finetune, Deterministic) {
  Checkpoint c;
  c.params = live_model();
  const auto pairs = synthetic_pairs(c.params, 20);
  DpoConfig cfg;
  cfg.batch_size = 8;
  const DpoResult a = finetune(c, pairs, cfg, 1);
  const DpoResult b = finetune(c, pairs, cfg, 3);
  EXPECT_TRUE(a.checkpoint == b.checkpoint);
}

double grad_norm(const Tensors& g) {
  double s = 0.0;
  for (const auto& [_, m] : g) s += m.squaredNorm();
  return std::sqrt(s);
}

TEST(DpoLossAndGrad, GradientScalesWithBeta) {
  const ModelParams p = live_model();
  const auto pairs = synthetic_pairs(p, 6);
  std::vector<const PreferencePair*> batch;
  for (const auto& pp : pairs) batch.push_back(&pp);
  const std::vector<double> ref = reference_outputs(p, pairs);
  const DpoLossGrad small = dpo_loss_and_grad(p, batch, ref, 0.015);
  const DpoLossGrad big = dpo_loss_and_grad(p, batch, ref, 0.15);
  EXPECT_NEAR(small.loss, std::log(2.0), 1e-9);
  EXPECT_NEAR(big.loss, std::log(2.0), 1e-9);
  EXPECT_NEAR(grad_norm(big.grads) / grad_norm(small.grads), 10.0, 1e-9);
  for (const auto& [name, _] : big.grads) EXPECT_TRUE(dpo_trainable(name)) << name;
}

TEST(DpoLossAndGrad, MatchesScalarLoss) {
  const ModelParams p = live_model();
  auto pairs = synthetic_pairs(p, 3);
  std::vector<const PreferencePair*> batch;
  for (const auto& pp : pairs) batch.push_back(&pp);
  const std::vector<double> a = reference_outputs(p, pairs);
  // A reference shifted away from the live output gives a non-trivial loss.
  std::vector<double> ref = a;
  for (double& r : ref) r += 0.25;
  double expect = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    expect += energy_dpo_loss(a[i], ref[i], pairs[i].a_plus, pairs[i].a_minus, 0.5);
  }
  EXPECT_NEAR(dpo_loss_and_grad(p, batch, ref, 0.5).loss, expect / 3, 1e-12);
}

}  // namespace
}  // namespace jointbid
