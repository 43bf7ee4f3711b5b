// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "jointbid/errors.hpp"
#include "jointbid/model.hpp"
#include "test_util.hpp"

namespace jointbid {
namespace {

using testing::fit_targets;
using testing::linear_config;
using testing::live_params;
using testing::random_history;
using testing::small_config;

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.context = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig{}.validate());
}

TEST(InitParams, ShapesAndZeroHeads) {
  const ModelConfig c;
  const ModelParams p = init_params(c);
  const auto shapes = param_shapes(c);
  ASSERT_EQ(p.tensors.size(), shapes.size());
  for (const auto& [name, shape] : shapes) {
    EXPECT_EQ(p.at(name).rows(), shape.first) << name;
    EXPECT_EQ(p.at(name).cols(), shape.second) << name;
  }
  EXPECT_TRUE(p.at("bid.head.w").isZero(0));
  EXPECT_TRUE(p.at("price.head.w").isZero(0));
  EXPECT_TRUE(init_params(c) == p);
}

TEST(ForwardJoint, ZeroHeadsGiveZeroActions) {
  const auto h = random_history(1, 30);
  const ModelParams p = init_params(ModelConfig{});
  const Action a = forward_joint(p, make_window(h, 29, 20));
  EXPECT_EQ(a.bid_multiplier, 0.0);
  EXPECT_EQ(a.price_offset, 0.0);
}

TEST(ForwardJoint, AllZeroParams) {
  ModelParams p = init_params(small_config());
  for (auto& [_, m] : p.tensors) m.setZero();
  const Action a = forward_joint(p, make_window(random_history(2, 8), 7, 6));
  EXPECT_EQ(a.bid_multiplier, 0.0);
  EXPECT_EQ(a.price_offset, 0.0);
}

TEST(EmbedStream, ShapeAndZeroInputs) {
  const ModelConfig c;
  const ModelParams p = init_params(c);
  const Window w = make_window(random_history(3, 25), 24, 20);
  Tape tape;
  Binding b(tape, p);
  Var tokens = embed_stream(b, w, Stream::kBid);
  EXPECT_EQ(tokens.rows(), 60);
  EXPECT_EQ(tokens.cols(), 64);

  ModelParams zero = p;
  for (auto& [_, m] : zero.tensors) m.setZero();
  Tape t2;
  Binding b2(t2, zero);
  EXPECT_TRUE(embed_stream(b2, w, Stream::kPrice).value().isZero(0));
}

TEST(MakeWindow, PadsOnTheLeft) {
  const auto h = random_history(4, 10);
  const Window w = make_window(h, 2, 5);
  EXPECT_EQ(w.valid, 3);
  EXPECT_EQ(w.slots(), 5);
  EXPECT_EQ(w.timesteps[2], 0);
  EXPECT_EQ(w.timesteps[4], 2);
  EXPECT_EQ(w.bid_rtg(4, 0), h[2].R_b);
  EXPECT_THROW(make_window(h, 10, 5), UsageError);
}

TEST(ForwardAll, PaddingNeverRead) {
  const ModelParams p = live_params(small_config(), 5);
  const Window w = make_window(random_history(5, 10), 3, 6);
  ASSERT_EQ(w.valid, 4);
  Window dirty = w;
  dirty.bid_rtg.topRows(2).setConstant(99.0);
  dirty.price_states.topRows(2).setConstant(-7.0);
  dirty.bid_actions.topRows(2).setConstant(3.0);
  dirty.timesteps[0] = 17;
  const RawActions a = forward_all(p, w), b = forward_all(p, dirty);
  EXPECT_TRUE(bits_equal(a.a_b, b.a_b));
  EXPECT_TRUE(bits_equal(a.a_p, b.a_p));
}

TEST(ForwardAll, Causality) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelConfig c = small_config();
    c.gca_literal = seed % 2 == 1;
    const ModelParams p = live_params(c, 10 + seed);
    auto h = random_history(20 + seed, 6);
    const RawActions base = forward_all(p, make_window(h, 5, 6));
    const int cut = static_cast<int>(seed % 5) + 1;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = cut; t < 6; ++t) {
      h[t].R_b += u(gen);
      h[t].R_p += u(gen);
      for (double& x : h[t].s_bid) x += u(gen);
      for (double& x : h[t].s_price) x += u(gen);
      h[t].a_b += u(gen);
      h[t].a_p += u(gen);
    }
    const RawActions moved = forward_all(p, make_window(h, 5, 6));
    for (int t = 0; t < cut; ++t) {
      EXPECT_EQ(base.a_b[t], moved.a_b[t]) << seed << " " << t;
      EXPECT_EQ(base.a_p[t], moved.a_p[t]) << seed << " " << t;
    }
    EXPECT_NE(base.a_b[cut], moved.a_b[cut]);
  }
}

TEST(ForwardAll, OwnActionIsNotAnInput) {
  const ModelParams p = live_params(small_config(), 7);
  auto h = random_history(7, 6);
  const RawActions base = forward_all(p, make_window(h, 5, 6));
  h[5].a_b = 0.123;
  h[5].a_p = -0.2;
  const RawActions moved = forward_all(p, make_window(h, 5, 6));
  EXPECT_TRUE(bits_equal(base.a_b, moved.a_b));
  EXPECT_TRUE(bits_equal(base.a_p, moved.a_p));
}

TEST(ForwardAll, OneWayCoupling) {
  const ModelParams p = live_params(small_config(), 8);
  const Window w = make_window(random_history(8, 12), 11, 6);
  const RawActions base = forward_all(p, w);

  ModelParams price_moved = p;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& [name, m] : price_moved.tensors) {
    if (name.starts_with("price.") || name.starts_with("gca.")) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += u(gen);
    }
  }
  const RawActions pm = forward_all(price_moved, w);
  EXPECT_TRUE(bits_equal(base.a_b, pm.a_b));
  EXPECT_FALSE(bits_equal(base.a_p, pm.a_p));

  ModelParams bid_moved = p;
  bid_moved.at("bid.layer0.attn.wv").array() += 0.3;
  const RawActions bm = forward_all(bid_moved, w);
  EXPECT_FALSE(bits_equal(base.a_b, bm.a_b));
  int changed = 0;
  for (size_t i = 0; i < bm.a_p.size(); ++i) changed += bm.a_p[i] != base.a_p[i];
  EXPECT_GT(changed, 0);
}

TEST(ForwardAll, ZeroEnhancementEqualsNoGcaPath) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig c = small_config();
    ModelParams with = live_params(c, 30 + seed);
    with.at("gca.w_enh").setZero();
    ModelParams without = with;
    without.config.gca = false;
    const Window w = make_window(random_history(40 + seed, 9), 8, 6);
    const RawActions a = forward_all(with, w), b = forward_all(without, w);
    EXPECT_TRUE(bits_equal(a.a_b, b.a_b));
    for (size_t i = 0; i < a.a_p.size(); ++i) EXPECT_EQ(a.a_p[i], b.a_p[i]);
  }
}

TEST(GcaFuse, ZeroGateHalvesSingleStep) {
  ModelConfig c = small_config();
  ModelParams p = live_params(c, 9);
  p.at("gca.w_gate").setZero();
  p.at("gca.w_enh").setIdentity();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat hb(1, c.d_model), hp(1, c.d_model), e(1, c.d_model);
  for (int i = 0; i < c.d_model; ++i) {
    hb(0, i) = u(gen);
    hp(0, i) = u(gen);
    e(0, i) = u(gen);
  }
  Tape tape;
  Binding b(tape, p);
  const Mat out = gca_fuse(b, tape.constant(hb), tape.constant(hp),
                           tape.constant(e))
                      .value();
  const Mat expect = e + (0.5 * hb) * p.at("gca.w_v");
  EXPECT_LT((out - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ForwardJoint, Deterministic) {
  const ModelParams p = live_params(ModelConfig{}, 11);
  const Window w = make_window(random_history(11, 30), 29, 20);
  const Action a = forward_joint(p, w), b = forward_joint(p, w);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof(Action)), 0);
}

TEST(ForwardJoint, ClampsToBounds) {
  ModelParams p = live_params(small_config(), 12);
  p.at("bid.head.w").array() *= 1e6;
  p.at("price.head.w").array() *= 1e6;
  const Action a = forward_joint(p, make_window(random_history(12, 6), 5, 6));
  EXPECT_TRUE(a.bid_multiplier == 0.0 || a.bid_multiplier == p.config.a_max);
  EXPECT_EQ(std::abs(a.price_offset), p.config.p_max);
}

TEST(ForwardJoint, NonFiniteParameterNamed) {
  ModelParams p = live_params(small_config(), 13);
  p.at("price.layer1.mlp.w1")(0, 0) = NAN;
  try {
    forward_joint(p, make_window(random_history(13, 6), 5, 6));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("price.layer1.mlp.w1"), std::string::npos);
  }
  EXPECT_THROW(check_finite(p), NumericError);
}

TEST(ActionLoss, Examples) {
  EXPECT_EQ(action_loss({1, 2}, {0.1, 0.2}, {1, 2}, {0.1, 0.2}, 1, 1), 0.0);
  EXPECT_EQ(action_loss({1}, {2}, {0}, {0}, 1, 1), 5.0);
  EXPECT_EQ(action_loss({1}, {2}, {0}, {0}, 1, 0), action_loss({1}, {9}, {0}, {0}, 1, 0));
  EXPECT_THROW(action_loss({1}, {}, {1}, {1}, 1, 1), UsageError);
}

TEST(GradCheck, LinearConfig) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ModelParams p = live_params(linear_config(), 50 + seed);
    const Window w = fit_targets(p, make_window(random_history(60 + seed, 8), 7, 6));
    GradCheckOptions o;
    o.eps = 1e-4;
    EXPECT_LT(grad_check(p, w, o), 1e-9) << seed;
  }
}

TEST(GradCheck, SmallConfigBothWirings) {
  for (bool literal : {false, true}) {
    ModelConfig c = small_config();
    c.gca_literal = literal;
    const ModelParams p = live_params(c, 70);
    const Window w = make_window(random_history(71, 8), 7, 6);
    EXPECT_LT(grad_check(p, w), 1e-4) << literal;
  }
}

TEST(GradCheck, DefaultConfig) {
  const ModelParams p = live_params(ModelConfig{}, 80, 0.1);
  const Window w = make_window(random_history(81, 30), 29, 20);
  EXPECT_LT(grad_check(p, w), 1e-4);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  const ModelParams p = live_params(small_config(), 90);
  const Window w = make_window(random_history(91, 8), 7, 6);
  GradCheckOptions opt;
  opt.tamper = [](Tensors& g) { g.at("price.head.w").setZero(); };
  EXPECT_GT(grad_check(p, w, opt), 1e-2);
}

TEST(LossAndGrad, WorkerCountDoesNotMatter) {
  const ModelParams p = live_params(small_config(), 100);
  std::vector<Window> windows;
  const auto h = random_history(101, 12);
  for (int end = 0; end < 12; ++end) windows.push_back(make_window(h, end, 6));
  std::vector<const Window*> batch;
  for (const auto& w : windows) batch.push_back(&w);
  const auto all = [](const std::string&) { return true; };
  const LossGrad a = loss_and_grad(p, batch, 1, 1, all, 1);
  const LossGrad b = loss_and_grad(p, batch, 1, 1, all, 4);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_TRUE(tensors_equal(a.grads, b.grads));
  EXPECT_EQ(a.loss, batch_loss(p, batch, 1, 1));
}

}  // namespace
}  // namespace jointbid
