// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jointbid/auction_env.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include "jointbid/errors.hpp"
#include "json.hpp"

namespace jointbid {

void EnvConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("env." + key + ": " + why);
  };
  if (horizon < 1) fail("horizon", "must be >= 1");
  if (!(mean_batch_size > 0.0)) fail("mean_batch_size", "must be > 0");
  if (!(value_log_sigma >= 0.0)) fail("value_log_sigma", "must be >= 0");
  if (!(competitiveness > 0.0)) fail("competitiveness", "must be > 0");
  if (!(competitor_noise >= 0.0)) fail("competitor_noise", "must be >= 0");
  if (!(diurnal_amplitude >= 0.0 && diurnal_amplitude < 1.0))
    fail("diurnal_amplitude", "must be in [0, 1)");
  if (!(surge_competitiveness > 0.0))
    fail("surge_competitiveness", "must be > 0");
  if (surge_steps < 0) fail("surge_steps", "must be >= 0");
  if (!(budget > 0.0)) fail("budget", "must be > 0");
  if (!(tcpa > 0.0)) fail("tcpa", "must be > 0");
  if (!(a_max > 0.0)) fail("a_max", "must be > 0");
  if (!(p_max >= 0.0)) fail("p_max", "must be >= 0");
}

double diurnal_factor(const EnvConfig& config, int step) {
  const double phase =
      2.0 * std::numbers::pi * (step + 0.5) / static_cast<double>(config.horizon);
  return 1.0 + config.diurnal_amplitude * std::sin(phase);
}

ImpressionBatch sample_batch(CounterRng& rng, int step, const EnvConfig& config) {
  ImpressionBatch batch;
  batch.step = step;
  const double rate = config.mean_batch_size * diurnal_factor(config, step);
  int n = 0;
  if (rate > 0.0) {
    std::poisson_distribution<int> count(rate);
    n = count(rng);
  }
  const double kappa = step < config.surge_steps ? config.surge_competitiveness
                                                 : config.competitiveness;
  std::normal_distribution<double> gauss(0.0, 1.0);
  batch.impressions.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double zv = gauss(rng);
    const double zc = gauss(rng);
    Impression imp;
    imp.value = config.tcpa *
                std::exp(config.value_log_mean + config.value_log_sigma * zv);
    imp.competitor_price =
        kappa * imp.value * std::exp(config.competitor_noise * zc);
    batch.impressions.push_back(imp);
  }
  return batch;
}

ImpressionBatch sample_batch(std::uint64_t seed, int step,
                             const EnvConfig& config) {
  CounterRng rng(seed, kBatchStreamBase + static_cast<std::uint64_t>(step));
  return sample_batch(rng, step, config);
}

std::vector<AuctionResult> run_auction(const ImpressionBatch& batch,
                                       double bid_multiplier) {
  std::vector<AuctionResult> out;
  out.reserve(batch.impressions.size());
  for (const auto& imp : batch.impressions) {
    const double bid = bid_multiplier * imp.value;
    if (bid > imp.competitor_price) {
      out.push_back({true, imp.competitor_price});
    } else {
      out.push_back({false, 0.0});
    }
  }
  return out;
}

EnvState reset_env(const EnvConfig& config, std::uint64_t seed) {
  EnvState s;
  s.config = config;
  s.seed = seed;
  s.ledger = Ledger(config.budget);
  s.batch = sample_batch(seed, 0, config);
  return s;
}

std::pair<EnvState, StepOutcome> env_step(const EnvState& state, double a_b,
                                          double a_p) {
  if (state.terminal()) {
    throw UsageError("env_step called on a terminal state (t=" +
                     std::to_string(state.t()) + ")");
  }
  constexpr double kSlack = 1e-12;
  const auto& cfg = state.config;
  if (!(a_b >= -kSlack && a_b <= cfg.a_max + kSlack)) {
    throw UsageError("bid multiplier out of bounds: " + std::to_string(a_b));
  }
  if (!(std::abs(a_p) <= cfg.p_max + kSlack)) {
    throw UsageError("price offset out of bounds: " + std::to_string(a_p));
  }

  const auto results = run_auction(state.batch, a_b);
  StepOutcome out;
  out.impressions = static_cast<int>(state.batch.impressions.size());
  out.applied_offset = a_p;
  const double room = state.ledger.remaining_budget();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].won) continue;
    const double pay = settle_payment(results[i].precost, a_p);
    if (out.step_payment + pay > room) {
      out.budget_exhausted = true;
      break;
    }
    out.wins += 1;
    out.step_value += state.batch.impressions[i].value;
    out.step_precost += results[i].precost;
    out.step_payment += pay;
  }

  StepRecord rec;
  rec.value = out.step_value;
  rec.precost = out.step_precost;
  rec.correction = out.step_payment - out.step_precost;
  rec.wins = out.wins;
  rec.impressions = out.impressions;

  EnvState next;
  next.config = cfg;
  next.seed = state.seed;
  next.ledger = state.ledger.with_step(rec);
  next.exhausted = out.budget_exhausted;
  if (!next.terminal()) next.batch = sample_batch(state.seed, next.t(), cfg);
  return {std::move(next), out};
}

BidObservation observe_bid(const EnvState& state, double prev_bid) {
  BidObservation obs;
  obs.t = state.t();
  obs.horizon = state.config.horizon;
  obs.batch = summarize(state.batch);
  obs.view = bid_view_features(state.ledger, obs.batch, prev_bid,
                               state.config.feature_scale());
  obs.cum_value = state.ledger.cum_value();
  obs.cum_precost = state.ledger.cum_precost();
  obs.prev_bid = prev_bid;
  return obs;
}

PriceObservation observe_price(const EnvState& state, double prev_bid,
                               double prev_price) {
  PriceObservation obs;
  obs.t = state.t();
  obs.horizon = state.config.horizon;
  obs.view = price_view_features(state.ledger, summarize(state.batch), prev_bid,
                                 state.config.feature_scale());
  obs.ledger = &state.ledger;
  obs.prev_bid = prev_bid;
  obs.prev_price = prev_price;
  return obs;
}

SplitPolicy::SplitPolicy(std::unique_ptr<BidPolicy> bid,
                         std::unique_ptr<PricingPolicy> price)
    : bid_(std::move(bid)), price_(std::move(price)) {}

Action SplitPolicy::act(const BidObservation& bid_obs,
                        const PriceObservation& price_obs) {
  return {bid_->bid(bid_obs), price_->price(price_obs)};
}

std::unique_ptr<JointPolicy> SplitPolicy::clone() const {
  return std::make_unique<SplitPolicy>(bid_->clone(), price_->clone());
}

EpisodeLog run_episode(JointPolicy& policy, const EnvConfig& config,
                       std::uint64_t seed) {
  EpisodeLog log;
  log.seed = seed;
  EnvState state = reset_env(config, seed);
  Action prev;
  while (!state.terminal()) {
    const BidObservation bo = observe_bid(state, prev.bid_multiplier);
    const PriceObservation po =
        observe_price(state, prev.bid_multiplier, prev.price_offset);
    const Action raw = policy.act(bo, po);
    if (!std::isfinite(raw.bid_multiplier) || !std::isfinite(raw.price_offset)) {
      throw NumericError("policy produced a non-finite action at step " +
                         std::to_string(state.t()) + " (seed " +
                         std::to_string(seed) + ")");
    }
    const Action a = clamp_action(raw, config.bounds());
    auto [next, outcome] = env_step(state, a.bid_multiplier, a.price_offset);

    EpisodeStep step;
    step.t = state.t();
    step.action = a;
    step.outcome = outcome;
    step.bid_view = bo.view.features;
    step.price_view = po.view.features;
    step.cum_value = next.ledger.cum_value();
    step.cum_precost = next.ledger.cum_precost();
    step.cum_correction = next.ledger.cum_correction();
    step.budget_spent = next.ledger.budget_spent();
    step.bal = compute_bal(next.ledger);
    log.steps.push_back(std::move(step));

    state = std::move(next);
    prev = a;
  }
  log.final_ledger = state.ledger;
  log.budget_exhausted = state.exhausted;
  return log;
}

EpisodeLog run_episode(BidPolicy& bid_policy, PricingPolicy& pricing_policy,
                       const EnvConfig& config, std::uint64_t seed) {
  // Borrow the caller's policies so their state is visible afterwards.
  struct Borrowed final : JointPolicy {
    BidPolicy& b;
    PricingPolicy& p;
    Borrowed(BidPolicy& b, PricingPolicy& p) : b(b), p(p) {}
    Action act(const BidObservation& bo, const PriceObservation& po) override {
      return {b.bid(bo), p.price(po)};
    }
    std::unique_ptr<JointPolicy> clone() const override {
      return std::make_unique<SplitPolicy>(b.clone(), p.clone());
    }
  } joint(bid_policy, pricing_policy);
  return run_episode(joint, config, seed);
}

void write_episode_log(const EpisodeLog& log, std::ostream& out) {
  for (const auto& s : log.steps) {
    nlohmann::ordered_json j;
    j["t"] = s.t;
    j["a_b"] = s.action.bid_multiplier;
    j["a_p"] = s.action.price_offset;
    j["impressions"] = s.outcome.impressions;
    j["wins"] = s.outcome.wins;
    j["value"] = s.outcome.step_value;
    j["precost"] = s.outcome.step_precost;
    j["payment"] = s.outcome.step_payment;
    j["offset"] = s.outcome.applied_offset;
    j["cum_value"] = s.cum_value;
    j["cum_precost"] = s.cum_precost;
    j["cum_correction"] = s.cum_correction;
    j["budget_spent"] = s.budget_spent;
    j["bal"] = s.bal;
    j["exhausted"] = s.outcome.budget_exhausted;
    out << j.dump() << '\n';
  }
}

}  // namespace jointbid
