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

#pragma once

// Seeded synthetic second-price auction environment.
//
// Each step draws a batch of impressions whose content depends only on
// (seed, step). Actions therefore never change what traffic arrives, which
// makes counterfactual rollouts see the same impressions as the factual one.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "jointbid/domain.hpp"
#include "jointbid/rng.hpp"

namespace jointbid {

struct EnvConfig {
  int horizon = 48;
  double mean_batch_size = 16.0;
  double value_log_mean = 0.0;
  double value_log_sigma = 0.5;
  double competitiveness = 1.2;   // competitor price = k * v * exp(noise * z)
  double competitor_noise = 0.4;
  double diurnal_amplitude = 0.3;
  // Competitiveness used for steps < surge_steps; a way to force an early
  // overspend. surge_steps = 0 disables it.
  double surge_competitiveness = 1.6;
  int surge_steps = 8;
  double budget = 1000.0;
  double tcpa = 1.0;
  double a_max = 4.0;
  double p_max = 0.5;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  FeatureScale feature_scale() const {
    return {horizon, budget, mean_batch_size};
  }
  ActionBounds bounds() const { return {a_max, p_max}; }
  bool operator==(const EnvConfig&) const = default;
};

/// Diurnal traffic multiplier for a step.
double diurnal_factor(const EnvConfig& config, int step);

ImpressionBatch sample_batch(CounterRng& rng, int step, const EnvConfig& config);
/// Batch of `step` on its dedicated stream for `seed`.
ImpressionBatch sample_batch(std::uint64_t seed, int step,
                             const EnvConfig& config);

struct AuctionResult {
  bool won = false;
  double precost = 0.0;
};

/// Second-price auction per impression: won iff multiplier * value is
/// strictly above the competitor price; ties lose.
std::vector<AuctionResult> run_auction(const ImpressionBatch& batch,
                                       double bid_multiplier);

struct StepOutcome {
  int wins = 0;
  int impressions = 0;
  double step_value = 0.0;
  double step_precost = 0.0;
  double step_payment = 0.0;
  double applied_offset = 0.0;  // per win
  bool budget_exhausted = false;
};

struct EnvState {
  EnvConfig config;
  std::uint64_t seed = 0;
  Ledger ledger;
  bool exhausted = false;
  ImpressionBatch batch;  // traffic of step ledger.t(), empty when terminal

  int t() const { return ledger.t(); }
  bool terminal() const { return exhausted || ledger.t() >= config.horizon; }
};

EnvState reset_env(const EnvConfig& config, std::uint64_t seed);

/// Runs the step's auctions, settles each win at settle_payment(c, a_p) and
/// advances the ledger. If a payment would overrun the budget, that and all
/// later impressions of the step are skipped and the episode ends.
/// Throws UsageError on a terminal state or out-of-bounds actions.
std::pair<EnvState, StepOutcome> env_step(const EnvState& state, double a_b,
                                          double a_p);

// -- policies ---------------------------------------------------------------

/// Everything a bidding policy may look at. No post-correction quantity.
struct BidObservation {
  int t = 0;
  int horizon = 0;
  StateView view;  // bid view
  double cum_value = 0.0;
  double cum_precost = 0.0;
  BatchSummary batch;
  double prev_bid = 0.0;
};

struct PriceObservation {
  int t = 0;
  int horizon = 0;
  StateView view;  // price view
  const Ledger* ledger = nullptr;
  double prev_bid = 0.0;
  double prev_price = 0.0;
};

BidObservation observe_bid(const EnvState& state, double prev_bid);
PriceObservation observe_price(const EnvState& state, double prev_bid,
                               double prev_price);

class BidPolicy {
 public:
  virtual ~BidPolicy() = default;
  virtual double bid(const BidObservation& obs) = 0;
  virtual std::unique_ptr<BidPolicy> clone() const = 0;
};

class PricingPolicy {
 public:
  virtual ~PricingPolicy() = default;
  virtual double price(const PriceObservation& obs) = 0;
  virtual std::unique_ptr<PricingPolicy> clone() const = 0;
};

/// A policy emitting both actions from one decision. The bid must be a
/// function of bid observations only.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;
  virtual Action act(const BidObservation& bid_obs,
                     const PriceObservation& price_obs) = 0;
  virtual std::unique_ptr<JointPolicy> clone() const = 0;
};

/// Pairs a bidding policy with a pricing policy.
class SplitPolicy final : public JointPolicy {
 public:
  SplitPolicy(std::unique_ptr<BidPolicy> bid,
              std::unique_ptr<PricingPolicy> price);
  Action act(const BidObservation& bid_obs,
             const PriceObservation& price_obs) override;
  std::unique_ptr<JointPolicy> clone() const override;

 private:
  std::unique_ptr<BidPolicy> bid_;
  std::unique_ptr<PricingPolicy> price_;
};

class ConstantBidPolicy final : public BidPolicy {
 public:
  explicit ConstantBidPolicy(double multiplier) : multiplier_(multiplier) {}
  double bid(const BidObservation&) override { return multiplier_; }
  std::unique_ptr<BidPolicy> clone() const override {
    return std::make_unique<ConstantBidPolicy>(*this);
  }

 private:
  double multiplier_;
};

class ZeroPricingPolicy final : public PricingPolicy {
 public:
  double price(const PriceObservation&) override { return 0.0; }
  std::unique_ptr<PricingPolicy> clone() const override {
    return std::make_unique<ZeroPricingPolicy>();
  }
};

// -- episodes ---------------------------------------------------------------

struct EpisodeStep {
  int t = 0;
  Action action;
  StepOutcome outcome;
  std::vector<double> bid_view;
  std::vector<double> price_view;
  // Ledger totals after the step.
  double cum_value = 0.0;
  double cum_precost = 0.0;
  double cum_correction = 0.0;
  double budget_spent = 0.0;
  double bal = 0.0;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::vector<EpisodeStep> steps;
  Ledger final_ledger;
  bool budget_exhausted = false;
};

/// Rolls one episode from reset to horizon or budget exhaustion. Throws
/// NumericError if the policy emits a non-finite action.
EpisodeLog run_episode(JointPolicy& policy, const EnvConfig& config,
                       std::uint64_t seed);
EpisodeLog run_episode(BidPolicy& bid_policy, PricingPolicy& pricing_policy,
                       const EnvConfig& config, std::uint64_t seed);

/// Line-delimited JSON, one step per line. Field order:
/// t, a_b, a_p, impressions, wins, value, precost, payment, offset,
/// cum_value, cum_precost, cum_correction, budget_spent, bal, exhausted.
void write_episode_log(const EpisodeLog& log, std::ostream& out);

}  // namespace jointbid
