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

// PID controllers: the base bidding policy and the pricing-action generator
// used when augmenting trajectories.

#include <memory>
#include <utility>

#include "jointbid/auction_env.hpp"

namespace jointbid {

struct PidGains {
  double kp = 0.5;
  double ki = 0.1;
  double kd = 0.0;
  bool operator==(const PidGains&) const = default;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  PidGains gains;
  double out_lo = -1.0;
  double out_hi = 1.0;
  double integral_clamp = 5.0;  // |integral| bound (anti-windup)
};

/// One controller update. control = clamp(kp e + ki I' + kd (e - e_prev)),
/// I' = clamp(I + e).
std::pair<double, PidState> pid_step(const PidState& state, double error);

struct ControllerConfig {
  PidGains bid_gains;
  double bid_ref = 1.5;  // neutral bid multiplier
  double bid_out_lo = -0.9;
  double bid_out_hi = 2.0;
  double bid_integral_clamp = 20.0;

  PidGains price_gains;
  double price_integral_clamp = 5.0;

  void validate() const;  // throws ConfigError
  bool operator==(const ControllerConfig&) const = default;
};

PidState make_bid_pid(const ControllerConfig& config);
/// Pricing controller output is bounded by the offset bound p_max.
PidState make_price_pid(const ControllerConfig& config, double p_max);

/// Base bid rule: a_b = clamp(bid_ref * (1 + u), 0, a_max) with u the PID
/// response to the pre-correction cost gap 1 - clip(sum c / sum v). Returns
/// bid_ref and leaves the PID untouched until some value has accrued.
std::pair<double, PidState> base_bid_policy(const PidState& pid,
                                            const BidObservation& obs,
                                            double bid_ref, double a_max);

/// Pricing rule: a_p = clamp(-u, -p_max, p_max), u the PID response to the
/// relative post-correction gap (sum(c + y) - sum v) / max(sum v, 1e-6 B).
std::pair<double, PidState> pid_pricing_policy(const PidState& pid,
                                               const Ledger& ledger,
                                               int remaining_steps,
                                               double p_max);

class BaseBidPolicy final : public BidPolicy {
 public:
  BaseBidPolicy(const ControllerConfig& config, double a_max);
  double bid(const BidObservation& obs) override;
  std::unique_ptr<BidPolicy> clone() const override {
    return std::make_unique<BaseBidPolicy>(*this);
  }
  const PidState& pid() const { return pid_; }

 private:
  PidState pid_;
  double bid_ref_;
  double a_max_;
};

class PidPricingPolicy final : public PricingPolicy {
 public:
  PidPricingPolicy(const ControllerConfig& config, double p_max);
  double price(const PriceObservation& obs) override;
  std::unique_ptr<PricingPolicy> clone() const override {
    return std::make_unique<PidPricingPolicy>(*this);
  }
  const PidState& pid() const { return pid_; }

 private:
  PidState pid_;
  double p_max_;
};

}  // namespace jointbid
