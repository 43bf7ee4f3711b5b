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

#include "jointbid/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "jointbid/errors.hpp"

namespace jointbid {

std::pair<double, PidState> pid_step(const PidState& state, double error) {
  PidState next = state;
  next.integral = std::clamp(state.integral + error, -state.integral_clamp,
                             state.integral_clamp);
  const double raw = state.gains.kp * error + state.gains.ki * next.integral +
                     state.gains.kd * (error - state.prev_error);
  next.prev_error = error;
  return {std::clamp(raw, state.out_lo, state.out_hi), next};
}

void ControllerConfig::validate() const {
  auto finite_gains = [](const PidGains& g) {
    return std::isfinite(g.kp) && std::isfinite(g.ki) && std::isfinite(g.kd);
  };
  if (!finite_gains(bid_gains)) throw ConfigError("controllers.bid: gains must be finite");
  if (!finite_gains(price_gains))
    throw ConfigError("controllers.price: gains must be finite");
  if (!(bid_ref > 0.0)) throw ConfigError("controllers.bid_ref: must be > 0");
  if (!(bid_out_lo <= bid_out_hi))
    throw ConfigError("controllers.bid_out_lo: must be <= bid_out_hi");
  if (!(bid_integral_clamp >= 0.0))
    throw ConfigError("controllers.bid_integral_clamp: must be >= 0");
  if (!(price_integral_clamp >= 0.0))
    throw ConfigError("controllers.price_integral_clamp: must be >= 0");
}

PidState make_bid_pid(const ControllerConfig& config) {
  PidState s;
  s.gains = config.bid_gains;
  s.out_lo = config.bid_out_lo;
  s.out_hi = config.bid_out_hi;
  s.integral_clamp = config.bid_integral_clamp;
  return s;
}

PidState make_price_pid(const ControllerConfig& config, double p_max) {
  PidState s;
  s.gains = config.price_gains;
  s.out_lo = -p_max;
  s.out_hi = p_max;
  s.integral_clamp = config.price_integral_clamp;
  return s;
}

std::pair<double, PidState> base_bid_policy(const PidState& pid,
                                            const BidObservation& obs,
                                            double bid_ref, double a_max) {
  if (!(obs.cum_value > 0.0)) return {std::clamp(bid_ref, 0.0, a_max), pid};
  const double error = 1.0 - clipped_ratio(obs.cum_precost, obs.cum_value);
  auto [u, next] = pid_step(pid, error);
  return {std::clamp(bid_ref * (1.0 + u), 0.0, a_max), next};
}

std::pair<double, PidState> pid_pricing_policy(const PidState& pid,
                                               const Ledger& ledger,
                                               int remaining_steps,
                                               double p_max) {
  if (remaining_steps < 1) {
    throw UsageError("pid_pricing_policy needs at least one remaining step");
  }
  const double value = ledger.cum_value();
  if (!(value > 0.0)) return {0.0, pid};
  const double eps = 1e-6 * ledger.budget();
  const double error = (ledger.cum_settled_cost() - value) / std::max(value, eps);
  auto [u, next] = pid_step(pid, error);
  return {std::clamp(-u, -p_max, p_max) + 0.0, next};
}

BaseBidPolicy::BaseBidPolicy(const ControllerConfig& config, double a_max)
    : pid_(make_bid_pid(config)), bid_ref_(config.bid_ref), a_max_(a_max) {}

double BaseBidPolicy::bid(const BidObservation& obs) {
  auto [a, next] = base_bid_policy(pid_, obs, bid_ref_, a_max_);
  pid_ = next;
  return a;
}

PidPricingPolicy::PidPricingPolicy(const ControllerConfig& config, double p_max)
    : pid_(make_price_pid(config, p_max)), p_max_(p_max) {}

double PidPricingPolicy::price(const PriceObservation& obs) {
  auto [a, next] =
      pid_pricing_policy(pid_, *obs.ledger, obs.horizon - obs.t, p_max_);
  pid_ = next;
  return a;
}

}  // namespace jointbid
