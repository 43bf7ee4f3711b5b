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

#include "jointbid/domain.hpp"

#include <algorithm>
#include <cmath>

#include "jointbid/errors.hpp"

namespace jointbid {

BatchSummary summarize(const ImpressionBatch& batch) {
  BatchSummary s;
  s.size = static_cast<int>(batch.impressions.size());
  for (const auto& imp : batch.impressions) s.total_value += imp.value;
  return s;
}

void ConstraintSpec::validate() const {
  if (!(budget > 0.0)) throw ConfigError("budget must be > 0");
  if (!(tcpa > 0.0)) throw ConfigError("tcpa must be > 0");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

Ledger Ledger::with_step(const StepRecord& rec) const {
  Ledger next = *this;
  next.cum_value_ += rec.value;
  next.cum_precost_ += rec.precost;
  next.cum_correction_ += rec.correction;
  next.budget_spent_ += rec.payment();
  next.wins_total_ += rec.wins;
  next.history_.push_back(rec);
  return next;
}

double compute_bal(const Ledger& ledger) {
  return std::max(0.0, ledger.cum_settled_cost() - ledger.cum_value());
}

double settle_payment(double precost, double offset) {
  return std::max(0.0, precost + offset);
}

double clipped_ratio(double num, double den) {
  if (!(den > 0.0)) return kRatioClip;
  return std::clamp(num / den, 0.0, kRatioClip);
}

namespace {

double finite_or_zero(double x) { return std::isfinite(x) ? x : 0.0; }

}  // namespace

StateView bid_view_features(const Ledger& ledger, const BatchSummary& batch,
                            double prev_bid_action, const FeatureScale& scale) {
  const double T = scale.horizon;
  const double B = scale.budget;
  const double per_step_budget = B / T;
  const int t = ledger.t();
  const auto hist = ledger.history();

  StepRecord last;
  if (!hist.empty()) last = hist.back();
  double recent_value = 0.0;
  double recent_cost = 0.0;
  for (std::size_t i = hist.size() >= 3 ? hist.size() - 3 : 0; i < hist.size();
       ++i) {
    recent_value += hist[i].value;
    recent_cost += hist[i].precost;
  }

  StateView v;
  v.kind = ViewKind::kBid;
  v.features = {
      t / T,
      (T - t) / T,
      last.precost / B,
      ledger.cum_value() / B,
      ledger.cum_precost() / B,
      clipped_ratio(ledger.cum_precost(), ledger.cum_value()),
      last.impressions > 0 ? static_cast<double>(last.wins) / last.impressions
                           : 0.0,
      last.wins > 0 ? (last.precost / last.wins) / per_step_budget : 0.0,
      recent_value / B,
      recent_cost / B,
      batch.mean_value() / per_step_budget,
      batch.size / scale.mean_batch_size,
      prev_bid_action,
      1.0,
  };
  for (double& f : v.features) f = finite_or_zero(f);
  return v;
}

StateView price_view_features(const Ledger& ledger, const BatchSummary& batch,
                              double prev_bid_action,
                              const FeatureScale& scale) {
  StateView v = bid_view_features(ledger, batch, prev_bid_action, scale);
  v.kind = ViewKind::kPrice;
  const double B = scale.budget;
  v.features.push_back(finite_or_zero(compute_bal(ledger) / B));
  v.features.push_back(finite_or_zero(ledger.cum_correction() / B));
  v.features.push_back(
      clipped_ratio(ledger.cum_settled_cost(), ledger.cum_value()));
  return v;
}

Action clamp_action(const Action& a, const ActionBounds& bounds) {
  return {std::clamp(a.bid_multiplier, 0.0, bounds.a_max),
          std::clamp(a.price_offset, -bounds.p_max, bounds.p_max)};
}

}  // namespace jointbid
