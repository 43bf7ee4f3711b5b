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

// Value-domain types and accounting rules shared by the simulator, the
// controllers, the trajectory generator and the model.
//
// Values are stored already multiplied by the advertiser's target cost
// ratio, so the cost constraint everywhere reads sum(cost) <= sum(value).

#include <cstdint>
#include <span>
#include <vector>

namespace jointbid {

struct Impression {
  double value = 0.0;             // target-scaled
  double competitor_price = 0.0;  // highest competing bid
};

struct ImpressionBatch {
  int step = 0;
  std::vector<Impression> impressions;
};

/// What a bidder may observe about the current step before bidding.
struct BatchSummary {
  int size = 0;
  double total_value = 0.0;

  double mean_value() const { return size > 0 ? total_value / size : 0.0; }
};

BatchSummary summarize(const ImpressionBatch& batch);

struct ConstraintSpec {
  double budget = 1000.0;
  double tcpa = 1.0;  // reporting scale only
  int horizon = 48;

  void validate() const;  // throws ConfigError
};

/// One step of settled accounting.
struct StepRecord {
  double value = 0.0;
  double precost = 0.0;     // sum of second prices over wins
  double correction = 0.0;  // sum of applied offsets, payment - precost
  int wins = 0;
  int impressions = 0;

  double payment() const { return precost + correction; }
};

/// Running account of one episode. Ledgers are values: `with_step` returns
/// the advanced ledger and leaves the receiver untouched.
class Ledger {
 public:
  Ledger() = default;
  explicit Ledger(double budget) : budget_(budget) {}

  [[nodiscard]] Ledger with_step(const StepRecord& rec) const;

  int t() const { return static_cast<int>(history_.size()); }
  double budget() const { return budget_; }
  double cum_value() const { return cum_value_; }
  double cum_precost() const { return cum_precost_; }
  double cum_correction() const { return cum_correction_; }
  double budget_spent() const { return budget_spent_; }
  double remaining_budget() const { return budget_ - budget_spent_; }
  long wins_total() const { return wins_total_; }
  /// Post-correction cost, sum(c + y).
  double cum_settled_cost() const { return cum_precost_ + cum_correction_; }
  std::span<const StepRecord> history() const { return history_; }

 private:
  double budget_ = 0.0;
  double cum_value_ = 0.0;
  double cum_precost_ = 0.0;
  double cum_correction_ = 0.0;
  double budget_spent_ = 0.0;
  long wins_total_ = 0;
  std::vector<StepRecord> history_;
};

/// Historical deficit: max(0, sum(c + y) - sum(v)) over settled steps.
double compute_bal(const Ledger& ledger);

/// Final per-impression payment max(0, precost + offset).
double settle_payment(double precost, double offset);

enum class ViewKind { kBid, kPrice };

inline constexpr int kBidViewDim = 14;
inline constexpr int kPriceViewDim = 17;
inline constexpr double kRatioClip = 10.0;

struct StateView {
  ViewKind kind = ViewKind::kBid;
  std::vector<double> features;
};

/// Normalizers for the feature views.
struct FeatureScale {
  int horizon = 48;
  double budget = 1000.0;
  double mean_batch_size = 16.0;
};

/// Ratio num/den clipped to [0, kRatioClip]; a zero denominator yields the
/// upper bound.
double clipped_ratio(double num, double den);

/// Bid view (14 features). Reads no post-correction quantity.
StateView bid_view_features(const Ledger& ledger, const BatchSummary& batch,
                            double prev_bid_action, const FeatureScale& scale);

/// Price view (17 features): the bid view followed by bal/B, sum(y)/B and
/// the post-correction cost ratio.
StateView price_view_features(const Ledger& ledger, const BatchSummary& batch,
                              double prev_bid_action,
                              const FeatureScale& scale);

struct ActionBounds {
  double a_max = 4.0;  // bid multiplier upper bound
  double p_max = 0.5;  // |price offset| bound
};

struct Action {
  double bid_multiplier = 0.0;
  double price_offset = 0.0;
};

Action clamp_action(const Action& a, const ActionBounds& bounds);

}  // namespace jointbid
