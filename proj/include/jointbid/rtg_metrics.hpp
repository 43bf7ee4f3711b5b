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

// Return-to-go and evaluation formulas. Steps are 0-based: a series of
// length T covers steps 0..T-1, and "the future from t" is [t, T).

#include <span>
#include <vector>

namespace jointbid {

struct EpisodeSeries {
  std::vector<double> values;
  std::vector<double> precosts;
  std::vector<double> corrections;  // applied sum of y per step

  int size() const { return static_cast<int>(values.size()); }
  void validate() const;  // equal lengths, finite entries; throws UsageError
};

/// min((V / C)^2, 1) * V, with penalty 1 when C = 0.
double penalized_value(double value, double cost);

/// Memoryless bidding return from step t (0 <= t <= T) on pre-correction
/// costs. Never reads corrections.
double rtg_bid_memoryless(const EpisodeSeries& series, int t);

/// Pricing return at step t, always in [0, 1]:
///   base^(2 |F / D - 1| + 1)
/// with base = min(V/P, P/V) over the whole episode (P post-correction),
/// F = sum of y over [t, T) and D = V - C - sum of y over [0, t].
double rtg_price(const EpisodeSeries& series, int t);

/// Historical bidding return, 1-based t in [1, T + 1]: penalized value of
/// the whole episode minus that of the first t - 1 steps.
double rtg_bid_historical(const EpisodeSeries& series, int t);

double score(std::span<const double> values, std::span<const double> costs);

inline constexpr double kCpaBandLo = 0.8;
inline constexpr double kCpaBandHi = 1.2;

struct CpaReport {
  double ratio = 0.0;  // TCPA / CPA = sum v / sum payments
  bool achieved = false;
};

/// Zero total payment gives ratio +inf, not achieved.
CpaReport cpa_report(std::span<const double> values,
                     std::span<const double> payments);

}  // namespace jointbid
