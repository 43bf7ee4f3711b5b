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

#include "jointbid/rtg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "jointbid/errors.hpp"

namespace jointbid {
namespace {

double sum_range(const std::vector<double>& xs, int lo, int hi) {
  lo = std::clamp(lo, 0, static_cast<int>(xs.size()));
  hi = std::clamp(hi, lo, static_cast<int>(xs.size()));
  return std::accumulate(xs.begin() + lo, xs.begin() + hi, 0.0);
}

void check_t(const EpisodeSeries& s, int t, int lo, int hi, const char* fn) {
  if (t < lo || t > hi) {
    throw UsageError(std::string(fn) + ": t=" + std::to_string(t) +
                     " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "] for T=" + std::to_string(s.size()));
  }
}

}  // namespace

void EpisodeSeries::validate() const {
  if (precosts.size() != values.size() || corrections.size() != values.size()) {
    throw UsageError("EpisodeSeries: arrays differ in length");
  }
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(),
                       [](double x) { return std::isfinite(x); });
  };
  if (!finite(values) || !finite(precosts) || !finite(corrections)) {
    throw UsageError("EpisodeSeries: non-finite entry");
  }
}

double penalized_value(double value, double cost) {
  if (value == 0.0) return 0.0;
  if (cost == 0.0) return value;
  const double r = value / cost;
  return std::min(r * r, 1.0) * value;
}

double rtg_bid_memoryless(const EpisodeSeries& s, int t) {
  check_t(s, t, 0, s.size(), "rtg_bid_memoryless");
  return penalized_value(sum_range(s.values, t, s.size()),
                         sum_range(s.precosts, t, s.size()));
}

double rtg_price(const EpisodeSeries& s, int t) {
  check_t(s, t, 0, s.size(), "rtg_price");
  const int T = s.size();
  const double V = sum_range(s.values, 0, T);
  const double C = sum_range(s.precosts, 0, T);
  const double P = C + sum_range(s.corrections, 0, T);
  if (P == 0.0 && V == 0.0) return 1.0;
  if (P == 0.0 || V == 0.0) return 0.0;
  const double base = std::clamp(std::min(V / P, P / V), 0.0, 1.0);

  const double future = sum_range(s.corrections, t, T);
  const double remaining = V - C - sum_range(s.corrections, 0, t + 1);
  const double eps = 1e-9 * std::abs(V);
  double ratio;
  if (std::abs(remaining) < eps || remaining == 0.0) {
    if (std::abs(future) < eps || future == 0.0) {
      ratio = 1.0;
    } else {
      ratio = (future > 0.0) == (remaining >= 0.0) ? 10.0 : -10.0;
    }
  } else {
    ratio = future / remaining;
  }
  const double exponent = 2.0 * std::abs(ratio - 1.0) + 1.0;
  const double r = std::pow(base, exponent);
  if (!std::isfinite(r)) return 0.0;
  return std::clamp(r, 0.0, 1.0);
}

double rtg_bid_historical(const EpisodeSeries& s, int t) {
  check_t(s, t, 1, s.size() + 1, "rtg_bid_historical");
  const int T = s.size();
  const double full =
      penalized_value(sum_range(s.values, 0, T), sum_range(s.precosts, 0, T));
  const double prefix = penalized_value(sum_range(s.values, 0, t - 1),
                                        sum_range(s.precosts, 0, t - 1));
  return full - prefix;
}

double score(std::span<const double> values, std::span<const double> costs) {
  if (values.size() != costs.size()) {
    throw UsageError("score: values and costs differ in length");
  }
  const double V = std::accumulate(values.begin(), values.end(), 0.0);
  const double C = std::accumulate(costs.begin(), costs.end(), 0.0);
  return penalized_value(V, C);
}

CpaReport cpa_report(std::span<const double> values,
                     std::span<const double> payments) {
  const double V = std::accumulate(values.begin(), values.end(), 0.0);
  const double P = std::accumulate(payments.begin(), payments.end(), 0.0);
  if (!(P > 0.0)) return {std::numeric_limits<double>::infinity(), false};
  const double ratio = V / P;
  return {ratio, ratio >= kCpaBandLo && ratio <= kCpaBandHi};
}

}  // namespace jointbid
