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

// Exact hindsight solvers for small instances, by exhaustive enumeration.
//
//   original:  max sum x v  s.t.  sum x c <= B,  sum x c <= sum x v
//   joint:     max sum x v  s.t.  sum x (c + y) <= B,  sum x c <= sum x v,
//                                 sum x y + bal = 0
//   tightened: max sum x v  s.t.  sum x c <= B,  sum x v >= sum x c + bal
//
// The joint problem is solved directly: every selection is priced with the
// equal split y = -bal / |x| and all three constraints are checked on the
// priced selection.

#include <cstdint>
#include <optional>
#include <vector>

namespace jointbid {

inline constexpr int kOracleMaxItems = 24;
inline constexpr double kFeasibilityTol = 1e-9;

struct OracleItem {
  double v = 0.0;
  double c = 0.0;
};

struct OracleInstance {
  std::vector<OracleItem> items;
  double budget = 0.0;
  double bal = 0.0;
};

struct OptResult {
  double objective = 0.0;
  std::uint32_t selection = 0;  // bit i set iff item i selected
  bool feasible = true;
  std::optional<double> pricing;  // per-win offset, joint problem only

  int count() const;
  bool selected(int i) const { return (selection >> i) & 1u; }
};

/// Lexicographic order on selections read as (x_0, x_1, ...).
bool lex_less(std::uint32_t a, std::uint32_t b, int n);

OptResult solve_original(const OracleInstance& instance);
OptResult solve_joint(const OracleInstance& instance);
/// Original problem at the violation instant, with the deficit carried into
/// the KPI constraint. Infeasible instances report objective 0.
OptResult solve_tightened(const OracleInstance& instance);

/// (lambda0 + lambda1) * v: the single-constraint Lagrangian bid.
double lagrangian_bid(double v, double lambda0, double lambda1);

struct TheoremReport {
  bool equal_optima = false;
  bool pricing_feasible = false;
  bool corollary_holds = false;
  double joint_objective = 0.0;
  double relaxed_objective = 0.0;    // original problem with B + bal
  double tightened_objective = 0.0;

  bool all() const { return equal_optima && pricing_feasible && corollary_holds; }
};

TheoremReport verify_theorem1(const OracleInstance& instance);

/// Random instance with 1..max_items items. Every instance has at least one
/// item with c <= v and c <= B, so the joint problem has a non-empty
/// feasible selection.
OracleInstance random_instance(std::uint64_t seed, std::uint64_t index,
                               int max_items);

}  // namespace jointbid
