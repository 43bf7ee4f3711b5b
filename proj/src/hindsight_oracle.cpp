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

#include "jointbid/hindsight_oracle.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "jointbid/errors.hpp"
#include "jointbid/rng.hpp"

namespace jointbid {
namespace {

void check_size(const OracleInstance& inst) {
  const auto n = inst.items.size();
  if (n > static_cast<std::size_t>(kOracleMaxItems)) {
    throw SizeError("oracle instance has " + std::to_string(n) +
                    " items; enumeration bound is " +
                    std::to_string(kOracleMaxItems));
  }
}

struct Sums {
  double v = 0.0;
  double c = 0.0;
  int k = 0;
};

Sums sums_of(const OracleInstance& inst, std::uint32_t mask) {
  Sums s;
  const int n = static_cast<int>(inst.items.size());
  for (int i = 0; i < n; ++i) {
    if ((mask >> i) & 1u) {
      s.v += inst.items[i].v;
      s.c += inst.items[i].c;
      ++s.k;
    }
  }
  return s;
}

// Enumerates every selection and keeps the best feasible one; ties go to
// the lexicographically smallest selection.
template <typename Feasible>
OptResult enumerate(const OracleInstance& inst, Feasible&& feasible) {
  check_size(inst);
  const int n = static_cast<int>(inst.items.size());
  const std::uint32_t end = 1u << n;
  OptResult best;
  best.feasible = false;
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    const Sums s = sums_of(inst, mask);
    if (!feasible(mask, s)) continue;
    if (!best.feasible || s.v > best.objective ||
        (s.v == best.objective && lex_less(mask, best.selection, n))) {
      best.feasible = true;
      best.objective = s.v;
      best.selection = mask;
    }
  }
  if (!best.feasible) {
    best.objective = 0.0;
    best.selection = 0;
  }
  return best;
}

}  // namespace

int OptResult::count() const { return std::popcount(selection); }

bool lex_less(std::uint32_t a, std::uint32_t b, int n) {
  for (int i = 0; i < n; ++i) {
    const bool ai = (a >> i) & 1u;
    const bool bi = (b >> i) & 1u;
    if (ai != bi) return !ai;
  }
  return false;
}

OptResult solve_original(const OracleInstance& inst) {
  return enumerate(inst, [&](std::uint32_t, const Sums& s) {
    return s.c <= inst.budget + kFeasibilityTol && s.c <= s.v + kFeasibilityTol;
  });
}

OptResult solve_joint(const OracleInstance& inst) {
  const int n = static_cast<int>(inst.items.size());
  OptResult r = enumerate(inst, [&](std::uint32_t mask, const Sums& s) {
    if (s.k == 0) return inst.bal == 0.0;
    const double y = -inst.bal / s.k;
    double settled = 0.0;
    double offsets = 0.0;
    for (int i = 0; i < n; ++i) {
      if ((mask >> i) & 1u) {
        settled += inst.items[i].c + y;
        offsets += y;
      }
    }
    return settled <= inst.budget + kFeasibilityTol &&
           s.c <= s.v + kFeasibilityTol &&
           std::abs(offsets + inst.bal) <= kFeasibilityTol;
  });
  if (r.feasible) {
    r.pricing = r.count() > 0 ? -inst.bal / r.count() : 0.0;
  }
  return r;
}

OptResult solve_tightened(const OracleInstance& inst) {
  return enumerate(inst, [&](std::uint32_t, const Sums& s) {
    return s.c <= inst.budget + kFeasibilityTol &&
           s.v + kFeasibilityTol >= s.c + inst.bal;
  });
}

double lagrangian_bid(double v, double lambda0, double lambda1) {
  return (lambda0 + lambda1) * v;
}

TheoremReport verify_theorem1(const OracleInstance& inst) {
  TheoremReport rep;
  const OptResult joint = solve_joint(inst);
  OracleInstance relaxed_inst = inst;
  relaxed_inst.budget = inst.budget + inst.bal;
  relaxed_inst.bal = 0.0;
  const OptResult relaxed = solve_original(relaxed_inst);
  const OptResult tightened = solve_tightened(inst);

  rep.joint_objective = joint.objective;
  rep.relaxed_objective = relaxed.objective;
  rep.tightened_objective = tightened.objective;

  if (joint.feasible) {
    rep.equal_optima = joint.objective == relaxed.objective;
    if (joint.count() == 0) {
      rep.pricing_feasible = inst.bal == 0.0;
    } else {
      double total = 0.0;
      for (int i = 0; i < static_cast<int>(inst.items.size()); ++i) {
        if (joint.selected(i)) total += *joint.pricing;
      }
      rep.pricing_feasible = std::abs(total + inst.bal) <= kFeasibilityTol;
    }
  } else {
    // No priced selection exists; the reduction then leaves only the empty
    // selection for the relaxed problem too.
    rep.equal_optima = relaxed.selection == 0;
    rep.pricing_feasible = false;
  }
  rep.corollary_holds =
      tightened.objective <= joint.objective + kFeasibilityTol;
  return rep;
}

OracleInstance random_instance(std::uint64_t seed, std::uint64_t index,
                               int max_items) {
  CounterRng rng(seed, kAuxStreamBase + index);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  OracleInstance inst;
  const int n = 1 + static_cast<int>(rng.uniform() * max_items);
  double total_c = 0.0;
  for (int i = 0; i < n; ++i) {
    OracleItem it{uni(0.1, 2.0), uni(0.05, 2.5)};
    total_c += it.c;
    inst.items.push_back(it);
  }
  inst.budget = uni(0.2, 1.0) * total_c + 0.1;
  inst.bal = rng.uniform() < 0.8 ? uni(0.0, 1.5) : 0.0;

  bool has_anchor = false;
  for (const auto& it : inst.items) {
    has_anchor |= it.c <= it.v && it.c <= inst.budget;
  }
  if (!has_anchor) {
    auto& it = inst.items[0];
    it.c = uni(0.05, 1.0) * std::min(it.v, inst.budget);
  }
  return inst;
}

}  // namespace jointbid
