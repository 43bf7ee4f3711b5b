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

// Seeded rollout evaluation and ablation comparison.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jointbid/auction_env.hpp"
#include "jointbid/checkpoint.hpp"
#include "jointbid/controllers.hpp"
#include "jointbid/model.hpp"

namespace jointbid {

/// Return targets a model is conditioned on during rollouts. Unset bid
/// target means the largest initial bidding return seen in training.
struct EvalTargets {
  std::optional<double> bid_rtg;
  double price_rtg = 1.0;

  bool operator==(const EvalTargets&) const = default;
};

/// Return-conditioned model rollout policy. Both targets are held fixed
/// across the episode.
class ModelPolicy final : public JointPolicy {
 public:
  ModelPolicy(std::shared_ptr<const ModelParams> params, EvalTargets targets);
  Action act(const BidObservation& bid_obs,
             const PriceObservation& price_obs) override;
  std::unique_ptr<JointPolicy> clone() const override;

 private:
  std::shared_ptr<const ModelParams> params_;
  double bid_target_;
  double price_target_;
  std::vector<StepInputs> history_;
};

std::unique_ptr<JointPolicy> make_pid_policy(const ControllerConfig& config,
                                             const EnvConfig& env);
std::unique_ptr<JointPolicy> make_zero_bid_policy();

struct EvalRow {
  std::string policy;
  std::uint64_t seed = 0;
  double score_precost = 0.0;
  double score_payment = 0.0;
  double ratio = 0.0;  // sum v / sum payment; +inf when nothing was paid
  bool achieved = false;
  double budget_spent = 0.0;
  long wins = 0;
  double value = 0.0;
  double precost = 0.0;
  double payment = 0.0;

  bool operator==(const EvalRow&) const = default;
};

struct EvalSummary {
  std::string policy;
  int n = 0;
  double mean_score_precost = 0.0;
  double std_score_precost = 0.0;
  double mean_score_payment = 0.0;
  double std_score_payment = 0.0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
  double achievement_rate = 0.0;
  double mean_budget_spent = 0.0;
  double mean_wins = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summaries;  // one per policy, first-seen order
};

/// Summaries recomputed from rows.
std::vector<EvalSummary> summarize_rows(const std::vector<EvalRow>& rows);

EvalRow score_episode(const std::string& policy, const EpisodeLog& log);

/// One episode per seed, each with a fresh clone of `policy`.
EvalReport evaluate_policy(const std::string& name, const JointPolicy& policy,
                           const EnvConfig& env,
                           const std::vector<std::uint64_t>& seeds,
                           int workers = 1);

/// Concatenates reports and recomputes the summaries.
EvalReport merge_reports(const std::vector<EvalReport>& parts);

enum class Direction { kNegative = -1, kNeutral = 0, kPositive = 1 };

struct DirectionalFlag {
  std::string name;
  std::string claim;
  Direction direction = Direction::kNeutral;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AblationTable {
  EvalReport report;
  std::vector<DirectionalFlag> flags;
};

inline const std::vector<std::string> kAblationVariants = {"full", "no_gca",
                                                           "his_rtg", "stage1"};

/// Evaluates the four variants (plus the PID baseline when `pid` is given)
/// and derives the directional flags. Throws UsageError if a variant is
/// missing.
AblationTable ablation_suite(const EnvConfig& env,
                             const std::vector<std::uint64_t>& seeds,
                             const std::map<std::string, Checkpoint>& checkpoints,
                             const EvalTargets& targets,
                             const ControllerConfig* pid = nullptr,
                             int workers = 1);

/// Flags computed from summaries keyed by variant name.
std::vector<DirectionalFlag> directional_flags(
    const std::vector<EvalSummary>& summaries);

std::string format_double(double x);
double parse_double(const std::string& s);

void write_report(const EvalReport& report, const std::filesystem::path& dir,
                  const std::vector<DirectionalFlag>* flags = nullptr);
std::vector<EvalRow> read_rows_csv(const std::filesystem::path& path);
std::string ablation_text(const EvalReport& report,
                          const std::vector<DirectionalFlag>& flags);

}  // namespace jointbid
