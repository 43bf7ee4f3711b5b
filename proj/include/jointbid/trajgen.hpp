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

// Joint bidding/pricing trajectory augmentation.
//
// A base bidding policy is rolled through the environment while a PID
// controller supplies pricing offsets. At every step the environment is
// also snapshotted and rolled to the horizon with pricing switched off;
// the gap in pricing return between the two branches is the advantage.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jointbid/auction_env.hpp"
#include "jointbid/controllers.hpp"
#include "jointbid/rtg_metrics.hpp"

namespace jointbid {

struct TrajectoryStep {
  int t = 0;
  double R_b = 0.0;       // memoryless bidding return
  double R_b_hist = 0.0;  // historical-delivery bidding return
  double R_p = 0.0;       // pricing return, [0, 1]
  std::vector<double> s_bid;
  std::vector<double> s_price;
  double a_b = 0.0;
  double a_p = 0.0;
  double A = 0.0;
  double future_value = 0.0;  // sum of won value over [t, T)
  StepOutcome accounting;
};

struct JointTrajectory {
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;
  EpisodeSeries series;
  bool budget_exhausted = false;
};

/// Mid-episode environment state plus the action history the policies see.
struct EnvSnapshot {
  EnvState state;
  double prev_bid = 0.0;
  double prev_price = 0.0;
};

/// Pricing return of the branch that stops pricing at the snapshot step:
/// the snapshot's settled prefix followed by a zero-pricing rollout under
/// `base_policy` (already positioned at the snapshot). A terminal snapshot
/// has nothing left to correct and returns 1.
double counterfactual_return(const EnvSnapshot& snapshot,
                             const BidPolicy& base_policy);

/// Full counterfactual series for the snapshot (prefix + zero-pricing tail).
EpisodeSeries counterfactual_series(const EnvSnapshot& snapshot,
                                    const BidPolicy& base_policy);

JointTrajectory generate_joint_trajectory(const BidPolicy& base_policy,
                                          const EnvConfig& env_config,
                                          const ControllerConfig& pid_config,
                                          std::uint64_t seed);

EpisodeSeries series_of(const Ledger& ledger);

// -- dataset ------------------------------------------------------------------

inline constexpr double kFutureValueFloor = 0.5;

/// One step of one episode as stored on disk.
struct DatasetRecord {
  int episode = 0;
  std::uint64_t seed = 0;
  int t = 0;
  double R_b = 0.0;
  double R_b_hist = 0.0;
  double R_p = 0.0;
  double A = 0.0;
  double a_b = 0.0;
  double a_p = 0.0;
  double future_value = 0.0;
  std::vector<double> s_bid;
  std::vector<double> s_price;
  int wins = 0;
  int impressions = 0;
  double value = 0.0;
  double precost = 0.0;
  double payment = 0.0;

  bool operator==(const DatasetRecord&) const = default;
};

struct DatasetManifest {
  int episodes = 0;
  int horizon = 0;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  long stage1_records = 0;
  long dpo_records = 0;
  long dropped_zero_advantage = 0;
  long dropped_low_future_value = 0;
  double max_initial_rtg = 0.0;  // max over episodes of R_b at t = 0
  double advantage_threshold = 0.0;

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<DatasetRecord> stage1;    // every step of every episode
  std::vector<DatasetRecord> dpo_pool;  // filtered for preference pairs

  bool operator==(const Dataset&) const = default;
};

struct GenerationConfig {
  EnvConfig env;
  ControllerConfig controllers;
  int episodes = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  double advantage_threshold = 0.0;  // |A| <= threshold is dropped
};

/// Seed of episode i.
std::uint64_t episode_seed(std::uint64_t base_seed, int i);

/// Generates trajectories in parallel and assembles the dataset. The result
/// does not depend on the worker count.
Dataset generate_dataset(const GenerationConfig& config);

/// Applies the preference-pool filters: drop |A| <= threshold, then drop
/// future value below kFutureValueFloor. Updates the manifest counters.
std::vector<DatasetRecord> filter_dpo_pool(const std::vector<DatasetRecord>& all,
                                           double advantage_threshold,
                                           DatasetManifest& manifest);

/// Writes stage1.jsonl, dpo_pool.jsonl and manifest.json into `dir`. Each
/// file is written under a temporary name and renamed; the manifest last.
DatasetManifest build_dataset(const GenerationConfig& config,
                              const std::filesystem::path& dir);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string record_to_line(const DatasetRecord& r);
DatasetRecord record_from_line(const std::string& line);

/// Stage-1 records grouped per episode, each sorted by t.
std::map<int, std::vector<const DatasetRecord*>> group_by_episode(
    const std::vector<DatasetRecord>& records);

}  // namespace jointbid
