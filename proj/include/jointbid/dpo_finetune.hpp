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

// Preference fine-tuning of the pricing head with an L1-energy objective.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jointbid/checkpoint.hpp"
#include "jointbid/model.hpp"
#include "jointbid/trajgen.hpp"

namespace jointbid {

struct PreferencePair {
  Window window;
  double a_plus = 0.0;
  double a_minus = 0.0;
  double advantage = 0.0;
  int episode = 0;
  int t = 0;
};

struct DpoConfig {
  double beta = 0.15;
  int epochs = 3;
  double learning_rate = 1e-5;
  double advantage_threshold = 0.0;
  int batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  bool operator==(const DpoConfig&) const = default;
};

/// Pairs from records with |A| > threshold and future value >= 0.5:
/// A > threshold gives (applied a_p, 0), A < -threshold gives (0, applied
/// a_p). Records whose two actions coincide are dropped. Windows are cut
/// from the full stage-1 episodes.
std::vector<PreferencePair> build_preference_pairs(
    const std::vector<DatasetRecord>& stage1, const ModelConfig& model,
    double advantage_threshold);

/// |a_ref - y| - |a - y|.
double similarity(double a, double a_ref, double y_target);

/// -log sigmoid(beta (S(a, a_plus) - S(a, a_minus))).
double energy_dpo_loss(double a, double a_ref, double a_plus, double a_minus,
                       double beta);

/// Only pricing-stream and cross-attention tensors are updated.
bool dpo_trainable(const std::string& tensor_name);

/// Reference pricing outputs (raw, unclamped) at each pair's last step.
std::vector<double> reference_outputs(const ModelParams& ref,
                                      const std::vector<PreferencePair>& pairs,
                                      int workers = 1);

struct DpoLossGrad {
  double loss = 0.0;  // mean over the batch
  Tensors grads;
};

DpoLossGrad dpo_loss_and_grad(const ModelParams& params,
                              const std::vector<const PreferencePair*>& batch,
                              const std::vector<double>& a_ref, double beta,
                              int workers = 1);

struct DpoEpochLog {
  int epoch = 0;
  double loss = 0.0;          // mean training loss over the epoch
  double mean_gap_plus = 0.0; // mean |a - a_plus| after the epoch
};

struct DpoResult {
  Checkpoint checkpoint;
  std::vector<DpoEpochLog> curve;
  double initial_gap_plus = 0.0;
};

/// Throws UsageError on an empty pair set.
DpoResult finetune(const Checkpoint& start,
                   const std::vector<PreferencePair>& pairs,
                   const DpoConfig& config, int workers = 1,
                   const std::function<void(const DpoEpochLog&)>& on_epoch = {});

}  // namespace jointbid
