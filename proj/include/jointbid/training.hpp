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

// Stage-1 supervised training of the dual-stream model on generated
// trajectories.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "jointbid/checkpoint.hpp"
#include "jointbid/model.hpp"
#include "jointbid/trajgen.hpp"

namespace jointbid {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  double weight_decay = 1e-4;
  double lambda_b = 1.0;
  double lambda_p = 1.0;
  int epochs = 50;
  std::uint64_t seed = 1;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws ConfigError
  bool operator==(const TrainConfig&) const = default;
};

/// One Adam step with decoupled decay on the tensors present in `grads`:
///   w <- (1 - wd) w - lr m_hat / (sqrt(v_hat) + eps)
void adamw_step(ModelParams& params, AdamState& state, const Tensors& grads,
                double lr, double weight_decay, double beta1, double beta2,
                double eps);

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(Tensors& grads, double max_norm);

/// Per-episode model inputs, bidding return chosen by `mode`.
std::vector<std::vector<StepInputs>> episode_inputs(
    const std::vector<DatasetRecord>& records, BidRtg mode);

/// Input and action scaling fitted on the stage-1 records.
Normalizer fit_normalizer(const std::vector<DatasetRecord>& records);

/// Sampling weights proportional to the rank (1 = lowest) of each episode's
/// initial bidding return; ties broken by episode order.
std::vector<double> rank_weights(const std::vector<double>& initial_returns);

/// Index drawn from a weight vector with one uniform in (0, 1).
int sample_index(const std::vector<double>& weights, double u);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  bool best = false;
};

struct TrainResult {
  Checkpoint best;  // lowest epoch loss
  Checkpoint last;
  std::vector<EpochLog> curve;
};

struct TrainHooks {
  int workers = 1;
  // When set, the best checkpoint is written here after every improving
  // epoch and on a non-finite loss.
  std::optional<std::filesystem::path> checkpoint_path;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Throws UsageError on an empty dataset and NumericError on a non-finite
/// loss (after persisting the last good checkpoint when a path is given).
TrainResult train_stage1(const std::vector<DatasetRecord>& records,
                         const ModelConfig& model_config,
                         const TrainConfig& train_config,
                         const TrainHooks& hooks = {});

/// Training from an existing parameter set (normaliser kept).
TrainResult train_from(const std::vector<DatasetRecord>& records,
                       ModelParams init, const TrainConfig& train_config,
                       const TrainHooks& hooks = {});

/// Deterministic fixed evaluation windows: for every episode, the window
/// ending at each step index divisible by `stride`.
std::vector<Window> evaluation_windows(
    const std::vector<std::vector<StepInputs>>& episodes, int K, int stride);

void write_loss_curve(const std::vector<EpochLog>& curve,
                      const std::filesystem::path& path);

}  // namespace jointbid
