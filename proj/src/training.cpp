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

#include "jointbid/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "jointbid/errors.hpp"
#include "jointbid/rng.hpp"
#include "json.hpp"

namespace jointbid {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate: must be finite and >= 0");
  }
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(weight_decay >= 0.0) || !(weight_decay < 1.0)) {
    throw ConfigError("train.weight_decay: must be in [0, 1)");
  }
  if (!std::isfinite(lambda_b) || lambda_b < 0.0) {
    throw ConfigError("train.lambda_b: must be finite and >= 0");
  }
  if (!std::isfinite(lambda_p) || lambda_p < 0.0) {
    throw ConfigError("train.lambda_p: must be finite and >= 0");
  }
  if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
  if (!std::isfinite(grad_clip)) throw ConfigError("train.grad_clip: must be finite");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1: must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2: must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps: must be > 0");
}

void adamw_step(ModelParams& params, AdamState& state, const Tensors& grads,
                double lr, double weight_decay, double beta1, double beta2,
                double eps) {
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Mat& w = params.at(name);
    auto [mit, m_new] = state.m.try_emplace(name, Mat::Zero(w.rows(), w.cols()));
    auto [vit, v_new] = state.v.try_emplace(name, Mat::Zero(w.rows(), w.cols()));
    Mat& m = mit->second;
    Mat& v = vit->second;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    const Mat update =
        ((m.array() / c1) / ((v.array() / c2).sqrt() + eps)).matrix();
    w = (1.0 - weight_decay) * w - lr * update;
  }
}

double clip_grad_norm(Tensors& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, g] : grads) g *= s;
  }
  return norm;
}

std::vector<std::vector<StepInputs>> episode_inputs(
    const std::vector<DatasetRecord>& records, BidRtg mode) {
  std::vector<std::vector<StepInputs>> out;
  for (const auto& [_, steps] : group_by_episode(records)) {
    std::vector<StepInputs> ep;
    for (const DatasetRecord* r : steps) {
      StepInputs s;
      s.t = r->t;
      s.R_b = mode == BidRtg::kHistorical ? r->R_b_hist : r->R_b;
      s.R_p = r->R_p;
      s.s_bid = r->s_bid;
      s.s_price = r->s_price;
      s.a_b = r->a_b;
      s.a_p = r->a_p;
      ep.push_back(std::move(s));
    }
    out.push_back(std::move(ep));
  }
  return out;
}

Normalizer fit_normalizer(const std::vector<DatasetRecord>& records) {
  Normalizer n;
  if (records.empty()) return n;
  double max_rtg = 0.0;
  double sb = 0.0, sp = 0.0;
  for (const auto& r : records) {
    if (r.t == 0) max_rtg = std::max(max_rtg, r.R_b);
    sb += r.a_b;
    sp += r.a_p;
  }
  const double count = static_cast<double>(records.size());
  n.rtg_scale = max_rtg > 0.0 ? max_rtg : 1.0;
  n.ab_mean = sb / count;
  n.ap_mean = sp / count;
  double vb = 0.0, vp = 0.0;
  for (const auto& r : records) {
    vb += (r.a_b - n.ab_mean) * (r.a_b - n.ab_mean);
    vp += (r.a_p - n.ap_mean) * (r.a_p - n.ap_mean);
  }
  const double sdb = std::sqrt(vb / count);
  const double sdp = std::sqrt(vp / count);
  n.ab_std = sdb > 1e-6 ? sdb : 1.0;
  n.ap_std = sdp > 1e-6 ? sdp : 1.0;
  return n;
}

std::vector<double> rank_weights(const std::vector<double>& initial_returns) {
  const std::size_t n = initial_returns.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return initial_returns[a] < initial_returns[b];
  });
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[order[r]] = static_cast<double>(r + 1);
  return w;
}

int sample_index(const std::vector<double>& weights, double u) {
  if (weights.empty()) throw UsageError("sample_index: no weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double target = u * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<Window> evaluation_windows(
    const std::vector<std::vector<StepInputs>>& episodes, int K, int stride) {
  std::vector<Window> out;
  for (const auto& ep : episodes) {
    for (int end = 0; end < static_cast<int>(ep.size()); ++end) {
      if (end % stride == stride - 1 || end + 1 == static_cast<int>(ep.size())) {
        out.push_back(make_window(ep, end, K));
      }
    }
  }
  return out;
}

TrainResult train_from(const std::vector<DatasetRecord>& records,
                       ModelParams init, const TrainConfig& tc,
                       const TrainHooks& hooks) {
  tc.validate();
  init.config.validate();
  if (records.empty()) throw UsageError("train: the stage-1 dataset is empty");
  const auto episodes = episode_inputs(records, init.config.bid_rtg);
  std::vector<double> initial;
  for (const auto& ep : episodes) initial.push_back(ep.front().R_b);
  const std::vector<double> weights = rank_weights(initial);

  CounterRng rng(tc.seed, kAuxStreamBase + 3);
  const int steps_per_epoch =
      (static_cast<int>(episodes.size()) + tc.batch_size - 1) / tc.batch_size;

  TrainResult result;
  Checkpoint current;
  current.params = std::move(init);
  result.best = current;
  result.best.loss = std::numeric_limits<double>::infinity();
  bool have_best = false;

  auto persist_best = [&] {
    if (hooks.checkpoint_path && have_best) {
      save_checkpoint(result.best, *hooks.checkpoint_path);
    }
  };

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<Window> windows;
      windows.reserve(tc.batch_size);
      for (int i = 0; i < tc.batch_size; ++i) {
        const auto& ep = episodes[sample_index(weights, rng.uniform())];
        const int end = std::min(
            static_cast<int>(rng.uniform() * static_cast<double>(ep.size())),
            static_cast<int>(ep.size()) - 1);
        windows.push_back(make_window(ep, end, current.params.config.context));
      }
      std::vector<const Window*> batch;
      for (const auto& w : windows) batch.push_back(&w);
      LossGrad lg = loss_and_grad(current.params, batch, tc.lambda_b,
                                  tc.lambda_p, {}, hooks.workers);
      if (!std::isfinite(lg.loss)) {
        persist_best();
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(step) +
                           (have_best ? "; last good checkpoint kept" : ""));
      }
      epoch_loss += lg.loss;
      clip_grad_norm(lg.grads, tc.grad_clip);
      adamw_step(current.params, current.optimizer, lg.grads, tc.learning_rate,
                 tc.weight_decay, tc.beta1, tc.beta2, tc.adam_eps);
    }
    epoch_loss /= static_cast<double>(steps_per_epoch);
    current.epoch = epoch;
    current.loss = epoch_loss;
    EpochLog log{epoch, epoch_loss, false};
    if (!have_best || epoch_loss < result.best.loss) {
      result.best = current;
      have_best = true;
      log.best = true;
      persist_best();
    }
    result.curve.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  if (!have_best) {
    result.best = current;
    result.best.loss = 0.0;
  }
  result.last = std::move(current);
  return result;
}

TrainResult train_stage1(const std::vector<DatasetRecord>& records,
                         const ModelConfig& model_config,
                         const TrainConfig& train_config,
                         const TrainHooks& hooks) {
  if (records.empty()) throw UsageError("train: the stage-1 dataset is empty");
  ModelParams init = init_params(model_config);
  init.norm = fit_normalizer(records);
  return train_from(records, std::move(init), train_config, hooks);
}

void write_loss_curve(const std::vector<EpochLog>& curve,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,best\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << nlohmann::json(e.train_loss).dump() << ','
        << (e.best ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace jointbid
