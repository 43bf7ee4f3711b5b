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

#include "jointbid/dpo_finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointbid/errors.hpp"
#include "jointbid/parallel.hpp"
#include "jointbid/rng.hpp"
#include "jointbid/training.hpp"

namespace jointbid {
namespace {

/// Pricing output (raw units) at the last valid step, on the tape.
Var last_price(Binding& b, const Window& w) {
  const Normalizer& nz = b.params().norm;
  ForwardOut out = forward_window(b, w);
  Var z = slice_rows(out.a_p, out.a_p.rows() - 1, 1);
  Mat mean(1, 1);
  mean(0, 0) = nz.ap_mean;
  return add(scale(z, nz.ap_std), b.tape().constant(std::move(mean)));
}

double mean_gap_plus(const ModelParams& params,
                     const std::vector<PreferencePair>& pairs, int workers) {
  const std::vector<double> a = reference_outputs(params, pairs, workers);
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    total += std::abs(a[i] - pairs[i].a_plus);
  }
  return pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
}

}  // namespace

void DpoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("dpo.beta: must be finite and > 0");
  }
  if (epochs < 0) throw ConfigError("dpo.epochs: must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("dpo.learning_rate: must be finite and >= 0");
  }
  if (!(advantage_threshold >= 0.0)) {
    throw ConfigError("dpo.advantage_threshold: must be >= 0");
  }
  if (batch_size < 1) throw ConfigError("dpo.batch_size: must be >= 1");
  if (!(weight_decay >= 0.0 && weight_decay < 1.0)) {
    throw ConfigError("dpo.weight_decay: must be in [0, 1)");
  }
}

std::vector<PreferencePair> build_preference_pairs(
    const std::vector<DatasetRecord>& stage1, const ModelConfig& model,
    double advantage_threshold) {
  std::vector<PreferencePair> pairs;
  for (const auto& [episode, steps] : group_by_episode(stage1)) {
    std::vector<StepInputs> history;
    for (const DatasetRecord* r : steps) {
      StepInputs s;
      s.t = r->t;
      s.R_b = model.bid_rtg == BidRtg::kHistorical ? r->R_b_hist : r->R_b;
      s.R_p = r->R_p;
      s.s_bid = r->s_bid;
      s.s_price = r->s_price;
      s.a_b = r->a_b;
      s.a_p = r->a_p;
      history.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const DatasetRecord& r = *steps[i];
      if (std::abs(r.A) <= advantage_threshold) continue;
      if (r.future_value < kFutureValueFloor) continue;
      PreferencePair p;
      if (r.A > 0.0) {
        p.a_plus = r.a_p;
        p.a_minus = 0.0;
      } else {
        p.a_plus = 0.0;
        p.a_minus = r.a_p;
      }
      if (p.a_plus == p.a_minus) continue;
      p.advantage = r.A;
      p.episode = episode;
      p.t = r.t;
      p.window = make_window(history, static_cast<int>(i), model.context);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

double similarity(double a, double a_ref, double y_target) {
  return std::abs(a_ref - y_target) - std::abs(a - y_target);
}

double energy_dpo_loss(double a, double a_ref, double a_plus, double a_minus,
                       double beta) {
  const double x = beta * (similarity(a, a_ref, a_plus) -
                           similarity(a, a_ref, a_minus));
  // -log sigmoid(x) = softplus(-x)
  return x < 0.0 ? -x + std::log1p(std::exp(x)) : std::log1p(std::exp(-x));
}

bool dpo_trainable(const std::string& name) {
  return name.starts_with("price.") || name.starts_with("gca.");
}

std::vector<double> reference_outputs(const ModelParams& ref,
                                      const std::vector<PreferencePair>& pairs,
                                      int workers) {
  return parallel_map(static_cast<int>(pairs.size()), workers, [&](int i) {
    return forward_all(ref, pairs[i].window).a_p.back();
  });
}

DpoLossGrad dpo_loss_and_grad(const ModelParams& params,
                              const std::vector<const PreferencePair*>& batch,
                              const std::vector<double>& a_ref, double beta,
                              int workers) {
  if (batch.size() != a_ref.size()) {
    throw UsageError("dpo_loss_and_grad: batch and reference sizes differ");
  }
  struct Part {
    double loss = 0.0;
    Tensors grads;
  };
  auto parts = parallel_map(static_cast<int>(batch.size()), workers, [&](int i) {
    const PreferencePair& p = *batch[i];
    Tape tape;
    Binding b(tape, params, dpo_trainable);
    Var a = last_price(b, p.window);
    auto constant = [&](double x) {
      Mat m(1, 1);
      m(0, 0) = x;
      return tape.constant(std::move(m));
    };
    // S(a, a+) - S(a, a-) up to terms constant in a.
    Var x = sub(abs(sub(a, constant(p.a_minus))), abs(sub(a, constant(p.a_plus))));
    const double offset =
        std::abs(a_ref[i] - p.a_plus) - std::abs(a_ref[i] - p.a_minus);
    Var arg = add(scale(x, -beta), constant(-beta * offset));
    Var loss = softplus(arg);
    tape.backward(loss);
    Part part;
    part.loss = loss.scalar();
    b.accumulate_grads(part.grads);
    return part;
  });
  DpoLossGrad out;
  if (batch.empty()) return out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (Part& p : parts) {
    out.loss += p.loss;
    for (auto& [name, g] : p.grads) {
      auto it = out.grads.find(name);
      if (it == out.grads.end()) {
        out.grads.emplace(name, std::move(g));
      } else {
        it->second += g;
      }
    }
  }
  out.loss *= inv;
  for (auto& [_, g] : out.grads) g *= inv;
  return out;
}

DpoResult finetune(const Checkpoint& start,
                   const std::vector<PreferencePair>& pairs,
                   const DpoConfig& config, int workers,
                   const std::function<void(const DpoEpochLog&)>& on_epoch) {
  config.validate();
  if (pairs.empty()) throw UsageError("dpo: the preference pair set is empty");

  DpoResult result;
  result.checkpoint = start;
  result.checkpoint.optimizer = AdamState{};
  ModelParams& live = result.checkpoint.params;
  const std::vector<double> a_ref = reference_outputs(start.params, pairs, workers);
  {
    double total = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      total += std::abs(a_ref[i] - pairs[i].a_plus);
    }
    result.initial_gap_plus = total / static_cast<double>(pairs.size());
  }
  if (config.epochs == 0) {
    result.checkpoint = start;
    return result;
  }

  CounterRng rng(config.seed, kAuxStreamBase + 4);
  std::vector<int> order(pairs.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = std::min(
          static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)), i - 1);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t hi =
          std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      std::vector<const PreferencePair*> batch;
      std::vector<double> refs;
      for (std::size_t k = lo; k < hi; ++k) {
        batch.push_back(&pairs[order[k]]);
        refs.push_back(a_ref[order[k]]);
      }
      DpoLossGrad lg = dpo_loss_and_grad(live, batch, refs, config.beta, workers);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("dpo: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss;
      ++steps;
      adamw_step(live, result.checkpoint.optimizer, lg.grads,
                 config.learning_rate, config.weight_decay, 0.9, 0.999, 1e-8);
    }
    DpoEpochLog log;
    log.epoch = epoch;
    log.loss = epoch_loss / static_cast<double>(steps);
    log.mean_gap_plus = mean_gap_plus(live, pairs, workers);
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.checkpoint.epoch = start.epoch;
  result.checkpoint.loss = result.curve.back().loss;
  return result;
}

}  // namespace jointbid
