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

// Dual-stream return-conditioned causal transformer.
//
// Each stream turns a window of steps into tokens (R, s, a) per step and
// runs pre-norm causal self-attention over them. Actions are read at the
// state token. The pricing stream is run twice: the first pass provides a
// query for gated cross-attention over the bidding stream's hiddens, whose
// result is added to each step's state token before the second pass. The
// bidding output never depends on anything from the pricing stream.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jointbid/autodiff.hpp"
#include "jointbid/domain.hpp"

namespace jointbid {

enum class BidRtg { kMemoryless, kHistorical };

const char* to_string(BidRtg mode);
BidRtg bid_rtg_from_string(const std::string& s);  // throws ConfigError

struct ModelConfig {
  int d_model = 64;
  int layers = 2;
  int heads = 2;
  int context = 20;  // K, steps per window
  int horizon = 48;  // rows of the timestep table
  int bid_dim = kBidViewDim;
  int price_dim = kPriceViewDim;
  int mlp_ratio = 4;
  bool gca = true;
  // Keys and values from the pricing pass-1 hidden instead of the gated
  // bidding sequence.
  bool gca_literal = false;
  bool head_layernorm = true;
  double init_scale = 1.0;
  double a_max = 4.0;
  double p_max = 0.5;
  BidRtg bid_rtg = BidRtg::kMemoryless;
  std::uint64_t init_seed = 1;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

/// Input/output scaling learned from the training set.
struct Normalizer {
  double rtg_scale = 1.0;  // bidding returns are divided by this
  double ab_mean = 0.0;
  double ab_std = 1.0;
  double ap_mean = 0.0;
  double ap_std = 1.0;

  bool operator==(const Normalizer&) const = default;
};

using Tensors = std::map<std::string, Mat>;

struct ModelParams {
  ModelConfig config;
  Normalizer norm;
  Tensors tensors;

  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
  long scalar_count() const;
  bool operator==(const ModelParams& o) const;  // bitwise on tensors
};

/// Same names, shapes and bytes.
bool tensors_equal(const Tensors& a, const Tensors& b);

/// Expected tensor names and shapes for a config.
std::map<std::string, std::pair<int, int>> param_shapes(const ModelConfig& c);

/// Seeded fan-in uniform init; output heads zero, norm gains one.
ModelParams init_params(const ModelConfig& config);

/// Throws NumericError naming the first non-finite tensor, if any.
void check_finite(const ModelParams& params);

// -- windows ------------------------------------------------------------------

/// One step of history as the model sees it. Returns are raw.
struct StepInputs {
  int t = 0;
  double R_b = 0.0;
  double R_p = 0.0;
  std::vector<double> s_bid;
  std::vector<double> s_price;
  double a_b = 0.0;
  double a_p = 0.0;
};

/// K slots; the last `valid` are real steps, earlier slots are padding and
/// are never read. Targets are raw actions.
struct Window {
  int valid = 0;
  std::vector<int> timesteps;
  Mat bid_rtg, bid_states, bid_actions;
  Mat price_rtg, price_states, price_actions;
  Mat target_b, target_p;

  int slots() const { return static_cast<int>(timesteps.size()); }
};

/// Window over history[end - K + 1 .. end] (clipped at 0). Targets are the
/// recorded actions.
Window make_window(const std::vector<StepInputs>& history, int end, int K);

// -- forward ------------------------------------------------------------------

enum class Stream { kBid, kPrice };

/// Tape view of a parameter set. Tensors accepted by `trainable` become
/// gradient-carrying leaves; the rest are constants.
class Binding {
 public:
  using Filter = std::function<bool(const std::string&)>;
  Binding(Tape& tape, const ModelParams& params, Filter trainable = {});

  Var get(const std::string& name);
  Tape& tape() { return tape_; }
  const ModelParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config; }
  /// Adds each bound trainable tensor's gradient into `out`.
  void accumulate_grads(Tensors& out) const;

 private:
  Tape& tape_;
  const ModelParams& params_;
  Filter trainable_;
  std::map<std::string, Var> bound_;
};

/// Tokens (3n x d), order R_0, s_0, a_0, R_1, ... over the valid steps.
Var embed_stream(Binding& b, const Window& w, Stream stream);

struct StreamPass {
  Var hidden;              // 3n x d, final block output
  std::vector<Var> keys;   // per layer, 3n x d
  std::vector<Var> values; // per layer, 3n x d
};

StreamPass causal_forward(Binding& b, Var tokens, Stream stream);

/// Enhanced pricing state embeddings, one row per step:
///   e + W_enh softmax(Q K^T / sqrt(d)) V,
///   g = sigmoid(H_b W_gate) * H_b,  Q = [h_p1, g] W_q,
/// keys/values from g over steps <= t (or from h_p1 at step t only when
/// gca_literal is set).
Var gca_fuse(Binding& b, Var bid_hidden, Var price_pass1_hidden,
             Var price_embeddings);

/// Normalised head outputs (n x 1 each) at every valid step.
struct ForwardOut {
  Var a_b;
  Var a_p;
};

ForwardOut forward_window(Binding& b, const Window& w);

/// Raw (denormalised, unclamped) actions at every valid step.
struct RawActions {
  std::vector<double> a_b;
  std::vector<double> a_p;
};

RawActions forward_all(const ModelParams& params, const Window& w);

/// Action at the window's last valid step, clamped to the bounds. Throws
/// NumericError naming the offending tensor on non-finite output.
Action forward_joint(const ModelParams& params, const Window& w);

// -- loss and gradients -------------------------------------------------------

/// Mean over steps of lb (a_b - a_b*)^2 + lp (a_p - a_p*)^2.
double action_loss(const std::vector<double>& pred_b,
                   const std::vector<double>& pred_p,
                   const std::vector<double>& target_b,
                   const std::vector<double>& target_p, double lambda_b,
                   double lambda_p);

/// Sum over valid steps of the weighted squared error in normalised action
/// space, as a 1 x 1 tape value.
Var window_loss_sum(Binding& b, const Window& w, double lambda_b,
                    double lambda_p);

struct LossGrad {
  double loss = 0.0;  // mean over all valid steps in the batch
  long steps = 0;
  Tensors grads;      // trainable tensors only; d(loss)/d(param)
};

LossGrad loss_and_grad(const ModelParams& params,
                       const std::vector<const Window*>& batch,
                       double lambda_b, double lambda_p,
                       const Binding::Filter& trainable = {},
                       int workers = 1);

double batch_loss(const ModelParams& params,
                  const std::vector<const Window*>& batch, double lambda_b,
                  double lambda_p);

struct GradCheckOptions {
  double eps = 1e-5;
  int min_coords = 200;
  std::uint64_t seed = 7;
  // Applied to the analytic gradients before comparison.
  std::function<void(Tensors&)> tamper;
};

/// Max relative error |g - fd| / max(|g|, 1e-8) over a random subset of
/// coordinates drawn from every tensor, fd by central differences of the
/// window loss.
double grad_check(const ModelParams& params, const Window& window,
                  const GradCheckOptions& options = {});

}  // namespace jointbid
