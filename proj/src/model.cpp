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

#include "jointbid/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "jointbid/errors.hpp"
#include "jointbid/parallel.hpp"
#include "jointbid/rng.hpp"

namespace jointbid {
namespace {

std::string prefix(Stream s) { return s == Stream::kBid ? "bid." : "price."; }

std::string layer_name(Stream s, int l, const char* leaf) {
  return prefix(s) + "layer" + std::to_string(l) + "." + leaf;
}

Mask causal_mask(int n) {
  Mask m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = j <= i;
  }
  return m;
}

std::vector<int> state_positions(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = 3 * i + 1;
  return p;
}

Var multi_head(Var q, Var k, Var v, const Mask& mask, int heads) {
  const int dk = static_cast<int>(q.cols()) / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dk, dk);
    Var kh = slice_cols(k, h * dk, dk);
    Var vh = slice_cols(v, h * dk, dk);
    Var p = masked_softmax(scale(matmul_nt(qh, kh), inv), mask);
    outs.push_back(matmul(p, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

Var mlp_block(Binding& b, Var x, Stream s, int l) {
  Var z = layernorm(x, b.get(layer_name(s, l, "ln2.g")),
                    b.get(layer_name(s, l, "ln2.b")));
  Var h = gelu(add_row(matmul(z, b.get(layer_name(s, l, "mlp.w1"))),
                       b.get(layer_name(s, l, "mlp.b1"))));
  return add(x, add_row(matmul(h, b.get(layer_name(s, l, "mlp.w2"))),
                        b.get(layer_name(s, l, "mlp.b2"))));
}

Var head(Binding& b, Var h, Stream s) {
  const std::string p = prefix(s);
  if (b.config().head_layernorm) {
    h = layernorm(h, b.get(p + "head.ln.g"), b.get(p + "head.ln.b"));
  }
  return matmul(h, b.get(p + "head.w"));
}

/// Second pricing pass for every step at once. Row t is the state token of
/// step t with its embedding replaced; it attends to the pass-1 keys before
/// its position and to itself. Earlier tokens are unchanged by the
/// replacement, so pass-1 keys/values are exactly what a full rerun sees.
Var enhanced_pass(Binding& b, Var rows, const StreamPass& pass1) {
  const ModelConfig& c = b.config();
  const int n = static_cast<int>(rows.rows());
  const int seq = 3 * n;
  Mask mask = Mask::Constant(n, seq + n, false);
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < 3 * t + 1; ++j) mask(t, j) = true;
    mask(t, seq + t) = true;
  }
  Var x = rows;
  for (int l = 0; l < c.layers; ++l) {
    Var y = layernorm(x, b.get(layer_name(Stream::kPrice, l, "ln1.g")),
                      b.get(layer_name(Stream::kPrice, l, "ln1.b")));
    Var q = matmul(y, b.get(layer_name(Stream::kPrice, l, "attn.wq")));
    Var k = matmul(y, b.get(layer_name(Stream::kPrice, l, "attn.wk")));
    Var v = matmul(y, b.get(layer_name(Stream::kPrice, l, "attn.wv")));
    Var keys = concat_rows({pass1.keys[l], k});
    Var vals = concat_rows({pass1.values[l], v});
    Var att = multi_head(q, keys, vals, mask, c.heads);
    x = add(x, add_row(matmul(att, b.get(layer_name(Stream::kPrice, l, "attn.wo"))),
                       b.get(layer_name(Stream::kPrice, l, "attn.bo"))));
    x = mlp_block(b, x, Stream::kPrice, l);
  }
  return x;
}

std::string nonfinite_report(const ModelParams& p) {
  for (const auto& [name, m] : p.tensors) {
    if (!m.allFinite()) return "non-finite parameter tensor '" + name + "'";
  }
  return "non-finite model output with finite parameters";
}

}  // namespace

const char* to_string(BidRtg mode) {
  return mode == BidRtg::kHistorical ? "historical" : "memoryless";
}

BidRtg bid_rtg_from_string(const std::string& s) {
  if (s == "memoryless") return BidRtg::kMemoryless;
  if (s == "historical") return BidRtg::kHistorical;
  throw ConfigError("model.bid_rtg: expected memoryless or historical, got '" +
                    s + "'");
}

void ModelConfig::validate() const {
  if (d_model < 1) throw ConfigError("model.d_model: must be >= 1");
  if (heads < 1) throw ConfigError("model.heads: must be >= 1");
  if (d_model % heads != 0) {
    throw ConfigError("model.d_model: must be divisible by model.heads");
  }
  if (layers < 0) throw ConfigError("model.layers: must be >= 0");
  if (context < 1) throw ConfigError("model.context: must be >= 1");
  if (horizon < 1) throw ConfigError("model.horizon: must be >= 1");
  if (mlp_ratio < 1) throw ConfigError("model.mlp_ratio: must be >= 1");
  if (bid_dim != kBidViewDim) throw ConfigError("model.bid_dim: must be 14");
  if (price_dim != kPriceViewDim) throw ConfigError("model.price_dim: must be 17");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw ConfigError("model.init_scale: must be finite and > 0");
  }
  if (!(a_max > 0.0)) throw ConfigError("model.a_max: must be > 0");
  if (!(p_max >= 0.0)) throw ConfigError("model.p_max: must be >= 0");
}

const Mat& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw UsageError("no parameter tensor '" + name + "'");
  return it->second;
}

Mat& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw UsageError("no parameter tensor '" + name + "'");
  return it->second;
}

bool tensors_equal(const Tensors& a, const Tensors& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    const Mat& x = ia->second;
    const Mat& y = ib->second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (x.size() > 0 &&
        std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) != 0) {
      return false;
    }
  }
  return true;
}

bool ModelParams::operator==(const ModelParams& o) const {
  return config == o.config && norm == o.norm && tensors_equal(tensors, o.tensors);
}

long ModelParams::scalar_count() const {
  long n = 0;
  for (const auto& [_, m] : tensors) n += static_cast<long>(m.size());
  return n;
}

std::map<std::string, std::pair<int, int>> param_shapes(const ModelConfig& c) {
  std::map<std::string, std::pair<int, int>> s;
  const int d = c.d_model;
  for (Stream st : {Stream::kBid, Stream::kPrice}) {
    const std::string p = prefix(st);
    const int f = st == Stream::kBid ? c.bid_dim : c.price_dim;
    s[p + "embed.rtg.w"] = {1, d};
    s[p + "embed.rtg.b"] = {1, d};
    s[p + "embed.state.w"] = {f, d};
    s[p + "embed.state.b"] = {1, d};
    s[p + "embed.action.w"] = {1, d};
    s[p + "embed.action.b"] = {1, d};
    s[p + "time"] = {c.horizon, d};
    for (int l = 0; l < c.layers; ++l) {
      for (const char* ln : {"ln1.g", "ln1.b", "ln2.g", "ln2.b", "attn.bo",
                             "mlp.b2"}) {
        s[layer_name(st, l, ln)] = {1, d};
      }
      for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
        s[layer_name(st, l, w)] = {d, d};
      }
      s[layer_name(st, l, "mlp.w1")] = {d, c.mlp_ratio * d};
      s[layer_name(st, l, "mlp.b1")] = {1, c.mlp_ratio * d};
      s[layer_name(st, l, "mlp.w2")] = {c.mlp_ratio * d, d};
    }
    if (c.head_layernorm) {
      s[p + "head.ln.g"] = {1, d};
      s[p + "head.ln.b"] = {1, d};
    }
    s[p + "head.w"] = {d, 1};
  }
  s["gca.w_gate"] = {d, d};
  s["gca.w_q"] = {2 * d, d};
  s["gca.w_k"] = {d, d};
  s["gca.w_v"] = {d, d};
  s["gca.w_enh"] = {d, d};
  return s;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  CounterRng rng(config.init_seed, kAuxStreamBase + 1);
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const auto& [name, shape] : param_shapes(config)) {
    const auto [r, c] = shape;
    Mat m = Mat::Zero(r, c);
    if (ends_with(name, "head.w")) {
      // zero
    } else if (ends_with(name, ".g")) {
      m.setOnes();
    } else if (ends_with(name, ".b") || ends_with(name, ".b1") ||
               ends_with(name, ".b2") || ends_with(name, ".bo")) {
      // zero
    } else {
      const double a = name.ends_with("time")
                           ? 0.1 * config.init_scale
                           : config.init_scale / std::sqrt(static_cast<double>(r));
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = a * (2.0 * rng.uniform() - 1.0);
      }
    }
    p.tensors.emplace(name, std::move(m));
  }
  return p;
}

void check_finite(const ModelParams& params) {
  for (const auto& [name, m] : params.tensors) {
    if (!m.allFinite()) {
      throw NumericError("non-finite parameter tensor '" + name + "'");
    }
  }
}

Window make_window(const std::vector<StepInputs>& history, int end, int K) {
  if (K < 1) throw UsageError("make_window: K must be >= 1");
  if (end < 0 || end >= static_cast<int>(history.size())) {
    throw UsageError("make_window: end index out of range");
  }
  const int n = std::min(K, end + 1);
  const int first = end - n + 1;
  Window w;
  w.valid = n;
  w.timesteps.assign(K, 0);
  w.bid_rtg = Mat::Zero(K, 1);
  w.bid_states = Mat::Zero(K, kBidViewDim);
  w.bid_actions = Mat::Zero(K, 1);
  w.price_rtg = Mat::Zero(K, 1);
  w.price_states = Mat::Zero(K, kPriceViewDim);
  w.price_actions = Mat::Zero(K, 1);
  w.target_b = Mat::Zero(K, 1);
  w.target_p = Mat::Zero(K, 1);
  for (int i = 0; i < n; ++i) {
    const StepInputs& s = history[first + i];
    const int slot = K - n + i;
    if (static_cast<int>(s.s_bid.size()) != kBidViewDim ||
        static_cast<int>(s.s_price.size()) != kPriceViewDim) {
      throw UsageError("make_window: state view has the wrong width");
    }
    w.timesteps[slot] = s.t;
    w.bid_rtg(slot, 0) = s.R_b;
    w.price_rtg(slot, 0) = s.R_p;
    for (int j = 0; j < kBidViewDim; ++j) w.bid_states(slot, j) = s.s_bid[j];
    for (int j = 0; j < kPriceViewDim; ++j) w.price_states(slot, j) = s.s_price[j];
    w.bid_actions(slot, 0) = s.a_b;
    w.price_actions(slot, 0) = s.a_p;
    w.target_b(slot, 0) = s.a_b;
    w.target_p(slot, 0) = s.a_p;
  }
  return w;
}

Binding::Binding(Tape& tape, const ModelParams& params, Filter trainable)
    : tape_(tape), params_(params), trainable_(std::move(trainable)) {}

Var Binding::get(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const bool rg = trainable_ ? trainable_(name) : false;
  Var v = tape_.ref(params_.at(name), rg);
  bound_.emplace(name, v);
  return v;
}

void Binding::accumulate_grads(Tensors& out) const {
  for (const auto& [name, v] : bound_) {
    if (!tape_.requires_grad(v.id) || !tape_.has_grad(v.id)) continue;
    auto it = out.find(name);
    if (it == out.end()) {
      out.emplace(name, tape_.grad(v.id));
    } else {
      it->second += tape_.grad(v.id);
    }
  }
}

Var embed_stream(Binding& b, const Window& w, Stream stream) {
  const ModelConfig& c = b.config();
  const Normalizer& nz = b.params().norm;
  const int K = w.slots();
  const int n = w.valid;
  if (n < 1 || n > K) throw UsageError("embed_stream: window has no valid steps");
  const int off = K - n;
  const bool bid = stream == Stream::kBid;
  const std::string p = prefix(stream);

  Mat rtg = (bid ? w.bid_rtg : w.price_rtg).middleRows(off, n);
  if (bid) rtg /= nz.rtg_scale;
  Mat states = (bid ? w.bid_states : w.price_states).middleRows(off, n);
  Mat actions = (bid ? w.bid_actions : w.price_actions).middleRows(off, n);
  const double mean = bid ? nz.ab_mean : nz.ap_mean;
  const double sd = bid ? nz.ab_std : nz.ap_std;
  actions = ((actions.array() - mean) / sd).matrix();

  std::vector<int> ts(w.timesteps.begin() + off, w.timesteps.end());
  for (int t : ts) {
    if (t < 0 || t >= c.horizon) {
      throw UsageError("embed_stream: timestep " + std::to_string(t) +
                       " outside the timestep table");
    }
  }
  Tape& tape = b.tape();
  Var time = gather_rows(b.get(p + "time"), ts);
  auto token = [&](Mat in, const char* which) {
    Var x = matmul(tape.constant(std::move(in)),
                   b.get(p + "embed." + which + ".w"));
    return add(add_row(x, b.get(p + "embed." + which + ".b")), time);
  };
  Var r = token(std::move(rtg), "rtg");
  Var s = token(std::move(states), "state");
  Var a = token(std::move(actions), "action");
  std::vector<int> order(3 * n);
  for (int i = 0; i < n; ++i) {
    order[3 * i] = i;
    order[3 * i + 1] = n + i;
    order[3 * i + 2] = 2 * n + i;
  }
  return gather_rows(concat_rows({r, s, a}), order);
}

StreamPass causal_forward(Binding& b, Var tokens, Stream s) {
  const ModelConfig& c = b.config();
  const Mask mask = causal_mask(static_cast<int>(tokens.rows()));
  StreamPass out;
  Var x = tokens;
  for (int l = 0; l < c.layers; ++l) {
    Var y = layernorm(x, b.get(layer_name(s, l, "ln1.g")),
                      b.get(layer_name(s, l, "ln1.b")));
    Var q = matmul(y, b.get(layer_name(s, l, "attn.wq")));
    Var k = matmul(y, b.get(layer_name(s, l, "attn.wk")));
    Var v = matmul(y, b.get(layer_name(s, l, "attn.wv")));
    out.keys.push_back(k);
    out.values.push_back(v);
    Var att = multi_head(q, k, v, mask, c.heads);
    x = add(x, add_row(matmul(att, b.get(layer_name(s, l, "attn.wo"))),
                       b.get(layer_name(s, l, "attn.bo"))));
    x = mlp_block(b, x, s, l);
  }
  out.hidden = x;
  return out;
}

Var gca_fuse(Binding& b, Var bid_hidden, Var price_pass1_hidden,
             Var price_embeddings) {
  const ModelConfig& c = b.config();
  const int n = static_cast<int>(bid_hidden.rows());
  Var gated = mul(sigmoid(matmul(bid_hidden, b.get("gca.w_gate"))), bid_hidden);
  Var q = matmul(concat_cols({price_pass1_hidden, gated}), b.get("gca.w_q"));
  Var src = c.gca_literal ? price_pass1_hidden : gated;
  Var k = matmul(src, b.get("gca.w_k"));
  Var v = matmul(src, b.get("gca.w_v"));
  Mask mask(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) mask(i, j) = c.gca_literal ? i == j : j <= i;
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.d_model));
  Var ctx = matmul(masked_softmax(scale(matmul_nt(q, k), inv), mask), v);
  return add(price_embeddings, matmul(ctx, b.get("gca.w_enh")));
}

ForwardOut forward_window(Binding& b, const Window& w) {
  const std::vector<int> sp = state_positions(w.valid);

  Var bid_tokens = embed_stream(b, w, Stream::kBid);
  StreamPass bid = causal_forward(b, bid_tokens, Stream::kBid);
  Var bid_h = gather_rows(bid.hidden, sp);
  Var a_b = head(b, bid_h, Stream::kBid);

  Var price_tokens = embed_stream(b, w, Stream::kPrice);
  StreamPass pass1 = causal_forward(b, price_tokens, Stream::kPrice);
  Var e = gather_rows(price_tokens, sp);
  if (b.config().gca) {
    e = gca_fuse(b, bid_h, gather_rows(pass1.hidden, sp), e);
  }
  Var price_h = enhanced_pass(b, e, pass1);
  Var a_p = head(b, price_h, Stream::kPrice);
  return {a_b, a_p};
}

RawActions forward_all(const ModelParams& params, const Window& w) {
  Tape tape;
  Binding b(tape, params);
  ForwardOut out = forward_window(b, w);
  const Normalizer& nz = params.norm;
  RawActions r;
  for (Eigen::Index i = 0; i < out.a_b.rows(); ++i) {
    r.a_b.push_back(nz.ab_mean + nz.ab_std * out.a_b.value()(i, 0));
    r.a_p.push_back(nz.ap_mean + nz.ap_std * out.a_p.value()(i, 0));
  }
  return r;
}

Action forward_joint(const ModelParams& params, const Window& w) {
  const RawActions r = forward_all(params, w);
  const Action a{r.a_b.back(), r.a_p.back()};
  if (!std::isfinite(a.bid_multiplier) || !std::isfinite(a.price_offset)) {
    throw NumericError(nonfinite_report(params));
  }
  return clamp_action(a, {params.config.a_max, params.config.p_max});
}

double action_loss(const std::vector<double>& pred_b,
                   const std::vector<double>& pred_p,
                   const std::vector<double>& target_b,
                   const std::vector<double>& target_p, double lambda_b,
                   double lambda_p) {
  const std::size_t n = pred_b.size();
  if (pred_p.size() != n || target_b.size() != n || target_p.size() != n) {
    throw UsageError("action_loss: length mismatch");
  }
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double eb = pred_b[i] - target_b[i];
    const double ep = pred_p[i] - target_p[i];
    total += lambda_b * eb * eb + lambda_p * ep * ep;
  }
  return total / static_cast<double>(n);
}

Var window_loss_sum(Binding& b, const Window& w, double lambda_b,
                    double lambda_p) {
  const Normalizer& nz = b.params().norm;
  ForwardOut out = forward_window(b, w);
  const int off = w.slots() - w.valid;
  Tape& tape = b.tape();
  Mat tb = ((w.target_b.middleRows(off, w.valid).array() - nz.ab_mean) / nz.ab_std)
               .matrix();
  Mat tp = ((w.target_p.middleRows(off, w.valid).array() - nz.ap_mean) / nz.ap_std)
               .matrix();
  Var lb = sum(square(sub(out.a_b, tape.constant(std::move(tb)))));
  Var lp = sum(square(sub(out.a_p, tape.constant(std::move(tp)))));
  return add(scale(lb, lambda_b), scale(lp, lambda_p));
}

LossGrad loss_and_grad(const ModelParams& params,
                       const std::vector<const Window*>& batch,
                       double lambda_b, double lambda_p,
                       const Binding::Filter& trainable, int workers) {
  struct Part {
    double loss_sum = 0.0;
    long steps = 0;
    Tensors grads;
  };
  Binding::Filter filter =
      trainable ? trainable : [](const std::string&) { return true; };
  auto parts = parallel_map(static_cast<int>(batch.size()), workers, [&](int i) {
    Tape tape;
    Binding b(tape, params, filter);
    Var l = window_loss_sum(b, *batch[i], lambda_b, lambda_p);
    tape.backward(l);
    Part part;
    part.loss_sum = l.scalar();
    part.steps = batch[i]->valid;
    b.accumulate_grads(part.grads);
    return part;
  });
  LossGrad out;
  double total = 0.0;
  for (const Part& p : parts) {
    total += p.loss_sum;
    out.steps += p.steps;
  }
  if (out.steps == 0) return out;
  out.loss = total / static_cast<double>(out.steps);
  const double inv = 1.0 / static_cast<double>(out.steps);
  for (Part& p : parts) {
    for (auto& [name, g] : p.grads) {
      auto it = out.grads.find(name);
      if (it == out.grads.end()) {
        out.grads.emplace(name, std::move(g));
      } else {
        it->second += g;
      }
    }
  }
  for (auto& [_, g] : out.grads) g *= inv;
  return out;
}

double batch_loss(const ModelParams& params,
                  const std::vector<const Window*>& batch, double lambda_b,
                  double lambda_p) {
  double total = 0.0;
  long steps = 0;
  for (const Window* w : batch) {
    Tape tape;
    Binding b(tape, params);
    total += window_loss_sum(b, *w, lambda_b, lambda_p).scalar();
    steps += w->valid;
  }
  return steps > 0 ? total / static_cast<double>(steps) : 0.0;
}

double grad_check(const ModelParams& params, const Window& window,
                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("grad_check: eps must be > 0");
  LossGrad lg = loss_and_grad(params, {&window}, 1.0, 1.0);
  if (options.tamper) options.tamper(lg.grads);

  ModelParams probe = params;
  CounterRng rng(options.seed, kAuxStreamBase + 2);
  const int per_tensor = std::max(
      4, static_cast<int>((options.min_coords + probe.tensors.size() - 1) /
                          probe.tensors.size()));
  double worst = 0.0;
  for (auto& [name, m] : probe.tensors) {
    const auto git = lg.grads.find(name);
    for (int k = 0; k < per_tensor; ++k) {
      const Eigen::Index idx = static_cast<Eigen::Index>(
          rng.uniform() * static_cast<double>(m.size()));
      const Eigen::Index i = std::min(idx, m.size() - 1);
      const double orig = m.data()[i];
      m.data()[i] = orig + options.eps;
      const double up = batch_loss(probe, {&window}, 1.0, 1.0);
      m.data()[i] = orig - options.eps;
      const double down = batch_loss(probe, {&window}, 1.0, 1.0);
      m.data()[i] = orig;
      const double fd = (up - down) / (2.0 * options.eps);
      const double g = git == lg.grads.end() ? 0.0 : git->second.data()[i];
      const double err = std::abs(g - fd) / std::max(std::abs(g), 1e-8);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace jointbid
