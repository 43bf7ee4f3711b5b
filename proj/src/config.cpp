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

#include "jointbid/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>

#include "jointbid/errors.hpp"
#include "jointbid/parallel.hpp"

namespace jointbid {
namespace {

/// Reads keys out of one YAML mapping and remembers which were consumed.
class Section {
 public:
  Section(const YAML::Node& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError(path_ + ": expected a mapping");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v || v.IsNull()) return;
    if (!v.IsScalar()) throw ConfigError(full(key) + ": expected a scalar");
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(full(key) + ": cannot read '" + v.Scalar() + "' as " +
                        type_name<T>());
    }
  }

  void read_optional(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    if (v.IsNull()) {
      out.reset();
      return;
    }
    double x = 0.0;
    read(key, x);
    out = x;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    YAML::Node n;
    if (node_ && node_.IsMap()) n = node_[key];
    return Section(n, full(key));
  }

  /// Throws on any key that no read() asked for.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.contains(k)) throw ConfigError(full(k) + ": unknown key");
    }
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_integral_v<T>) return "an integer";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    return "a string";
  }
  std::string full(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_gains(Section s, PidGains& g) {
  s.read("kp", g.kp);
  s.read("ki", g.ki);
  s.read("kd", g.kd);
  s.finish();
}

Config from_node(const YAML::Node& root) {
  Config c = default_config();
  Section top(root, "");

  {
    Section s = top.child("env");
    EnvConfig& e = c.env;
    s.read("horizon", e.horizon);
    s.read("mean_batch_size", e.mean_batch_size);
    s.read("value_log_mean", e.value_log_mean);
    s.read("value_log_sigma", e.value_log_sigma);
    s.read("competitiveness", e.competitiveness);
    s.read("competitor_noise", e.competitor_noise);
    s.read("diurnal_amplitude", e.diurnal_amplitude);
    s.read("surge_competitiveness", e.surge_competitiveness);
    s.read("surge_steps", e.surge_steps);
    s.read("budget", e.budget);
    s.read("tcpa", e.tcpa);
    s.read("a_max", e.a_max);
    s.read("p_max", e.p_max);
    s.read("seed", e.seed);
    s.finish();
  }
  {
    Section s = top.child("controllers");
    ControllerConfig& k = c.controllers;
    read_gains(s.child("bid"), k.bid_gains);
    s.read("bid_ref", k.bid_ref);
    s.read("bid_out_lo", k.bid_out_lo);
    s.read("bid_out_hi", k.bid_out_hi);
    s.read("bid_integral_clamp", k.bid_integral_clamp);
    read_gains(s.child("price"), k.price_gains);
    s.read("price_integral_clamp", k.price_integral_clamp);
    s.finish();
  }
  {
    Section s = top.child("model");
    ModelConfig& m = c.model;
    s.read("d_model", m.d_model);
    s.read("layers", m.layers);
    s.read("heads", m.heads);
    s.read("context", m.context);
    s.read("horizon", m.horizon);
    s.read("mlp_ratio", m.mlp_ratio);
    s.read("gca", m.gca);
    s.read("gca_literal", m.gca_literal);
    s.read("head_layernorm", m.head_layernorm);
    s.read("init_scale", m.init_scale);
    s.read("init_seed", m.init_seed);
    std::string rtg = to_string(m.bid_rtg);
    s.read("bid_rtg", rtg);
    m.bid_rtg = bid_rtg_from_string(rtg);
    s.finish();
  }
  {
    Section s = top.child("train");
    TrainConfig& t = c.train;
    s.read("learning_rate", t.learning_rate);
    s.read("batch_size", t.batch_size);
    s.read("weight_decay", t.weight_decay);
    s.read("lambda_b", t.lambda_b);
    s.read("lambda_p", t.lambda_p);
    s.read("epochs", t.epochs);
    s.read("seed", t.seed);
    s.read("grad_clip", t.grad_clip);
    s.read("beta1", t.beta1);
    s.read("beta2", t.beta2);
    s.read("adam_eps", t.adam_eps);
    s.finish();
  }
  {
    Section s = top.child("dpo");
    DpoConfig& d = c.dpo;
    s.read("beta", d.beta);
    s.read("epochs", d.epochs);
    s.read("learning_rate", d.learning_rate);
    s.read("advantage_threshold", d.advantage_threshold);
    s.read("batch_size", d.batch_size);
    s.read("weight_decay", d.weight_decay);
    s.read("seed", d.seed);
    s.finish();
  }
  {
    Section s = top.child("gen");
    s.read("episodes", c.gen.episodes);
    s.read("seed", c.gen.seed);
    s.finish();
  }
  {
    Section s = top.child("eval");
    s.read("seed_start", c.eval.seed_start);
    s.read("seed_count", c.eval.seed_count);
    s.read_optional("bid_rtg", c.eval.targets.bid_rtg);
    s.read("price_rtg", c.eval.targets.price_rtg);
    s.finish();
  }
  {
    Section s = top.child("paths");
    s.read("data", c.paths.data);
    s.read("out", c.paths.out);
    s.finish();
  }
  top.read("workers", c.workers);
  top.finish();

  // The model's action bounds always follow the environment.
  c.model.a_max = c.env.a_max;
  c.model.p_max = c.env.p_max;
  c.validate();
  return c;
}

}  // namespace

std::vector<std::uint64_t> EvalSettings::seeds() const {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < seed_count; ++i) s.push_back(seed_start + i);
  return s;
}

void Config::validate() const {
  env.validate();
  controllers.validate();
  model.validate();
  train.validate();
  dpo.validate();
  if (model.horizon < env.horizon) {
    throw ConfigError("model.horizon: must be >= env.horizon (" +
                      std::to_string(env.horizon) + ")");
  }
  if (model.a_max != env.a_max || model.p_max != env.p_max) {
    throw ConfigError("model.a_max: action bounds must match env");
  }
  if (gen.episodes < 1) throw ConfigError("gen.episodes: must be >= 1");
  if (eval.seed_count < 1) throw ConfigError("eval.seed_count: must be >= 1");
  if (eval.targets.bid_rtg && !std::isfinite(*eval.targets.bid_rtg)) {
    throw ConfigError("eval.bid_rtg: must be finite");
  }
  if (!(eval.targets.price_rtg >= 0.0 && eval.targets.price_rtg <= 1.0)) {
    throw ConfigError("eval.price_rtg: must be in [0, 1]");
  }
  if (workers < 1) throw ConfigError("workers: must be >= 1");
}

GenerationConfig Config::generation() const {
  GenerationConfig g;
  g.env = env;
  g.controllers = controllers;
  g.episodes = gen.episodes;
  g.seed = gen.seed;
  g.workers = workers;
  g.advantage_threshold = dpo.advantage_threshold;
  return g;
}

Config default_config() {
  Config c;
  c.workers = default_workers();
  return c;
}

Config parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (root && !root.IsNull() && !root.IsMap()) {
    throw ConfigError("config: top level must be a mapping");
  }
  return from_node(root);
}

Config parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const Config& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  auto gains = [&](const char* key, const PidGains& g) {
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kp" << YAML::Value << g.kp;
    out << YAML::Key << "ki" << YAML::Value << g.ki;
    out << YAML::Key << "kd" << YAML::Value << g.kd;
    out << YAML::EndMap;
  };

  const EnvConfig& e = c.env;
  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon" << YAML::Value << e.horizon;
  out << YAML::Key << "mean_batch_size" << YAML::Value << e.mean_batch_size;
  out << YAML::Key << "value_log_mean" << YAML::Value << e.value_log_mean;
  out << YAML::Key << "value_log_sigma" << YAML::Value << e.value_log_sigma;
  out << YAML::Key << "competitiveness" << YAML::Value << e.competitiveness;
  out << YAML::Key << "competitor_noise" << YAML::Value << e.competitor_noise;
  out << YAML::Key << "diurnal_amplitude" << YAML::Value << e.diurnal_amplitude;
  out << YAML::Key << "surge_competitiveness" << YAML::Value
      << e.surge_competitiveness;
  out << YAML::Key << "surge_steps" << YAML::Value << e.surge_steps;
  out << YAML::Key << "budget" << YAML::Value << e.budget;
  out << YAML::Key << "tcpa" << YAML::Value << e.tcpa;
  out << YAML::Key << "a_max" << YAML::Value << e.a_max;
  out << YAML::Key << "p_max" << YAML::Value << e.p_max;
  out << YAML::Key << "seed" << YAML::Value << e.seed;
  out << YAML::EndMap;

  const ControllerConfig& k = c.controllers;
  out << YAML::Key << "controllers" << YAML::Value << YAML::BeginMap;
  gains("bid", k.bid_gains);
  out << YAML::Key << "bid_ref" << YAML::Value << k.bid_ref;
  out << YAML::Key << "bid_out_lo" << YAML::Value << k.bid_out_lo;
  out << YAML::Key << "bid_out_hi" << YAML::Value << k.bid_out_hi;
  out << YAML::Key << "bid_integral_clamp" << YAML::Value << k.bid_integral_clamp;
  gains("price", k.price_gains);
  out << YAML::Key << "price_integral_clamp" << YAML::Value
      << k.price_integral_clamp;
  out << YAML::EndMap;

  const ModelConfig& m = c.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "d_model" << YAML::Value << m.d_model;
  out << YAML::Key << "layers" << YAML::Value << m.layers;
  out << YAML::Key << "heads" << YAML::Value << m.heads;
  out << YAML::Key << "context" << YAML::Value << m.context;
  out << YAML::Key << "horizon" << YAML::Value << m.horizon;
  out << YAML::Key << "mlp_ratio" << YAML::Value << m.mlp_ratio;
  out << YAML::Key << "gca" << YAML::Value << m.gca;
  out << YAML::Key << "gca_literal" << YAML::Value << m.gca_literal;
  out << YAML::Key << "head_layernorm" << YAML::Value << m.head_layernorm;
  out << YAML::Key << "init_scale" << YAML::Value << m.init_scale;
  out << YAML::Key << "init_seed" << YAML::Value << m.init_seed;
  out << YAML::Key << "bid_rtg" << YAML::Value << to_string(m.bid_rtg);
  out << YAML::EndMap;

  const TrainConfig& t = c.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "weight_decay" << YAML::Value << t.weight_decay;
  out << YAML::Key << "lambda_b" << YAML::Value << t.lambda_b;
  out << YAML::Key << "lambda_p" << YAML::Value << t.lambda_p;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::Key << "grad_clip" << YAML::Value << t.grad_clip;
  out << YAML::Key << "beta1" << YAML::Value << t.beta1;
  out << YAML::Key << "beta2" << YAML::Value << t.beta2;
  out << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps;
  out << YAML::EndMap;

  const DpoConfig& d = c.dpo;
  out << YAML::Key << "dpo" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "beta" << YAML::Value << d.beta;
  out << YAML::Key << "epochs" << YAML::Value << d.epochs;
  out << YAML::Key << "learning_rate" << YAML::Value << d.learning_rate;
  out << YAML::Key << "advantage_threshold" << YAML::Value << d.advantage_threshold;
  out << YAML::Key << "batch_size" << YAML::Value << d.batch_size;
  out << YAML::Key << "weight_decay" << YAML::Value << d.weight_decay;
  out << YAML::Key << "seed" << YAML::Value << d.seed;
  out << YAML::EndMap;

  out << YAML::Key << "gen" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "episodes" << YAML::Value << c.gen.episodes;
  out << YAML::Key << "seed" << YAML::Value << c.gen.seed;
  out << YAML::EndMap;

  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "seed_start" << YAML::Value << c.eval.seed_start;
  out << YAML::Key << "seed_count" << YAML::Value << c.eval.seed_count;
  out << YAML::Key << "bid_rtg" << YAML::Value;
  if (c.eval.targets.bid_rtg) {
    out << *c.eval.targets.bid_rtg;
  } else {
    out << YAML::Null;
  }
  out << YAML::Key << "price_rtg" << YAML::Value << c.eval.targets.price_rtg;
  out << YAML::EndMap;

  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "data" << YAML::Value << c.paths.data;
  out << YAML::Key << "out" << YAML::Value << c.paths.out;
  out << YAML::EndMap;

  out << YAML::Key << "workers" << YAML::Value << c.workers;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<PublishedDefault> published_defaults() {
  const Config c;
  auto num = [](double x) { return format_double(x); };
  return {
      {"train.learning_rate", num(c.train.learning_rate)},
      {"train.batch_size", std::to_string(c.train.batch_size)},
      {"train.weight_decay", num(c.train.weight_decay)},
      {"train.lambda_b", num(c.train.lambda_b)},
      {"train.lambda_p", num(c.train.lambda_p)},
      {"dpo.beta", num(c.dpo.beta)},
      {"dpo.epochs", std::to_string(c.dpo.epochs)},
      {"dpo.learning_rate", num(c.dpo.learning_rate)},
      {"dpo.advantage_threshold", num(c.dpo.advantage_threshold)},
      {"(filter) future value floor", num(kFutureValueFloor)},
      {"(metric) ratio band", "[0.8, 1.2]"},
  };
}

}  // namespace jointbid
