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

#include "jointbid/trajgen.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "jointbid/errors.hpp"
#include "jointbid/parallel.hpp"
#include "json.hpp"

namespace jointbid {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

void append_step(EpisodeSeries& s, const StepOutcome& o) {
  s.values.push_back(o.step_value);
  s.precosts.push_back(o.step_precost);
  s.corrections.push_back(o.step_payment - o.step_precost);
}

ordered_json env_json(const EnvConfig& c) {
  ordered_json j;
  j["horizon"] = c.horizon;
  j["mean_batch_size"] = c.mean_batch_size;
  j["value_log_mean"] = c.value_log_mean;
  j["value_log_sigma"] = c.value_log_sigma;
  j["competitiveness"] = c.competitiveness;
  j["competitor_noise"] = c.competitor_noise;
  j["diurnal_amplitude"] = c.diurnal_amplitude;
  j["surge_competitiveness"] = c.surge_competitiveness;
  j["surge_steps"] = c.surge_steps;
  j["budget"] = c.budget;
  j["tcpa"] = c.tcpa;
  j["a_max"] = c.a_max;
  j["p_max"] = c.p_max;
  return j;
}

ordered_json gains_json(const PidGains& g) {
  return ordered_json{{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}};
}

ordered_json controllers_json(const ControllerConfig& c) {
  ordered_json j;
  j["bid_gains"] = gains_json(c.bid_gains);
  j["bid_ref"] = c.bid_ref;
  j["bid_out_lo"] = c.bid_out_lo;
  j["bid_out_hi"] = c.bid_out_hi;
  j["bid_integral_clamp"] = c.bid_integral_clamp;
  j["price_gains"] = gains_json(c.price_gains);
  j["price_integral_clamp"] = c.price_integral_clamp;
  return j;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string config_hash(const GenerationConfig& c) {
  ordered_json j;
  j["env"] = env_json(c.env);
  j["controllers"] = controllers_json(c.controllers);
  j["episodes"] = c.episodes;
  j["seed"] = c.seed;
  j["advantage_threshold"] = c.advantage_threshold;
  return fnv1a_hex(j.dump());
}

void write_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                  ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string records_text(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_line(r);
    out += '\n';
  }
  return out;
}

std::vector<DatasetRecord> parse_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_line(line));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
  return out;
}

ordered_json manifest_json(const DatasetManifest& m) {
  ordered_json j;
  j["episodes"] = m.episodes;
  j["horizon"] = m.horizon;
  j["seeds"] = m.seeds;
  j["config_hash"] = m.config_hash;
  j["stage1_records"] = m.stage1_records;
  j["dpo_records"] = m.dpo_records;
  j["dropped_zero_advantage"] = m.dropped_zero_advantage;
  j["dropped_low_future_value"] = m.dropped_low_future_value;
  j["max_initial_rtg"] = m.max_initial_rtg;
  j["advantage_threshold"] = m.advantage_threshold;
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.episodes = j.at("episodes").get<int>();
  m.horizon = j.at("horizon").get<int>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.stage1_records = j.at("stage1_records").get<long>();
  m.dpo_records = j.at("dpo_records").get<long>();
  m.dropped_zero_advantage = j.at("dropped_zero_advantage").get<long>();
  m.dropped_low_future_value = j.at("dropped_low_future_value").get<long>();
  m.max_initial_rtg = j.at("max_initial_rtg").get<double>();
  m.advantage_threshold = j.at("advantage_threshold").get<double>();
  return m;
}

}  // namespace

EpisodeSeries series_of(const Ledger& ledger) {
  EpisodeSeries s;
  for (const StepRecord& r : ledger.history()) {
    s.values.push_back(r.value);
    s.precosts.push_back(r.precost);
    s.corrections.push_back(r.correction);
  }
  return s;
}

EpisodeSeries counterfactual_series(const EnvSnapshot& snapshot,
                                    const BidPolicy& base_policy) {
  EnvState state = snapshot.state;
  std::unique_ptr<BidPolicy> bidder = base_policy.clone();
  const ActionBounds bounds = state.config.bounds();
  double prev_bid = snapshot.prev_bid;
  while (!state.terminal()) {
    const double a_b =
        std::clamp(bidder->bid(observe_bid(state, prev_bid)), 0.0, bounds.a_max);
    state = env_step(state, a_b, 0.0).first;
    prev_bid = a_b;
  }
  return series_of(state.ledger);
}

double counterfactual_return(const EnvSnapshot& snapshot,
                             const BidPolicy& base_policy) {
  if (snapshot.state.terminal()) return 1.0;
  const int t = snapshot.state.t();
  return rtg_price(counterfactual_series(snapshot, base_policy), t);
}

JointTrajectory generate_joint_trajectory(const BidPolicy& base_policy,
                                          const EnvConfig& env_config,
                                          const ControllerConfig& pid_config,
                                          std::uint64_t seed) {
  env_config.validate();
  pid_config.validate();
  JointTrajectory traj;
  traj.seed = seed;

  std::unique_ptr<BidPolicy> bidder = base_policy.clone();
  PidPricingPolicy pricer(pid_config, env_config.p_max);
  const ActionBounds bounds = env_config.bounds();

  EnvState state = reset_env(env_config, seed);
  double prev_bid = 0.0;
  double prev_price = 0.0;
  std::vector<double> cf_returns;
  while (!state.terminal()) {
    EnvSnapshot snap{state, prev_bid, prev_price};
    cf_returns.push_back(counterfactual_return(snap, *bidder));

    const BidObservation bo = observe_bid(state, prev_bid);
    const PriceObservation po = observe_price(state, prev_bid, prev_price);
    const Action raw{bidder->bid(bo), pricer.price(po)};
    if (!std::isfinite(raw.bid_multiplier) || !std::isfinite(raw.price_offset)) {
      throw NumericError("non-finite controller action at step " +
                         std::to_string(state.t()) + " (seed " +
                         std::to_string(seed) + ")");
    }
    const Action a = clamp_action(raw, bounds);
    auto [next, outcome] = env_step(state, a.bid_multiplier, a.price_offset);

    TrajectoryStep step;
    step.t = state.t();
    step.s_bid = bo.view.features;
    step.s_price = po.view.features;
    step.a_b = a.bid_multiplier;
    step.a_p = a.price_offset;
    step.accounting = outcome;
    traj.steps.push_back(std::move(step));
    append_step(traj.series, outcome);

    state = std::move(next);
    prev_bid = a.bid_multiplier;
    prev_price = a.price_offset;
  }
  traj.budget_exhausted = state.exhausted;

  const EpisodeSeries& s = traj.series;
  double future = 0.0;
  for (int t = s.size() - 1; t >= 0; --t) {
    future += s.values[t];
    TrajectoryStep& step = traj.steps[t];
    step.future_value = future;
    step.R_b = rtg_bid_memoryless(s, t);
    step.R_b_hist = rtg_bid_historical(s, t + 1);
    step.R_p = rtg_price(s, t);
    step.A = step.R_p - cf_returns[t];
  }
  return traj;
}

std::uint64_t episode_seed(std::uint64_t base_seed, int i) {
  return base_seed + static_cast<std::uint64_t>(i);
}

std::vector<DatasetRecord> filter_dpo_pool(const std::vector<DatasetRecord>& all,
                                           double advantage_threshold,
                                           DatasetManifest& manifest) {
  std::vector<DatasetRecord> pool;
  manifest.dropped_zero_advantage = 0;
  manifest.dropped_low_future_value = 0;
  for (const auto& r : all) {
    if (std::abs(r.A) <= advantage_threshold) {
      ++manifest.dropped_zero_advantage;
    } else if (r.future_value < kFutureValueFloor) {
      ++manifest.dropped_low_future_value;
    } else {
      pool.push_back(r);
    }
  }
  manifest.dpo_records = static_cast<long>(pool.size());
  manifest.advantage_threshold = advantage_threshold;
  return pool;
}

Dataset generate_dataset(const GenerationConfig& config) {
  if (config.episodes < 1) throw ConfigError("gen.episodes: must be >= 1");
  if (!(config.advantage_threshold >= 0.0)) {
    throw ConfigError("dpo.advantage_threshold: must be >= 0");
  }
  config.env.validate();
  config.controllers.validate();

  const BaseBidPolicy base(config.controllers, config.env.a_max);
  auto trajectories =
      parallel_map(config.episodes, config.workers, [&](int i) {
        return generate_joint_trajectory(base, config.env, config.controllers,
                                         episode_seed(config.seed, i));
      });

  Dataset ds;
  DatasetManifest& m = ds.manifest;
  m.episodes = config.episodes;
  m.horizon = config.env.horizon;
  m.config_hash = config_hash(config);
  for (int i = 0; i < config.episodes; ++i) {
    const JointTrajectory& traj = trajectories[i];
    m.seeds.push_back(traj.seed);
    if (!traj.steps.empty()) {
      m.max_initial_rtg = std::max(m.max_initial_rtg, traj.steps.front().R_b);
    }
    for (const TrajectoryStep& s : traj.steps) {
      DatasetRecord r;
      r.episode = i;
      r.seed = traj.seed;
      r.t = s.t;
      r.R_b = s.R_b;
      r.R_b_hist = s.R_b_hist;
      r.R_p = s.R_p;
      r.A = s.A;
      r.a_b = s.a_b;
      r.a_p = s.a_p;
      r.future_value = s.future_value;
      r.s_bid = s.s_bid;
      r.s_price = s.s_price;
      r.wins = s.accounting.wins;
      r.impressions = s.accounting.impressions;
      r.value = s.accounting.step_value;
      r.precost = s.accounting.step_precost;
      r.payment = s.accounting.step_payment;
      ds.stage1.push_back(std::move(r));
    }
  }
  m.stage1_records = static_cast<long>(ds.stage1.size());
  ds.dpo_pool = filter_dpo_pool(ds.stage1, config.advantage_threshold, m);
  return ds;
}

std::string record_to_line(const DatasetRecord& r) {
  ordered_json j;
  j["episode"] = r.episode;
  j["seed"] = r.seed;
  j["t"] = r.t;
  j["R_b"] = r.R_b;
  j["R_b_hist"] = r.R_b_hist;
  j["R_p"] = r.R_p;
  j["A"] = r.A;
  j["a_b"] = r.a_b;
  j["a_p"] = r.a_p;
  j["future_value"] = r.future_value;
  j["s_bid"] = r.s_bid;
  j["s_price"] = r.s_price;
  j["wins"] = r.wins;
  j["impressions"] = r.impressions;
  j["value"] = r.value;
  j["precost"] = r.precost;
  j["payment"] = r.payment;
  return j.dump();
}

DatasetRecord record_from_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  DatasetRecord r;
  r.episode = j.at("episode").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.t = j.at("t").get<int>();
  r.R_b = j.at("R_b").get<double>();
  r.R_b_hist = j.at("R_b_hist").get<double>();
  r.R_p = j.at("R_p").get<double>();
  r.A = j.at("A").get<double>();
  r.a_b = j.at("a_b").get<double>();
  r.a_p = j.at("a_p").get<double>();
  r.future_value = j.at("future_value").get<double>();
  r.s_bid = j.at("s_bid").get<std::vector<double>>();
  r.s_price = j.at("s_price").get<std::vector<double>>();
  r.wins = j.at("wins").get<int>();
  r.impressions = j.at("impressions").get<int>();
  r.value = j.at("value").get<double>();
  r.precost = j.at("precost").get<double>();
  r.payment = j.at("payment").get<double>();
  if (static_cast<int>(r.s_bid.size()) != kBidViewDim ||
      static_cast<int>(r.s_price.size()) != kPriceViewDim) {
    throw IoError("record has wrong state-view width");
  }
  return r;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_atomically(dir / "stage1.jsonl", records_text(dataset.stage1));
  write_atomically(dir / "dpo_pool.jsonl", records_text(dataset.dpo_pool));
  write_atomically(dir / "manifest.json",
                   manifest_json(dataset.manifest).dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  const fs::path manifest_path = dir / "manifest.json";
  try {
    ds.manifest = manifest_from_json(nlohmann::json::parse(read_file(manifest_path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  ds.stage1 = parse_records(dir / "stage1.jsonl");
  ds.dpo_pool = parse_records(dir / "dpo_pool.jsonl");
  if (static_cast<long>(ds.stage1.size()) != ds.manifest.stage1_records ||
      static_cast<long>(ds.dpo_pool.size()) != ds.manifest.dpo_records) {
    throw IoError(dir.string() + ": record counts disagree with manifest");
  }
  return ds;
}

DatasetManifest build_dataset(const GenerationConfig& config,
                              const fs::path& dir) {
  Dataset ds = generate_dataset(config);
  write_dataset(ds, dir);
  return ds.manifest;
}

std::map<int, std::vector<const DatasetRecord*>> group_by_episode(
    const std::vector<DatasetRecord>& records) {
  std::map<int, std::vector<const DatasetRecord*>> out;
  for (const auto& r : records) out[r.episode].push_back(&r);
  for (auto& [_, v] : out) {
    std::stable_sort(v.begin(), v.end(),
                     [](const DatasetRecord* a, const DatasetRecord* b) {
                       return a->t < b->t;
                     });
  }
  return out;
}

}  // namespace jointbid
