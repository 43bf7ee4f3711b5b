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

#include "jointbid/eval_harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "jointbid/errors.hpp"
#include "jointbid/parallel.hpp"
#include "jointbid/rtg_metrics.hpp"

namespace jointbid {
namespace {

const char* kRowsHeader =
    "policy,seed,score_precost,score_payment,ratio,achieved,budget_spent,wins,"
    "value,precost,payment";
const char* kSummaryHeader =
    "policy,n,mean_score_precost,std_score_precost,mean_score_payment,"
    "std_score_payment,mean_ratio,std_ratio,achievement_rate,"
    "mean_budget_spent,mean_wins";

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double s = 0.0;
  for (double x : xs) s += x;
  const double mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2 || !std::isfinite(mean)) {
    return {mean, xs.size() < 2 ? 0.0 : std::numeric_limits<double>::quiet_NaN()};
  }
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  return {mean, std::sqrt(v / static_cast<double>(xs.size() - 1))};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

const EvalSummary* find_summary(const std::vector<EvalSummary>& s,
                                const std::string& name) {
  for (const auto& x : s) {
    if (x.policy == name) return &x;
  }
  return nullptr;
}

Direction compare(double lhs, double rhs) {
  if (lhs > rhs) return Direction::kPositive;
  if (lhs < rhs) return Direction::kNegative;
  return Direction::kNeutral;
}

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kPositive: return "positive";
    case Direction::kNegative: return "negative";
    default: return "neutral";
  }
}

}  // namespace

ModelPolicy::ModelPolicy(std::shared_ptr<const ModelParams> params,
                         EvalTargets targets)
    : params_(std::move(params)),
      bid_target_(targets.bid_rtg.value_or(params_->norm.rtg_scale)),
      price_target_(targets.price_rtg) {}

Action ModelPolicy::act(const BidObservation& bid_obs,
                        const PriceObservation& price_obs) {
  StepInputs s;
  s.t = bid_obs.t;
  s.R_b = bid_target_;
  s.R_p = price_target_;
  s.s_bid = bid_obs.view.features;
  s.s_price = price_obs.view.features;
  history_.push_back(std::move(s));
  const int end = static_cast<int>(history_.size()) - 1;
  const Action a =
      forward_joint(*params_, make_window(history_, end, params_->config.context));
  history_.back().a_b = a.bid_multiplier;
  history_.back().a_p = a.price_offset;
  return a;
}

std::unique_ptr<JointPolicy> ModelPolicy::clone() const {
  return std::make_unique<ModelPolicy>(*this);
}

std::unique_ptr<JointPolicy> make_pid_policy(const ControllerConfig& config,
                                             const EnvConfig& env) {
  return std::make_unique<SplitPolicy>(
      std::make_unique<BaseBidPolicy>(config, env.a_max),
      std::make_unique<PidPricingPolicy>(config, env.p_max));
}

std::unique_ptr<JointPolicy> make_zero_bid_policy() {
  return std::make_unique<SplitPolicy>(std::make_unique<ConstantBidPolicy>(0.0),
                                       std::make_unique<ZeroPricingPolicy>());
}

EvalRow score_episode(const std::string& policy, const EpisodeLog& log) {
  std::vector<double> values, precosts, payments;
  for (const auto& s : log.steps) {
    values.push_back(s.outcome.step_value);
    precosts.push_back(s.outcome.step_precost);
    payments.push_back(s.outcome.step_payment);
  }
  EvalRow r;
  r.policy = policy;
  r.seed = log.seed;
  r.score_precost = score(values, precosts);
  r.score_payment = score(values, payments);
  const CpaReport cpa = cpa_report(values, payments);
  r.ratio = cpa.ratio;
  r.achieved = cpa.achieved;
  r.budget_spent = log.final_ledger.budget_spent();
  r.wins = log.final_ledger.wins_total();
  r.value = log.final_ledger.cum_value();
  r.precost = log.final_ledger.cum_precost();
  r.payment = log.final_ledger.cum_settled_cost();
  return r;
}

std::vector<EvalSummary> summarize_rows(const std::vector<EvalRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalRow*>> by;
  for (const auto& r : rows) {
    if (!by.contains(r.policy)) order.push_back(r.policy);
    by[r.policy].push_back(&r);
  }
  std::vector<EvalSummary> out;
  for (const auto& name : order) {
    const auto& rs = by[name];
    std::vector<double> sp, sy, ratio, spent, wins;
    double achieved = 0.0;
    for (const EvalRow* r : rs) {
      sp.push_back(r->score_precost);
      sy.push_back(r->score_payment);
      ratio.push_back(r->ratio);
      spent.push_back(r->budget_spent);
      wins.push_back(static_cast<double>(r->wins));
      achieved += r->achieved ? 1.0 : 0.0;
    }
    EvalSummary s;
    s.policy = name;
    s.n = static_cast<int>(rs.size());
    std::tie(s.mean_score_precost, s.std_score_precost) = mean_std(sp);
    std::tie(s.mean_score_payment, s.std_score_payment) = mean_std(sy);
    std::tie(s.mean_ratio, s.std_ratio) = mean_std(ratio);
    s.achievement_rate = achieved / static_cast<double>(rs.size());
    s.mean_budget_spent = mean_std(spent).first;
    s.mean_wins = mean_std(wins).first;
    out.push_back(s);
  }
  return out;
}

EvalReport evaluate_policy(const std::string& name, const JointPolicy& policy,
                           const EnvConfig& env,
                           const std::vector<std::uint64_t>& seeds,
                           int workers) {
  if (seeds.empty()) throw UsageError("evaluate_policy: no seeds");
  env.validate();
  EvalReport report;
  report.rows = parallel_map(static_cast<int>(seeds.size()), workers, [&](int i) {
    std::unique_ptr<JointPolicy> p = policy.clone();
    return score_episode(name, run_episode(*p, env, seeds[i]));
  });
  report.summaries = summarize_rows(report.rows);
  return report;
}

EvalReport merge_reports(const std::vector<EvalReport>& parts) {
  EvalReport out;
  for (const auto& p : parts) {
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
  }
  out.summaries = summarize_rows(out.rows);
  return out;
}

std::vector<DirectionalFlag> directional_flags(
    const std::vector<EvalSummary>& summaries) {
  std::vector<DirectionalFlag> flags;
  auto add = [&](const std::string& name, const std::string& claim,
                 const std::string& a, const std::string& b, auto metric) {
    const EvalSummary* x = find_summary(summaries, a);
    const EvalSummary* y = find_summary(summaries, b);
    if (!x || !y) return;
    DirectionalFlag f;
    f.name = name;
    f.claim = claim;
    f.lhs = metric(*x);
    f.rhs = metric(*y);
    f.direction = compare(f.lhs, f.rhs);
    flags.push_back(f);
  };
  auto score_of = [](const EvalSummary& s) { return s.mean_score_precost; };
  auto closeness = [](const EvalSummary& s) { return -std::abs(s.mean_ratio - 1.0); };
  add("dpo_score_gain", "mean score: full >= stage1", "full", "stage1", score_of);
  add("gca_score_gain", "mean score: full vs no_gca", "full", "no_gca", score_of);
  add("his_rtg_ratio_closer", "|ratio - 1|: his_rtg closer than stage1",
      "his_rtg", "stage1", closeness);
  add("memoryless_score_higher", "mean score: stage1 > his_rtg", "stage1",
      "his_rtg", score_of);
  add("stage1_vs_pid", "mean score: stage1 >= pid", "stage1", "pid", score_of);
  return flags;
}

AblationTable ablation_suite(const EnvConfig& env,
                             const std::vector<std::uint64_t>& seeds,
                             const std::map<std::string, Checkpoint>& checkpoints,
                             const EvalTargets& targets,
                             const ControllerConfig* pid, int workers) {
  std::vector<EvalReport> parts;
  for (const auto& name : kAblationVariants) {
    auto it = checkpoints.find(name);
    if (it == checkpoints.end()) {
      throw UsageError("ablate: missing checkpoint for variant '" + name + "'");
    }
    auto params = std::make_shared<const ModelParams>(it->second.params);
    ModelPolicy policy(params, targets);
    parts.push_back(evaluate_policy(name, policy, env, seeds, workers));
  }
  if (pid) {
    auto p = make_pid_policy(*pid, env);
    parts.push_back(evaluate_policy("pid", *p, env, seeds, workers));
  }
  AblationTable table;
  table.report = merge_reports(parts);
  table.flags = directional_flags(table.report.summaries);
  return table;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw UsageError("format_double failed");
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw IoError("not a number: '" + s + "'");
  }
  return x;
}

std::string ablation_text(const EvalReport& report,
                          const std::vector<DirectionalFlag>& flags) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "policy" << std::right << std::setw(6)
      << "n" << std::setw(14) << "score" << std::setw(14) << "score_pay"
      << std::setw(12) << "ratio" << std::setw(10) << "achieved" << std::setw(12)
      << "spent" << '\n';
  out << std::fixed;
  for (const auto& s : report.summaries) {
    out << std::left << std::setw(10) << s.policy << std::right << std::setw(6)
        << s.n << std::setw(14) << std::setprecision(3) << s.mean_score_precost
        << std::setw(14) << s.mean_score_payment << std::setw(12)
        << std::setprecision(4) << s.mean_ratio << std::setw(10)
        << std::setprecision(2) << s.achievement_rate << std::setw(12)
        << std::setprecision(2) << s.mean_budget_spent << '\n';
  }
  if (!flags.empty()) {
    out << '\n';
    for (const auto& f : flags) {
      out << std::left << std::setw(26) << f.name << std::setw(10)
          << direction_name(f.direction) << f.claim << "  (" << format_double(f.lhs)
          << " vs " << format_double(f.rhs) << ")\n";
    }
  }
  return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& dir,
                  const std::vector<DirectionalFlag>* flags) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    return out;
  };
  {
    std::ofstream out = open(dir / "rows.csv");
    out << kRowsHeader << '\n';
    for (const auto& r : report.rows) {
      out << r.policy << ',' << r.seed << ',' << format_double(r.score_precost)
          << ',' << format_double(r.score_payment) << ',' << format_double(r.ratio)
          << ',' << (r.achieved ? 1 : 0) << ',' << format_double(r.budget_spent)
          << ',' << r.wins << ',' << format_double(r.value) << ','
          << format_double(r.precost) << ',' << format_double(r.payment) << '\n';
    }
    if (!out) throw IoError("write failed: " + (dir / "rows.csv").string());
  }
  {
    std::ofstream out = open(dir / "summary.csv");
    out << kSummaryHeader << '\n';
    for (const auto& s : report.summaries) {
      out << s.policy << ',' << s.n << ',' << format_double(s.mean_score_precost)
          << ',' << format_double(s.std_score_precost) << ','
          << format_double(s.mean_score_payment) << ','
          << format_double(s.std_score_payment) << ','
          << format_double(s.mean_ratio) << ',' << format_double(s.std_ratio)
          << ',' << format_double(s.achievement_rate) << ','
          << format_double(s.mean_budget_spent) << ','
          << format_double(s.mean_wins) << '\n';
    }
    if (!out) throw IoError("write failed: " + (dir / "summary.csv").string());
  }
  {
    std::ofstream out = open(dir / "ablation.txt");
    out << ablation_text(report, flags ? *flags : std::vector<DirectionalFlag>{});
  }
}

std::vector<EvalRow> read_rows_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRowsHeader) {
    throw IoError(path.string() + ": unexpected header");
  }
  std::vector<EvalRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) {
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected 11 fields");
    }
    EvalRow r;
    r.policy = f[0];
    r.seed = std::stoull(f[1]);
    r.score_precost = parse_double(f[2]);
    r.score_payment = parse_double(f[3]);
    r.ratio = parse_double(f[4]);
    r.achieved = f[5] == "1";
    r.budget_spent = parse_double(f[6]);
    r.wins = std::stol(f[7]);
    r.value = parse_double(f[8]);
    r.precost = parse_double(f[9]);
    r.payment = parse_double(f[10]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace jointbid
