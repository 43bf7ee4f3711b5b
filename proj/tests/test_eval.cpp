// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jointbid/errors.hpp"
#include "jointbid/eval_harness.hpp"
#include "jointbid/rtg_metrics.hpp"
#include "jointbid/trajgen.hpp"
#include "test_util.hpp"

namespace jointbid {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint64_t> seed_range(std::uint64_t first, int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(first + i);
  return s;
}

TEST(EvaluatePolicy, ZeroBid) {
  const auto policy = make_zero_bid_policy();
  const EvalReport r = evaluate_policy("zero", *policy, EnvConfig{}, seed_range(1, 3));
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.score_precost, 0.0);
    EXPECT_EQ(row.budget_spent, 0.0);
    EXPECT_EQ(row.wins, 0);
    EXPECT_TRUE(std::isinf(row.ratio));
    EXPECT_FALSE(row.achieved);
  }
  EXPECT_EQ(r.summaries[0].achievement_rate, 0.0);
}

TEST(EvaluatePolicy, PidBaseline) {
  const EnvConfig env;
  const auto policy = make_pid_policy(ControllerConfig{}, env);
  const EvalReport r = evaluate_policy("pid", *policy, env, seed_range(1, 20), 4);
  ASSERT_EQ(r.summaries.size(), 1u);
  const EvalSummary& s = r.summaries[0];
  EXPECT_EQ(s.n, 20);
  EXPECT_TRUE(std::isfinite(s.mean_score_precost));
  EXPECT_GT(s.mean_ratio, 0.0);
  EXPECT_LT(s.mean_ratio, 10.0);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.achieved, row.ratio >= 0.8 && row.ratio <= 1.2);
  }
}

TEST(EvaluatePolicy, DeterministicAcrossWorkers) {
  const EnvConfig env;
  const auto policy = make_pid_policy(ControllerConfig{}, env);
  const auto seeds = seed_range(50, 6);
  const EvalReport a = evaluate_policy("pid", *policy, env, seeds, 1);
  const EvalReport b = evaluate_policy("pid", *policy, env, seeds, 3);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_THROW(evaluate_policy("pid", *policy, env, {}), UsageError);
}

TEST(ScoreEpisode, MatchesMemorylessReturnAtZero) {
  const EnvConfig env;
  const ControllerConfig k;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto policy = make_pid_policy(k, env);
    const EpisodeLog log = run_episode(*policy, env, seed);
    const EvalRow row = score_episode("pid", log);
    EXPECT_EQ(row.score_precost, rtg_bid_memoryless(series_of(log.final_ledger), 0));
    EXPECT_EQ(row.payment, log.final_ledger.cum_settled_cost());
  }
}

TEST(ModelPolicy, RunsAndIsDeterministic) {
  ModelConfig c = testing::small_config();
  auto params = std::make_shared<const ModelParams>(testing::live_params(c, 4, 0.1));
  ModelPolicy policy(params, EvalTargets{});
  const EnvConfig env;
  const EvalReport a = evaluate_policy("m", policy, env, seed_range(7, 3), 1);
  const EvalReport b = evaluate_policy("m", policy, env, seed_range(7, 3), 3);
  EXPECT_EQ(a.rows, b.rows);
}

TEST(AblationSuite, IdenticalCheckpointsAreNeutral) {
  Checkpoint ck;
  ck.params = testing::live_params(testing::small_config(), 5, 0.1);
  std::map<std::string, Checkpoint> all;
  for (const auto& v : kAblationVariants) all[v] = ck;
  const AblationTable t = ablation_suite(EnvConfig{}, seed_range(1, 3), all, {});
  ASSERT_EQ(t.report.summaries.size(), 4u);
  for (const auto& s : t.report.summaries) {
    EXPECT_EQ(s.mean_score_precost, t.report.summaries[0].mean_score_precost);
    EXPECT_EQ(s.mean_ratio, t.report.summaries[0].mean_ratio);
  }
  ASSERT_FALSE(t.flags.empty());
  for (const auto& f : t.flags) EXPECT_EQ(f.direction, Direction::kNeutral) << f.name;

  all.erase("his_rtg");
  EXPECT_THROW(ablation_suite(EnvConfig{}, seed_range(1, 1), all, {}), UsageError);
}

TEST(DirectionalFlags, Signs) {
  std::vector<EvalSummary> s(4);
  s[0].policy = "full";
  s[0].mean_score_precost = 10;
  s[1].policy = "stage1";
  s[1].mean_score_precost = 8;
  s[1].mean_ratio = 0.7;
  s[2].policy = "his_rtg";
  s[2].mean_score_precost = 6;
  s[2].mean_ratio = 0.95;
  s[3].policy = "no_gca";
  s[3].mean_score_precost = 12;
  std::map<std::string, Direction> got;
  for (const auto& f : directional_flags(s)) got[f.name] = f.direction;
  EXPECT_EQ(got["dpo_score_gain"], Direction::kPositive);
  EXPECT_EQ(got["gca_score_gain"], Direction::kNegative);
  EXPECT_EQ(got["his_rtg_ratio_closer"], Direction::kPositive);
  EXPECT_EQ(got["memoryless_score_higher"], Direction::kPositive);
  EXPECT_FALSE(got.contains("stage1_vs_pid"));
}

TEST(WriteReport, EmptyReportHeadersOnly) {
  const fs::path dir = fs::temp_directory_path() / "jointbid_eval_empty";
  fs::remove_all(dir);
  write_report(EvalReport{}, dir);
  EXPECT_TRUE(read_rows_csv(dir / "rows.csv").empty());
  std::ifstream in(dir / "summary.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1);
  EXPECT_TRUE(fs::exists(dir / "ablation.txt"));
  fs::remove_all(dir);
}

TEST(WriteReport, RowsRoundTripAndSummaryMeans) {
  const EnvConfig env;
  const auto pid = make_pid_policy(ControllerConfig{}, env);
  const auto zero = make_zero_bid_policy();
  const EvalReport r = merge_reports(
      {evaluate_policy("pid", *pid, env, seed_range(1, 4)),
       evaluate_policy("zero", *zero, env, seed_range(1, 2))});
  const fs::path dir = fs::temp_directory_path() / "jointbid_eval_rt";
  fs::remove_all(dir);
  write_report(r, dir);
  const auto rows = read_rows_csv(dir / "rows.csv");
  EXPECT_EQ(rows, r.rows);

  // Hand means from the parsed rows.
  double sum = 0.0, ratio = 0.0;
  int n = 0;
  for (const auto& row : rows) {
    if (row.policy != "pid") continue;
    sum += row.score_precost;
    ratio += row.ratio;
    ++n;
  }
  std::ifstream in(dir / "summary.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  std::vector<std::string> f;
  std::stringstream ss(first);
  for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
  ASSERT_EQ(f.size(), 11u);
  EXPECT_EQ(f[0], "pid");
  EXPECT_EQ(std::stoi(f[1]), n);
  EXPECT_NEAR(parse_double(f[2]), sum / n, 1e-12 * std::abs(sum));
  EXPECT_NEAR(parse_double(f[6]), ratio / n, 1e-12);
  fs::remove_all(dir);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
    EXPECT_EQ(parse_double(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_TRUE(std::isinf(parse_double(format_double(INFINITY))));
  EXPECT_THROW(parse_double("1.5x"), IoError);
}

}  // namespace
}  // namespace jointbid
