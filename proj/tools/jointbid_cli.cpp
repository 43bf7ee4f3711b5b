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

// jointbid: dataset generation, training, fine-tuning and evaluation.
//
// Exit codes: 0 ok, 1 usage or config error, 2 verification failure,
// 3 I/O error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jointbid/checkpoint.hpp"
#include "jointbid/config.hpp"
#include "jointbid/dpo_finetune.hpp"
#include "jointbid/errors.hpp"
#include "jointbid/eval_harness.hpp"
#include "jointbid/hindsight_oracle.hpp"
#include "jointbid/trajgen.hpp"
#include "jointbid/training.hpp"

namespace fs = std::filesystem;
using namespace jointbid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitIo = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

class Log {
 public:
  explicit Log(bool quiet) : quiet_(quiet) {}
  template <typename... Ts>
  void operator()(const Ts&... parts) const {
    if (quiet_) return;
    (std::cerr << ... << parts) << '\n';
  }

 private:
  bool quiet_;
};

Config load_config(const Globals& g) {
  return g.config_path.empty() ? default_config() : parse_config(g.config_path);
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
  fs::path p = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  return p;
}

std::string published_footer() {
  std::ostringstream os;
  os << "Defaults that follow the published setting:\n";
  for (const auto& d : published_defaults()) {
    os << "  " << d.key << " = " << d.value << "  (published setting)\n";
  }
  os << "\nExit codes: 0 ok, 1 usage/config, 2 verification failure, 3 I/O.";
  return os.str();
}

// -- subcommands --------------------------------------------------------------

int run_gen(const Globals& g, std::optional<int> episodes) {
  Config c = load_config(g);
  if (episodes) c.gen.episodes = *episodes;
  if (g.seed) c.gen.seed = *g.seed;
  c.validate();
  const Log log(g.quiet);
  const fs::path dir = out_dir(g, c.paths.data);
  log("generating ", c.gen.episodes, " episodes (seed ", c.gen.seed, ", ",
      c.workers, " workers)");
  const DatasetManifest m = build_dataset(c.generation(), dir);
  log("stage-1 records ", m.stage1_records, ", preference pool ",
      m.dpo_records, " (dropped ", m.dropped_zero_advantage,
      " zero-advantage, ", m.dropped_low_future_value, " low future value)");
  std::cout << (dir / "manifest.json").string() << '\n';
  return kExitOk;
}

struct TrainFlags {
  std::string data;
  std::optional<std::string> bid_rtg;
  bool no_gca = false;
  std::optional<int> epochs;
};

int run_train(const Globals& g, const TrainFlags& f) {
  Config c = load_config(g);
  if (g.seed) c.train.seed = *g.seed;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.bid_rtg) c.model.bid_rtg = bid_rtg_from_string(*f.bid_rtg);
  if (f.no_gca) c.model.gca = false;
  c.validate();
  const Log log(g.quiet);
  const Dataset data = read_dataset(f.data.empty() ? c.paths.data : f.data);
  const fs::path dir = out_dir(g, c.paths.out);
  TrainHooks hooks;
  hooks.workers = c.workers;
  hooks.checkpoint_path = dir / "checkpoint.jbck";
  hooks.on_epoch = [&](const EpochLog& e) {
    log("epoch ", e.epoch, "  loss ", format_double(e.train_loss),
        e.best ? "  *" : "");
  };
  const TrainResult r = train_stage1(data.stage1, c.model, c.train, hooks);
  save_checkpoint(r.best, dir / "checkpoint.jbck");
  write_loss_curve(r.curve, dir / "loss_curve.csv");
  std::cout << (dir / "checkpoint.jbck").string() << '\n';
  return kExitOk;
}

int run_dpo(const Globals& g, const std::string& checkpoint,
            const std::string& data_dir) {
  Config c = load_config(g);
  if (g.seed) c.dpo.seed = *g.seed;
  c.validate();
  const Log log(g.quiet);
  const Checkpoint start = load_checkpoint(checkpoint);
  const Dataset data = read_dataset(data_dir.empty() ? c.paths.data : data_dir);
  const auto pairs = build_preference_pairs(data.stage1, start.params.config,
                                            c.dpo.advantage_threshold);
  log("preference pairs ", pairs.size());
  const DpoResult r =
      finetune(start, pairs, c.dpo, c.workers, [&](const DpoEpochLog& e) {
        log("epoch ", e.epoch, "  loss ", format_double(e.loss),
            "  mean |a - a+| ", format_double(e.mean_gap_plus));
      });
  const fs::path dir = out_dir(g, c.paths.out);
  save_checkpoint(r.checkpoint, dir / "dpo_checkpoint.jbck");
  {
    std::ofstream os(dir / "dpo_curve.csv");
    os << "epoch,loss,mean_gap_plus\n";
    os << "0,," << format_double(r.initial_gap_plus) << '\n';
    for (const auto& e : r.curve) {
      os << e.epoch << ',' << format_double(e.loss) << ','
         << format_double(e.mean_gap_plus) << '\n';
    }
    if (!os) throw IoError("cannot write dpo_curve.csv");
  }
  std::cout << (dir / "dpo_checkpoint.jbck").string() << '\n';
  return kExitOk;
}

// "name=path" or just "path" (named after the file stem).
std::pair<std::string, std::string> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

int run_eval(const Globals& g, const std::vector<std::string>& checkpoints,
             bool pid, std::optional<int> seed_count) {
  Config c = load_config(g);
  if (g.seed) c.eval.seed_start = *g.seed;
  if (seed_count) c.eval.seed_count = *seed_count;
  c.validate();
  if (checkpoints.empty() && !pid) {
    throw UsageError("eval: give at least one --checkpoint or --pid");
  }
  const auto seeds = c.eval.seeds();
  std::vector<EvalReport> parts;
  if (pid) {
    const auto policy = make_pid_policy(c.controllers, c.env);
    parts.push_back(evaluate_policy("pid", *policy, c.env, seeds, c.workers));
  }
  for (const auto& spec : checkpoints) {
    const auto [name, path] = split_named(spec);
    auto params =
        std::make_shared<const ModelParams>(load_checkpoint(path).params);
    const ModelPolicy policy(params, c.eval.targets);
    parts.push_back(evaluate_policy(name, policy, c.env, seeds, c.workers));
  }
  const EvalReport report = merge_reports(parts);
  const fs::path dir = out_dir(g, c.paths.out);
  write_report(report, dir);
  if (!g.quiet) std::cout << ablation_text(report, {});
  return kExitOk;
}

int run_ablate(const Globals& g, const std::map<std::string, std::string>& paths,
               bool pid, std::optional<int> seed_count) {
  Config c = load_config(g);
  if (g.seed) c.eval.seed_start = *g.seed;
  if (seed_count) c.eval.seed_count = *seed_count;
  c.validate();
  std::map<std::string, Checkpoint> ckpts;
  for (const auto& [name, path] : paths) {
    if (path.empty()) throw UsageError("ablate: missing checkpoint for " + name);
    ckpts.emplace(name, load_checkpoint(path));
  }
  const AblationTable t =
      ablation_suite(c.env, c.eval.seeds(), ckpts, c.eval.targets,
                     pid ? &c.controllers : nullptr, c.workers);
  const fs::path dir = out_dir(g, c.paths.out);
  write_report(t.report, dir, &t.flags);
  if (!g.quiet) std::cout << ablation_text(t.report, t.flags);
  return kExitOk;
}

int run_oracle(const Globals& g, int instances, int max_items) {
  if (instances < 1) throw UsageError("oracle-verify: --instances must be >= 1");
  if (max_items < 1 || max_items > kOracleMaxItems) {
    throw UsageError("oracle-verify: --max-items must be in [1, " +
                     std::to_string(kOracleMaxItems) + "]");
  }
  const std::uint64_t seed = g.seed.value_or(1);
  const fs::path dir = out_dir(g, ".");
  const fs::path path = dir / "oracle.csv";
  std::ofstream os(path);
  os << "index,items,budget,bal,joint,relaxed,tightened,equal_optima,"
        "pricing_feasible,corollary\n";
  int failures = 0;
  for (int i = 0; i < instances; ++i) {
    const OracleInstance inst = random_instance(seed, i, max_items);
    const TheoremReport r = verify_theorem1(inst);
    if (!r.all()) ++failures;
    os << i << ',' << inst.items.size() << ',' << format_double(inst.budget)
       << ',' << format_double(inst.bal) << ','
       << format_double(r.joint_objective) << ','
       << format_double(r.relaxed_objective) << ','
       << format_double(r.tightened_objective) << ',' << int(r.equal_optima)
       << ',' << int(r.pricing_feasible) << ',' << int(r.corollary_holds)
       << '\n';
  }
  os.close();
  if (!os) throw IoError("cannot write " + path.string());
  std::cout << instances - failures << "/" << instances
            << " instances verified\n";
  return failures == 0 ? kExitOk : kExitVerify;
}

int run_report(const Globals& g, const std::string& rows_path) {
  const EvalReport report{read_rows_csv(rows_path), {}};
  EvalReport full = merge_reports({report});
  const auto flags = directional_flags(full.summaries);
  if (!g.out.empty()) write_report(full, out_dir(g, g.out), &flags);
  std::cout << ablation_text(full, flags);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint bidding and pricing with return-conditioned transformers"};
  app.require_subcommand(1);
  app.footer(published_footer());

  Globals g;
  app.add_option("--config", g.config_path, "YAML config file")->check(
      CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed for the subcommand");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--quiet", g.quiet, "Only print result paths");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen", "Generate the trajectory dataset");
  std::optional<int> episodes;
  gen->add_option("--episodes", episodes, "Episodes (default 200)");

  auto* train = app.add_subcommand("train", "Stage-1 supervised training");
  TrainFlags tf;
  train->add_option("--data", tf.data, "Dataset directory");
  train->add_option("--bid-rtg", tf.bid_rtg, "memoryless or historical");
  train->add_flag("--no-gca", tf.no_gca, "Train without cross-attention");
  train->add_option("--epochs", tf.epochs, "Override train.epochs");

  auto* dpo = app.add_subcommand("dpo", "Preference fine-tuning of pricing");
  std::string dpo_ckpt, dpo_data;
  dpo->add_option("--checkpoint", dpo_ckpt, "Stage-1 checkpoint")->required();
  dpo->add_option("--data", dpo_data, "Dataset directory");

  auto* eval = app.add_subcommand("eval", "Evaluate policies over seeds");
  std::vector<std::string> eval_ckpts;
  bool eval_pid = false;
  std::optional<int> eval_seeds;
  eval->add_option("--checkpoint", eval_ckpts, "[name=]path, repeatable");
  eval->add_flag("--pid", eval_pid, "Include the PID baseline");
  eval->add_option("--seeds", eval_seeds, "Override eval.seed_count");

  auto* ablate = app.add_subcommand("ablate", "Ablation comparison table");
  std::map<std::string, std::string> ablate_paths;
  for (const auto& v : kAblationVariants) {
    std::string flag = "--" + v;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    ablate->add_option(flag, ablate_paths[v], v + " checkpoint")->required();
  }
  bool ablate_pid = false;
  std::optional<int> ablate_seeds;
  ablate->add_flag("--pid", ablate_pid, "Include the PID baseline");
  ablate->add_option("--seeds", ablate_seeds, "Override eval.seed_count");

  auto* oracle =
      app.add_subcommand("oracle-verify", "Check the joint/original optimum "
                                          "equivalence on random instances");
  int instances = 200, max_items = 12;
  oracle->add_option("--instances", instances, "Instance count")->capture_default_str();
  oracle->add_option("--max-items", max_items, "Largest instance size")->capture_default_str();

  auto* report = app.add_subcommand("report", "Summarise an existing rows.csv");
  std::string rows_path;
  report->add_option("--rows", rows_path, "rows.csv")->required()->check(
      CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return run_gen(g, episodes);
    if (*train) return run_train(g, tf);
    if (*dpo) return run_dpo(g, dpo_ckpt, dpo_data);
    if (*eval) return run_eval(g, eval_ckpts, eval_pid, eval_seeds);
    if (*ablate) return run_ablate(g, ablate_paths, ablate_pid, ablate_seeds);
    if (*oracle) return run_oracle(g, instances, max_items);
    if (*report) return run_report(g, rows_path);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
