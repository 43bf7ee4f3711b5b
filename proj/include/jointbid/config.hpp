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

// Whole-run configuration, read from YAML. Every section is optional; a
// missing key keeps its default and an unknown key is an error.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jointbid/auction_env.hpp"
#include "jointbid/controllers.hpp"
#include "jointbid/dpo_finetune.hpp"
#include "jointbid/eval_harness.hpp"
#include "jointbid/model.hpp"
#include "jointbid/training.hpp"

namespace jointbid {

struct GenSettings {
  int episodes = 200;
  std::uint64_t seed = 1;

  bool operator==(const GenSettings&) const = default;
};

struct EvalSettings {
  std::uint64_t seed_start = 10000;
  int seed_count = 5;
  EvalTargets targets;

  std::vector<std::uint64_t> seeds() const;
  bool operator==(const EvalSettings&) const = default;
};

struct PathSettings {
  std::string data = "data";
  std::string out = "out";

  bool operator==(const PathSettings&) const = default;
};

struct Config {
  EnvConfig env;
  ControllerConfig controllers;
  ModelConfig model;
  TrainConfig train;
  DpoConfig dpo;
  GenSettings gen;
  EvalSettings eval;
  PathSettings paths;
  int workers = 1;

  /// Cross-section checks (for example model.horizon >= env.horizon) plus
  /// every section's own validation. Throws ConfigError.
  void validate() const;
  GenerationConfig generation() const;
  bool operator==(const Config&) const = default;
};

/// Defaults, with `workers` set to the available core count.
Config default_config();

Config parse_config_text(const std::string& yaml_text);
/// Throws IoError if the file cannot be read, ConfigError otherwise.
Config parse_config(const std::filesystem::path& path);
std::string serialize_config(const Config& config);

/// Defaults that reproduce published hyperparameters, for --help.
struct PublishedDefault {
  std::string key;
  std::string value;
};
std::vector<PublishedDefault> published_defaults();

}  // namespace jointbid
