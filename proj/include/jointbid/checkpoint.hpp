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

// Binary checkpoint format, version 1:
//
//   "JBCK"  u32 version  u64 manifest_bytes  manifest (JSON)
//   tensor data, f64 little-endian, column-major, in manifest order
//   u32 CRC-32 of every byte before it
//
// The manifest lists each tensor's name, shape and byte offset plus the
// model configuration, the normaliser and training metadata.

#include <cstdint>
#include <filesystem>
#include <string>

#include "jointbid/model.hpp"
#include "json.hpp"

namespace jointbid {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct AdamState {
  long step = 0;
  Tensors m;
  Tensors v;

  bool operator==(const AdamState& o) const {
    return step == o.step && tensors_equal(m, o.m) && tensors_equal(v, o.v);
  }
};

struct Checkpoint {
  ModelParams params;
  AdamState optimizer;
  int epoch = 0;
  double loss = 0.0;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on bad magic, version, checksum or layout.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// With `expect`, every tensor must have the shape that config implies.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ModelConfig* expect = nullptr);

/// Throws CheckpointError listing the first mismatching tensor.
void check_shapes(const ModelParams& params, const ModelConfig& expect);

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace jointbid
