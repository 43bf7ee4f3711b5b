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

#include "jointbid/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jointbid/errors.hpp"

namespace jointbid {
namespace {

using nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'J', 'B', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

ordered_json norm_json(const Normalizer& n) {
  ordered_json j;
  j["rtg_scale"] = n.rtg_scale;
  j["ab_mean"] = n.ab_mean;
  j["ab_std"] = n.ab_std;
  j["ap_mean"] = n.ap_mean;
  j["ap_std"] = n.ap_std;
  return j;
}

Normalizer norm_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.rtg_scale = j.at("rtg_scale").get<double>();
  n.ab_mean = j.at("ab_mean").get<double>();
  n.ab_std = j.at("ab_std").get<double>();
  n.ap_mean = j.at("ap_mean").get<double>();
  n.ap_std = j.at("ap_std").get<double>();
  return n;
}

}  // namespace

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["d_model"] = c.d_model;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["context"] = c.context;
  j["horizon"] = c.horizon;
  j["bid_dim"] = c.bid_dim;
  j["price_dim"] = c.price_dim;
  j["mlp_ratio"] = c.mlp_ratio;
  j["gca"] = c.gca;
  j["gca_literal"] = c.gca_literal;
  j["head_layernorm"] = c.head_layernorm;
  j["init_scale"] = c.init_scale;
  j["a_max"] = c.a_max;
  j["p_max"] = c.p_max;
  j["bid_rtg"] = to_string(c.bid_rtg);
  j["init_seed"] = c.init_seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.context = j.at("context").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.bid_dim = j.at("bid_dim").get<int>();
  c.price_dim = j.at("price_dim").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.gca = j.at("gca").get<bool>();
  c.gca_literal = j.at("gca_literal").get<bool>();
  c.head_layernorm = j.at("head_layernorm").get<bool>();
  c.init_scale = j.at("init_scale").get<double>();
  c.a_max = j.at("a_max").get<double>();
  c.p_max = j.at("p_max").get<double>();
  c.bid_rtg = bid_rtg_from_string(j.at("bid_rtg").get<std::string>());
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, const Mat*>> arrays;
  for (const auto& [name, m] : ckpt.params.tensors) arrays.emplace_back(name, &m);
  for (const auto& [name, m] : ckpt.optimizer.m) {
    arrays.emplace_back("adam.m/" + name, &m);
  }
  for (const auto& [name, m] : ckpt.optimizer.v) {
    arrays.emplace_back("adam.v/" + name, &m);
  }

  ordered_json manifest;
  manifest["format"] = "jointbid-checkpoint";
  manifest["config"] = model_config_to_json(ckpt.params.config);
  manifest["norm"] = norm_json(ckpt.params.norm);
  manifest["epoch"] = ckpt.epoch;
  manifest["loss"] = ckpt.loss;
  manifest["adam_step"] = ckpt.optimizer.step;
  ordered_json list = ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : arrays) {
    list.push_back({{"name", name},
                    {"rows", m->rows()},
                    {"cols", m->cols()},
                    {"offset", offset}});
    offset += static_cast<std::uint64_t>(m->size()) * sizeof(double);
  }
  manifest["tensors"] = std::move(list);
  const std::string text = manifest.dump();

  std::string out;
  out.reserve(text.size() + offset + 32);
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [_, m] : arrays) {
    out.append(reinterpret_cast<const char*>(m->data()),
               static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic or too short)");
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc_of(bytes.data(), body) != stored) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated)");
  }
  const auto mlen = take<std::uint64_t>(bytes, pos);
  if (pos + mlen > body) throw CheckpointError("checkpoint manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  }
  pos += mlen;
  const std::size_t data0 = pos;

  Checkpoint ck;
  try {
    ck.params.config = model_config_from_json(manifest.at("config"));
    ck.params.norm = norm_from_json(manifest.at("norm"));
    ck.epoch = manifest.at("epoch").get<int>();
    ck.loss = manifest.at("loss").get<double>();
    ck.optimizer.step = manifest.at("adam_step").get<long>();
    for (const auto& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto off = t.at("offset").get<std::uint64_t>();
      const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (rows < 0 || cols < 0 || data0 + off + n > body) {
        throw CheckpointError("tensor '" + name + "' lies outside the file");
      }
      Mat m(rows, cols);
      std::memcpy(m.data(), bytes.data() + data0 + off, n);
      if (name.starts_with("adam.m/")) {
        ck.optimizer.m.emplace(name.substr(7), std::move(m));
      } else if (name.starts_with("adam.v/")) {
        ck.optimizer.v.emplace(name.substr(7), std::move(m));
      } else {
        ck.params.tensors.emplace(name, std::move(m));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ModelConfig* expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Checkpoint ck;
  try {
    ck = deserialize_checkpoint(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  check_shapes(ck.params, ck.params.config);
  if (expect) check_shapes(ck.params, *expect);
  return ck;
}

void check_shapes(const ModelParams& params, const ModelConfig& expect) {
  const auto shapes = param_shapes(expect);
  for (const auto& [name, shape] : shapes) {
    auto it = params.tensors.find(name);
    if (it == params.tensors.end()) {
      throw CheckpointError("shape mismatch: tensor '" + name + "' is missing");
    }
    if (it->second.rows() != shape.first || it->second.cols() != shape.second) {
      throw CheckpointError(
          "shape mismatch: tensor '" + name + "' is " +
          std::to_string(it->second.rows()) + "x" +
          std::to_string(it->second.cols()) + ", config expects " +
          std::to_string(shape.first) + "x" + std::to_string(shape.second));
    }
  }
  for (const auto& [name, _] : params.tensors) {
    if (!shapes.contains(name)) {
      throw CheckpointError("shape mismatch: unexpected tensor '" + name + "'");
    }
  }
}

}  // namespace jointbid
