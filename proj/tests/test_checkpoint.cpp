// Copyright 2026 The jointbid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "jointbid/checkpoint.hpp"
#include "jointbid/errors.hpp"
#include "test_util.hpp"

namespace jointbid {
namespace {

namespace fs = std::filesystem;

Checkpoint random_checkpoint(const ModelConfig& c, std::uint64_t seed) {
  Checkpoint ck;
  ck.params = testing::live_params(c, seed);
  ck.params.norm = {12.5, 1.1, 0.4, -0.02, 0.13};
  ck.epoch = 7;
  ck.loss = 0.1 + 0.2;
  ck.optimizer.step = 42;
  for (const auto& [name, m] : ck.params.tensors) {
    ck.optimizer.m[name] = m * 1e-3;
    ck.optimizer.v[name] = m.cwiseAbs2();
  }
  return ck;
}

fs::path temp(const std::string& name) {
  return fs::temp_directory_path() / ("jointbid_ckpt_" + name);
}

TEST(Checkpoint, BitwiseRoundTrip) {
  ModelConfig c = testing::small_config();
  c.gca_literal = true;
  c.bid_rtg = BidRtg::kHistorical;
  const Checkpoint ck = random_checkpoint(c, 1);
  const fs::path p = temp("rt.jbck");
  save_checkpoint(ck, p);
  const Checkpoint back = load_checkpoint(p, &c);
  EXPECT_TRUE(back == ck);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
  EXPECT_EQ(std::memcmp(&back.loss, &ck.loss, sizeof(double)), 0);
  fs::remove(p);
}

TEST(Checkpoint, SpecialValuesSurvive) {
  Checkpoint ck = random_checkpoint(testing::small_config(), 2);
  ck.params.at("bid.time")(0, 0) = -0.0;
  ck.params.at("bid.time")(0, 1) = 5e-324;
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ck));
  EXPECT_TRUE(std::signbit(back.params.at("bid.time")(0, 0)));
  EXPECT_EQ(back.params.at("bid.time")(0, 1), 5e-324);
}

TEST(Checkpoint, TruncationDetected) {
  const std::string bytes = serialize_checkpoint(random_checkpoint(testing::small_config(), 3));
  for (size_t cut : {bytes.size() - 1, bytes.size() / 2, size_t{10}, size_t{0}}) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), CheckpointError) << cut;
  }
}

TEST(Checkpoint, CorruptionDetected) {
  std::string bytes = serialize_checkpoint(random_checkpoint(testing::small_config(), 4));
  bytes[bytes.size() / 2] ^= 0x01;
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}

TEST(Checkpoint, VersionMismatch) {
  std::string bytes = serialize_checkpoint(random_checkpoint(testing::small_config(), 5));
  bytes[4] = 2;
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, BadMagic) {
  std::string bytes = serialize_checkpoint(random_checkpoint(testing::small_config(), 6));
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointError);
}

TEST(Checkpoint, ShapeMismatch) {
  ModelConfig big;
  big.d_model = 64;
  const Checkpoint ck = random_checkpoint(big, 7);
  const fs::path p = temp("shape.jbck");
  save_checkpoint(ck, p);
  ModelConfig small = big;
  small.d_model = 32;
  try {
    load_checkpoint(p, &small);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
  }
  EXPECT_NO_THROW(load_checkpoint(p, &big));
  fs::remove(p);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint(temp("nope.jbck")), IoError);
}

TEST(Checkpoint, ModelConfigJson) {
  ModelConfig c = testing::small_config();
  c.init_seed = 99;
  c.head_layernorm = false;
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
}

}  // namespace
}  // namespace jointbid
