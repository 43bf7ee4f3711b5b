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

// Counter-based random numbers: every output is a pure function of
// (seed, stream id, counter), so any draw can be reproduced without
// replaying the draws before it.

#include <array>
#include <cstdint>
#include <limits>

namespace jointbid {

/// Philox4x32-10 block function (Salmon et al., Random123).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// A UniformRandomBitGenerator over one (seed, stream) pair. Copying the
/// object copies its position, which is all a snapshot needs.
class CounterRng {
 public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform double in the open interval (0, 1), 53 bits.
  double uniform();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  /// Index of the next 128-bit block to be generated.
  std::uint64_t block_index() const { return block_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_;
  Philox4x32::Counter buf_{};
  int used_ = 4;
};

/// Stream ids used by the simulator. Batches of step t live on stream
/// `kBatchStreamBase + t`, which keeps them independent of actions.
inline constexpr std::uint64_t kBatchStreamBase = 0x1000;
inline constexpr std::uint64_t kAuxStreamBase = 0x2000'0000;

}  // namespace jointbid
