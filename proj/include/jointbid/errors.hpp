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

#include <stdexcept>
#include <string>

namespace jointbid {

// Exception kinds map one-to-one onto CLI exit codes (see tools/).

/// Contract violation by the caller: stepping a terminal env, bad flags.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration parse or validation failure. `what()` names the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or format failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint integrity failures (checksum, version, shape mismatch).
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

/// A numerical run produced a non-finite quantity it cannot recover from.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Oracle size bound exceeded.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jointbid
