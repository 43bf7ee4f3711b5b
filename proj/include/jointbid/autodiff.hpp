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

// Small tape-based reverse-mode differentiation over dense double matrices.
// Row-major thinking throughout: a sequence is an N x d matrix, one row per
// token, and linear maps are applied on the right (X * W).

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace jointbid {

using Mat = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding its own copy of `value`.
  Var leaf(Mat value, bool requires_grad);
  /// Leaf referring to storage owned elsewhere; it must outlive the tape.
  Var ref(const Mat& value, bool requires_grad);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node; zero-filled on first use.
  Mat& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps the tape backwards.
  void backward(Var out);

  int size() const { return static_cast<int>(nodes_.size()); }

  // Used by the op implementations.
  Var push(Mat value, bool requires_grad, std::function<void()> back);

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1 x m row over every row of a
Var mul(Var a, Var b);        // elementwise
Var scale(Var a, double s);
Var square(Var a);
Var abs(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var gelu(Var a);  // tanh approximation
/// Row-wise layer normalisation with 1 x d gain and bias.
Var layernorm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Row-wise softmax; entries with mask == false get probability 0. A row
/// with no allowed entry is all zeros.
Var masked_softmax(Var scores, const Mask& allowed);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index n);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index n);
/// Rows of `a` picked by index; repeated indices accumulate on backward.
Var gather_rows(Var a, const std::vector<int>& idx);
Var sum(Var a);  // 1 x 1

}  // namespace jointbid
