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

#include "jointbid/autodiff.hpp"

#include <cmath>
#include <limits>

#include "jointbid/errors.hpp"

namespace jointbid {
namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw UsageError("autodiff: vars from different tapes");
}

void check_shape(bool ok, const char* op) {
  if (!ok) throw SizeError(std::string("autodiff: shape mismatch in ") + op);
}

bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs) {
    if (v.tape->requires_grad(v.id)) return true;
  }
  return false;
}

}  // namespace

Var Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::ref(const Mat& value, bool requires_grad) {
  Node n;
  n.ref = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Mat value, bool requires_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Mat& v = value(id);
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw UsageError("backward: var from another tape");
  const Mat& v = value(out.id);
  if (v.rows() != 1 || v.cols() != 1) {
    throw SizeError("backward: output must be 1 x 1");
  }
  if (!requires_grad(out.id)) return;
  grad(out.id)(0, 0) += 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() > 0) n.back();
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Tape* t = a.tape;
  Mat v = a.value() * b.value();
  const int ia = a.id, ib = b.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a, b}), [t, ia, ib, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia).noalias() += g * t->value(ib).transpose();
    if (t->requires_grad(ib)) t->grad(ib).noalias() += t->value(ia).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt");
  Tape* t = a.tape;
  Mat v = a.value() * b.value().transpose();
  const int ia = a.id, ib = b.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a, b}), [t, ia, ib, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia).noalias() += g * t->value(ib);
    if (t->requires_grad(ib)) t->grad(ib).noalias() += g.transpose() * t->value(ia);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape* t = a.tape;
  const int ia = a.id, ib = b.id;
  const int out = t->size();
  return t->push(a.value() + b.value(), any_grad({a, b}), [t, ia, ib, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia) += g;
    if (t->requires_grad(ib)) t->grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape* t = a.tape;
  const int ia = a.id, ib = b.id;
  const int out = t->size();
  return t->push(a.value() - b.value(), any_grad({a, b}), [t, ia, ib, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia) += g;
    if (t->requires_grad(ib)) t->grad(ib) -= g;
  });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Tape* t = a.tape;
  Mat v = a.value().rowwise() + row.value().row(0);
  const int ia = a.id, ir = row.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a, row}), [t, ia, ir, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia) += g;
    if (t->requires_grad(ir)) t->grad(ir) += g.colwise().sum();
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Tape* t = a.tape;
  Mat v = a.value().cwiseProduct(b.value());
  const int ia = a.id, ib = b.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a, b}), [t, ia, ib, out] {
    const Mat& g = t->grad(out);
    if (t->requires_grad(ia)) t->grad(ia) += g.cwiseProduct(t->value(ib));
    if (t->requires_grad(ib)) t->grad(ib) += g.cwiseProduct(t->value(ia));
  });
}

Var scale(Var a, double s) {
  Tape* t = a.tape;
  const int ia = a.id;
  const int out = t->size();
  return t->push(a.value() * s, any_grad({a}), [t, ia, out, s] {
    t->grad(ia) += t->grad(out) * s;
  });
}

Var square(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  const int out = t->size();
  return t->push(a.value().cwiseAbs2(), any_grad({a}), [t, ia, out] {
    t->grad(ia) += 2.0 * t->grad(out).cwiseProduct(t->value(ia));
  });
}

Var abs(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  const int out = t->size();
  return t->push(a.value().cwiseAbs(), any_grad({a}), [t, ia, out] {
    const Mat sign = t->value(ia).unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    t->grad(ia) += t->grad(out).cwiseProduct(sign);
  });
}

Var sigmoid(Var a) {
  Tape* t = a.tape;
  Mat v = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  const int ia = a.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a}), [t, ia, out] {
    const Mat& s = t->value(out);
    t->grad(ia).array() +=
        t->grad(out).array() * s.array() * (1.0 - s.array());
  });
}

Var softplus(Var a) {
  Tape* t = a.tape;
  Mat v = a.value().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  const int ia = a.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a}), [t, ia, out] {
    const Mat s = t->value(ia).unaryExpr([](double x) {
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      const double e = std::exp(x);
      return e / (1.0 + e);
    });
    t->grad(ia) += t->grad(out).cwiseProduct(s);
  });
}

Var gelu(Var a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double c = 0.044715;
  Tape* t = a.tape;
  Mat v = a.value().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x)));
  });
  const int ia = a.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a}), [t, ia, out] {
    const Mat d = t->value(ia).unaryExpr([](double x) {
      const double th = std::tanh(k * (x + c * x * x * x));
      return 0.5 * (1.0 + th) +
             0.5 * x * (1.0 - th * th) * k * (1.0 + 3.0 * c * x * x);
    });
    t->grad(ia) += t->grad(out).cwiseProduct(d);
  });
}

Var layernorm(Var x, Var gain, Var bias, double eps) {
  check_same_tape(x, gain);
  check_same_tape(x, bias);
  const Eigen::Index n = x.rows(), d = x.cols();
  check_shape(gain.rows() == 1 && gain.cols() == d && bias.rows() == 1 &&
                  bias.cols() == d,
              "layernorm");
  Tape* t = x.tape;
  const Mat& X = x.value();
  Mat xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  Mat v = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  v.rowwise() += bias.value().row(0);
  const int ix = x.id, ig = gain.id, ib = bias.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({x, gain, bias}),
                 [t, ix, ig, ib, out, xhat = std::move(xhat),
                  inv_std = std::move(inv_std)] {
                   const Mat& g = t->grad(out);
                   if (t->requires_grad(ig)) {
                     t->grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                   }
                   if (t->requires_grad(ib)) t->grad(ib) += g.colwise().sum();
                   if (t->requires_grad(ix)) {
                     const Mat dxhat =
                         (g.array().rowwise() * t->value(ig).row(0).array())
                             .matrix();
                     Mat& gx = t->grad(ix);
                     for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                       const double m1 = dxhat.row(r).mean();
                       const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                       gx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 -
                                                          xhat.row(r).array() * m2);
                     }
                   }
                 });
}

Var masked_softmax(Var scores, const Mask& allowed) {
  const Mat& S = scores.value();
  check_shape(allowed.rows() == S.rows() && allowed.cols() == S.cols(),
              "masked_softmax");
  Tape* t = scores.tape;
  Mat p = Mat::Zero(S.rows(), S.cols());
  for (Eigen::Index r = 0; r < S.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < S.cols(); ++c) {
      if (allowed(r, c)) mx = std::max(mx, S(r, c));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Eigen::Index c = 0; c < S.cols(); ++c) {
      if (allowed(r, c)) {
        p(r, c) = std::exp(S(r, c) - mx);
        z += p(r, c);
      }
    }
    p.row(r) /= z;
  }
  const int is = scores.id;
  const int out = t->size();
  return t->push(std::move(p), any_grad({scores}), [t, is, out] {
    const Mat& y = t->value(out);
    const Mat& g = t->grad(out);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    t->grad(is).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  Tape* t = parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.cols() == cols, "concat_rows");
    rows += p.rows();
    rg = rg || t->requires_grad(p.id);
  }
  Mat v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> ids;
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    ids.emplace_back(p.id, r);
    r += p.rows();
  }
  const int out = t->size();
  return t->push(std::move(v), rg, [t, ids = std::move(ids), out] {
    const Mat& g = t->grad(out);
    for (auto [id, start] : ids) {
      if (t->requires_grad(id)) {
        Mat& gi = t->grad(id);
        gi += g.middleRows(start, gi.rows());
      }
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  Tape* t = parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
    rg = rg || t->requires_grad(p.id);
  }
  Mat v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> ids;
  Eigen::Index c = 0;
  for (Var p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    ids.emplace_back(p.id, c);
    c += p.cols();
  }
  const int out = t->size();
  return t->push(std::move(v), rg, [t, ids = std::move(ids), out] {
    const Mat& g = t->grad(out);
    for (auto [id, start] : ids) {
      if (t->requires_grad(id)) {
        Mat& gi = t->grad(id);
        gi += g.middleCols(start, gi.cols());
      }
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index n) {
  check_shape(start >= 0 && n >= 0 && start + n <= a.rows(), "slice_rows");
  Tape* t = a.tape;
  const int ia = a.id;
  const int out = t->size();
  return t->push(a.value().middleRows(start, n), any_grad({a}),
                 [t, ia, out, start, n] {
                   t->grad(ia).middleRows(start, n) += t->grad(out);
                 });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
  check_shape(start >= 0 && n >= 0 && start + n <= a.cols(), "slice_cols");
  Tape* t = a.tape;
  const int ia = a.id;
  const int out = t->size();
  return t->push(a.value().middleCols(start, n), any_grad({a}),
                 [t, ia, out, start, n] {
                   t->grad(ia).middleCols(start, n) += t->grad(out);
                 });
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  Tape* t = a.tape;
  const Mat& A = a.value();
  Mat v(static_cast<Eigen::Index>(idx.size()), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check_shape(idx[i] >= 0 && idx[i] < A.rows(), "gather_rows");
    v.row(static_cast<Eigen::Index>(i)) = A.row(idx[i]);
  }
  const int ia = a.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a}), [t, ia, out, idx] {
    const Mat& g = t->grad(out);
    Mat& ga = t->grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var sum(Var a) {
  Tape* t = a.tape;
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  const int ia = a.id;
  const int out = t->size();
  return t->push(std::move(v), any_grad({a}), [t, ia, out] {
    t->grad(ia).array() += t->grad(out)(0, 0);
  });
}

}  // namespace jointbid
