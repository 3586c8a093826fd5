// src/ndiff/ops.cpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mdd/ndiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eigen_util.hpp"
#include "mdd/error.hpp"

namespace mdd::nd {

using detail::Grad;
using detail::GradVec;
using detail::Value;

namespace {

void Require2D(const Tensor &a, const char *op) {
  if (!a.defined() || a.dim() != 2)
    throw UsageError(std::string(op) + ": expected a 2-D tensor" +
                     (a.defined() ? ", got " + ShapeString(a.shape()) : std::string()));
}

void RequireSameShape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.shape() != b.shape())
    throw UsageError(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
}

Tensor Finish(Tensor out, const char *op) {
  CheckFinite(out, op);
  return out;
}

// Elementwise unary op: f gives the value, df(x, y) the local derivative.
template <class F, class DF>
Tensor Unary(const Tensor &a, const char *op, F f, DF df) {
  std::vector<double> v(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(in[i]);
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), op);
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out, df]() {
      const auto x = a.data();
      const auto y = out.data();
      const auto &go = out.node()->grad;
      auto &ga = GradVec(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * df(x[i], y[i]);
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor &a, const Tensor &b) {
  Require2D(a, "matmul");
  Require2D(b, "matmul");
  if (a.cols() != b.rows())
    throw UsageError("matmul: inner dimensions differ " + ShapeString(a.shape()) + " x " +
                     ShapeString(b.shape()));
  Tensor out = Tensor::Zeros({a.rows(), b.cols()});
  detail::MutableValue(out).noalias() = Value(a) * Value(b);
  CheckFinite(out, "matmul");
  if (Tape::Recording({&a, &b})) {
    Tape::active()->record(out, [a, b, out]() {
      const auto go = detail::ConstMatMap(out.node()->grad.data(), out.rows(), out.cols());
      if (a.requires_grad()) Grad(a).noalias() += go * Value(b).transpose();
      if (b.requires_grad()) Grad(b).noalias() += Value(a).transpose() * go;
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor &a, const Tensor &b) {
  Require2D(a, "matmul_nt");
  Require2D(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw UsageError("matmul_nt: inner dimensions differ " + ShapeString(a.shape()) + " x " +
                     ShapeString(b.shape()) + "^T");
  Tensor out = Tensor::Zeros({a.rows(), b.rows()});
  detail::MutableValue(out).noalias() = Value(a) * Value(b).transpose();
  CheckFinite(out, "matmul_nt");
  if (Tape::Recording({&a, &b})) {
    Tape::active()->record(out, [a, b, out]() {
      const auto go = detail::ConstMatMap(out.node()->grad.data(), out.rows(), out.cols());
      if (a.requires_grad()) Grad(a).noalias() += go * Value(b);
      if (b.requires_grad()) Grad(b).noalias() += go.transpose() * Value(a);
    });
  }
  return out;
}

Tensor transpose(const Tensor &a) {
  Require2D(a, "transpose");
  Tensor out = Tensor::Zeros({a.cols(), a.rows()});
  detail::MutableValue(out) = Value(a).transpose();
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out]() {
      Grad(a) += detail::ConstMatMap(out.node()->grad.data(), out.rows(), out.cols()).transpose();
    });
  }
  return out;
}

Tensor add(const Tensor &a, const Tensor &b) {
  RequireSameShape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), "add");
  if (Tape::Recording({&a, &b})) {
    Tape::active()->record(out, [a, b, out]() {
      const auto &go = out.node()->grad;
      for (const Tensor *t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto &g = GradVec(*t);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor &a, const Tensor &b) {
  RequireSameShape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), "sub");
  if (Tape::Recording({&a, &b})) {
    Tape::active()->record(out, [a, b, out]() {
      const auto &go = out.node()->grad;
      if (a.requires_grad()) {
        auto &g = GradVec(a);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (b.requires_grad()) {
        auto &g = GradVec(b);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor &a, const Tensor &b) {
  RequireSameShape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), "mul");
  if (Tape::Recording({&a, &b})) {
    Tape::active()->record(out, [a, b, out]() {
      const auto &go = out.node()->grad;
      if (a.requires_grad()) {
        auto &g = GradVec(a);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto &g = GradVec(b);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor add_bias(const Tensor &a, const Tensor &bias) {
  Require2D(a, "add_bias");
  if (bias.size() != a.cols())
    throw UsageError("add_bias: bias of " + std::to_string(bias.size()) + " elements for " +
                     std::to_string(a.cols()) + " columns");
  Tensor out = a.clone();
  out.node()->grad.clear();
  out.node()->requires_grad = false;
  auto m = detail::MutableValue(out);
  const auto b = Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), static_cast<Eigen::Index>(bias.size()));
  m.rowwise() += b;
  CheckFinite(out, "add_bias");
  if (Tape::Recording({&a, &bias})) {
    Tape::active()->record(out, [a, bias, out]() {
      const auto go = detail::ConstMatMap(out.node()->grad.data(), out.rows(), out.cols());
      if (a.requires_grad()) Grad(a) += go;
      if (bias.requires_grad()) {
        auto gb = Eigen::Map<Eigen::RowVectorXd>(GradVec(bias).data(), static_cast<Eigen::Index>(bias.size()));
        gb += go.colwise().sum();
      }
    });
  }
  return out;
}

Tensor scale(const Tensor &a, double s) {
  return Unary(
      a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor sigmoid(const Tensor &a) {
  return Unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor &a) {
  return Unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor &a) {
  return Unary(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor &a) {
  return Unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor &a) {
  return Unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

namespace {

// Shared by softmax and masked_softmax. Masked columns hold exactly zero.
Tensor SoftmaxImpl(const Tensor &a, const std::vector<bool> *mask, const char *op) {
  Require2D(a, op);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> v(a.size(), 0.0);
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (!mask || (*mask)[j]) mx = std::max(mx, in[i * c + j]);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && !(*mask)[j]) continue;
      v[i * c + j] = std::exp(in[i * c + j] - mx);
      z += v[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] /= z;
  }
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), op);
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out, r, c]() {
      const auto y = out.data();
      const auto &go = out.node()->grad;
      auto &ga = GradVec(a);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * y[i * c + j];
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (go[i * c + j] - dot);
      }
    });
  }
  return out;
}

}  // namespace

Tensor softmax(const Tensor &a) { return SoftmaxImpl(a, nullptr, "softmax"); }

Tensor masked_softmax(const Tensor &a, const std::vector<bool> &mask) {
  Require2D(a, "masked_softmax");
  if (mask.size() != a.cols())
    throw UsageError("masked_softmax: mask of " + std::to_string(mask.size()) + " for " +
                     std::to_string(a.cols()) + " columns");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw UsageError("masked_softmax: all positions masked");
  return SoftmaxImpl(a, &mask, "masked_softmax");
}

Tensor log_softmax(const Tensor &a) {
  Require2D(a, "log_softmax");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> v(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double *row = in.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = row[j] - lse;
  }
  Tensor out = Finish(Tensor::FromData(a.shape(), std::move(v)), "log_softmax");
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out, r, c]() {
      const auto y = out.data();
      const auto &go = out.node()->grad;
      auto &ga = GradVec(a);
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += go[i * c + j];
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[i * c + j] - std::exp(y[i * c + j]) * s;
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (const auto &p : parts) {
    Require2D(p, "concat_cols");
    if (p.rows() != r) throw UsageError("concat_cols: row counts differ");
    c += p.cols();
  }
  Tensor out = Tensor::Zeros({r, c});
  auto o = detail::MutableValue(out);
  std::size_t off = 0;
  std::vector<Tensor> kept(parts.begin(), parts.end());
  bool rec = false;
  for (const auto &p : parts) {
    o.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols())) = Value(p);
    off += p.cols();
    rec = rec || Tape::Recording({&p});
  }
  if (rec) {
    Tape::active()->record(out, [kept, out]() {
      const auto go = detail::ConstMatMap(out.node()->grad.data(), out.rows(), out.cols());
      std::size_t off = 0;
      for (const auto &p : kept) {
        if (p.requires_grad())
          Grad(p) += go.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols()));
        off += p.cols();
      }
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto &p : parts) {
    Require2D(p, "concat_rows");
    if (p.cols() != c) throw UsageError("concat_rows: column counts differ");
    r += p.rows();
  }
  std::vector<double> v;
  v.reserve(r * c);
  bool rec = false;
  for (const auto &p : parts) {
    v.insert(v.end(), p.data().begin(), p.data().end());
    rec = rec || Tape::Recording({&p});
  }
  Tensor out = Tensor::FromData({r, c}, std::move(v));
  if (rec) {
    std::vector<Tensor> kept(parts.begin(), parts.end());
    Tape::active()->record(out, [kept, out]() {
      const auto &go = out.node()->grad;
      std::size_t off = 0;
      for (const auto &p : kept) {
        if (p.requires_grad()) {
          auto &g = GradVec(p);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[off + i];
        }
        off += p.size();
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor &a, std::size_t begin, std::size_t end) {
  Require2D(a, "slice_rows");
  if (begin >= end || end > a.rows())
    throw UsageError("slice_rows: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + std::to_string(a.rows()) + " rows");
  const std::size_t c = a.cols();
  std::vector<double> v(a.data().begin() + static_cast<long>(begin * c),
                        a.data().begin() + static_cast<long>(end * c));
  Tensor out = Tensor::FromData({end - begin, c}, std::move(v));
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out, begin, c]() {
      const auto &go = out.node()->grad;
      auto &ga = GradVec(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[begin * c + i] += go[i];
    });
  }
  return out;
}

Tensor sum(const Tensor &a) {
  double s = 0;
  for (double x : a.data()) s += x;
  Tensor out = Finish(Tensor::Scalar(s), "sum");
  if (Tape::Recording({&a})) {
    Tape::active()->record(out, [a, out]() {
      const double g = out.node()->grad[0];
      for (double &x : GradVec(a)) x += g;
    });
  }
  return out;
}

Tensor mean(const Tensor &a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

}  // namespace mdd::nd
