// src/ndiff/tensor.cpp

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

#include "mdd/ndiff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mdd/error.hpp"

namespace mdd::nd {

std::size_t NumElements(const Shape &shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string ShapeString(const Shape &shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor Tensor::Zeros(Shape shape) { return Filled(std::move(shape), 0.0); }

Tensor Tensor::Filled(Shape shape, double v) {
  for (auto e : shape)
    if (e == 0) throw UsageError("tensor extents must be positive: " + ShapeString(shape));
  auto node = std::make_shared<TensorNode>();
  node->value.assign(NumElements(shape), v);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data) {
  for (auto e : shape)
    if (e == 0) throw UsageError("tensor extents must be positive: " + ShapeString(shape));
  if (NumElements(shape) != data.size())
    throw UsageError("data length " + std::to_string(data.size()) + " does not match shape " +
                     ShapeString(shape));
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(double v) { return FromData({1}, {v}); }

Tensor Tensor::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto &row : rows) {
    if (row.size() != c) throw UsageError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return FromData({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (dim() != 2) throw UsageError("expected a 2-D tensor, got " + ShapeString(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (dim() != 2) throw UsageError("expected a 2-D tensor, got " + ShapeString(shape()));
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + ShapeString(shape()));
  return node_->value[0];
}

Tensor &Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto node = std::make_shared<TensorNode>(*node_);
  return Tensor(std::move(node));
}

// --- tape --------------------------------------------------------------------

namespace {
thread_local Tape *g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape &tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape *Tape::active() { return g_active_tape; }

bool Tape::Recording(std::initializer_list<const Tensor *> inputs) {
  if (!g_active_tape) return false;
  for (const Tensor *t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

void Tape::record(const Tensor &output, std::function<void()> backward_fn) {
  output.node()->requires_grad = true;
  entries_.push_back({output.node(), std::move(backward_fn)});
}

void backward(const Tensor &loss, Tape &tape) {
  if (loss.size() != 1) throw UsageError("backward: loss must be scalar, got " + ShapeString(loss.shape()));
  for (auto &e : tape.entries_) {
    if (!e.output->grad.empty()) std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // nothing flowed into this node
    it->backward();
  }
}

void CheckFinite(const Tensor &t, const char *op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

void RoundTo(Tensor &t, Precision p) {
  if (p == Precision::kFloat64) return;
  for (double &v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace mdd::nd
