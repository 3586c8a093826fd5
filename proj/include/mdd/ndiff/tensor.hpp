// include/mdd/ndiff/tensor.hpp

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

#ifndef MDD_NDIFF_TENSOR_HPP_
#define MDD_NDIFF_TENSOR_HPP_

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mdd::nd {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

/// Storage behind a Tensor handle.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;

  std::vector<double> &grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// Dense row-major array with an optional gradient accumulator.
///
/// Tensor is a handle: copies alias the same storage, which is what lets
/// parameter containers and layers share weights. Use clone() for a deep copy.
/// Values are held in double precision; see Precision for how 32-bit storage
/// is emulated for parameters.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape);
  static Tensor Filled(Shape shape, double v);
  static Tensor FromData(Shape shape, std::vector<double> data);
  static Tensor Scalar(double v);
  /// 2-D convenience: rows given as nested initializer lists.
  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  /// Extent of axis 0 / axis 1 of a 2-D tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double &at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor &set_requires_grad(bool on = true);
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient values; all zeros when nothing has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  Tensor clone() const;
  /// Same storage, distinct handle: shares values and gradients.
  const std::shared_ptr<TensorNode> &node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

/// Ordered record of differentiable operations.
///
/// Operations executed while a tape is active (see Tape::Scope) and touching
/// at least one tensor with requires_grad append a backward closure here.
/// Each thread has its own active tape, so independent tapes may run
/// concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Makes `tape` the active tape of the calling thread for the scope lifetime.
  class Scope {
   public:
    explicit Scope(Tape &tape);
    ~Scope();
    Scope(const Scope &) = delete;
    Scope &operator=(const Scope &) = delete;

   private:
    Tape *previous_;
  };

  static Tape *active();
  /// True when an op with these inputs must be recorded.
  static bool Recording(std::initializer_list<const Tensor *> inputs);

  void record(const Tensor &output, std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  friend void backward(const Tensor &loss, Tape &tape);
  struct Entry {
    std::shared_ptr<TensorNode> output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
};

/// Populates d loss / d t for every tracked tensor reachable on `tape`.
/// Intermediate gradients are recomputed on each call; leaf gradients
/// accumulate across calls until zero_grad(). Throws UsageError for a
/// non-scalar loss.
void backward(const Tensor &loss, Tape &tape);

/// Throws NumericError when any value is NaN or infinite.
void CheckFinite(const Tensor &t, const char *op);

enum class Precision { kFloat32, kFloat64 };

/// Rounds stored values to the given precision (no-op for kFloat64).
void RoundTo(Tensor &t, Precision p);

}  // namespace mdd::nd

#endif  // MDD_NDIFF_TENSOR_HPP_
