// include/mdd/ndiff/ops.hpp

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

// Differentiable primitives. Matrix ops take 2-D tensors; elementwise ops
// accept any shape. Every op validates shapes (UsageError) and rejects
// non-finite results (NumericError).

#ifndef MDD_NDIFF_OPS_HPP_
#define MDD_NDIFF_OPS_HPP_

#include <span>
#include <vector>

#include "mdd/ndiff/tensor.hpp"

namespace mdd::nd {

Tensor matmul(const Tensor &a, const Tensor &b);     // (m,k) x (k,n)
Tensor matmul_nt(const Tensor &a, const Tensor &b);  // (m,k) x (n,k)^T
Tensor transpose(const Tensor &a);

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
/// a (m,n) + bias broadcast over rows; bias has n elements.
Tensor add_bias(const Tensor &a, const Tensor &bias);
Tensor scale(const Tensor &a, double s);

Tensor sigmoid(const Tensor &a);
Tensor tanh(const Tensor &a);
Tensor relu(const Tensor &a);
Tensor exp(const Tensor &a);
Tensor log(const Tensor &a);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor &a);
Tensor log_softmax(const Tensor &a);
/// Row-wise softmax over the columns whose mask entry is true; masked columns
/// get exactly zero weight. Throws UsageError when every column is masked.
Tensor masked_softmax(const Tensor &a, const std::vector<bool> &mask);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
/// Rows [begin, end).
Tensor slice_rows(const Tensor &a, std::size_t begin, std::size_t end);

Tensor sum(const Tensor &a);
Tensor mean(const Tensor &a);

}  // namespace mdd::nd

#endif  // MDD_NDIFF_OPS_HPP_
