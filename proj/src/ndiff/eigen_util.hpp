// src/ndiff/eigen_util.hpp

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

// Internal helpers viewing tensor storage as Eigen matrices.

#ifndef MDD_NDIFF_EIGEN_UTIL_HPP_
#define MDD_NDIFF_EIGEN_UTIL_HPP_

#include <Eigen/Dense>

#include "mdd/ndiff/tensor.hpp"

namespace mdd::nd::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

inline ConstMatMap Value(const Tensor &t) {
  return ConstMatMap(t.node()->value.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

inline MatMap MutableValue(const Tensor &t) {
  return MatMap(t.node()->value.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

inline MatMap Grad(const Tensor &t) {
  return MatMap(t.node()->grad_buffer().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

inline std::vector<double> &GradVec(const Tensor &t) { return t.node()->grad_buffer(); }

inline ConstMatMap View(const double *p, std::size_t rows, std::size_t cols) {
  return ConstMatMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline MatMap MutableView(double *p, std::size_t rows, std::size_t cols) {
  return MatMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace mdd::nd::detail

#endif  // MDD_NDIFF_EIGEN_UTIL_HPP_
