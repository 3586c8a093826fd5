// include/mdd/error.hpp

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

#ifndef MDD_ERROR_HPP_
#define MDD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mdd {

// Bad input data: parse failures, unknown symbols, missing files, shape
// mismatches between a file and what the code expects.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string &what) : std::runtime_error(what) {}
};

// Misuse of an API (wrong shapes, invalid arguments).
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string &what) : std::invalid_argument(what) {}
};

// Non-finite values, diverging training.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string &what) : std::runtime_error(what) {}
};

}  // namespace mdd

#endif  // MDD_ERROR_HPP_
