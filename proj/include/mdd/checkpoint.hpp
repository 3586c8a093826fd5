// include/mdd/checkpoint.hpp

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

// Archive layout (all little-endian):
//   "MDDC" u32 version
//   str config (INI text), u32 epoch, f64 dev_f, f64 dev_per
//   u8 dtype (0 = f32, 1 = f64), u32 tensor count
//   per tensor: str name, u32 rank, u32 dims[rank], u64 payload offset
//   payload
// Strings are u32 length + bytes.

#ifndef MDD_CHECKPOINT_HPP_
#define MDD_CHECKPOINT_HPP_

#include <map>
#include <string>
#include <vector>

#include "mdd/config.hpp"
#include "mdd/model.hpp"
#include "mdd/ndiff/tensor.hpp"

namespace mdd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;  // RunConfig INI snapshot
  std::uint32_t epoch = 0;
  double dev_f = 0;
  double dev_per = 0;
  nd::Precision dtype = nd::Precision::kFloat32;
  struct Entry {
    std::string name;
    nd::Shape shape;
    std::vector<double> values;
  };
  std::vector<Entry> tensors;

  const Entry *find(const std::string &name) const;
};

void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
/// Throws DataError for a bad magic, unknown version, truncation or an
/// inconsistent tensor index.
Checkpoint load_checkpoint(const std::string &path);

/// Snapshot of every model tensor (trainable and state) under its name.
void CaptureModel(const Model &model, Checkpoint &ckpt);
/// Copies values into the model. Every model tensor must be present with the
/// same shape; extra non-model entries (prefix "optim.") are ignored, other
/// extras are errors. Throws DataError naming the offending tensor.
void RestoreModel(const Checkpoint &ckpt, Model &model);

}  // namespace mdd

#endif  // MDD_CHECKPOINT_HPP_
