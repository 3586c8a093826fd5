// include/mdd/config.hpp

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

#ifndef MDD_CONFIG_HPP_
#define MDD_CONFIG_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdd/augment.hpp"
#include "mdd/corpus.hpp"
#include "mdd/model.hpp"
#include "mdd/ndiff/tensor.hpp"

namespace mdd {

/// Everything a training run depends on. Stored as INI text:
///
///   [model]      hidden = 384 ...
///   [optimizer]  learning_rate = 0.001 ...
///   [augment]    method = vc, rate = 0.1 ...
///   [run]        seed = 1, precision = float32 ...
///
/// Every key can be overridden as "section.key=value".
struct RunConfig {
  ModelConfig model;

  double learning_rate = 1e-3;
  double clip = 5.0;
  std::size_t batch_size = 8;
  std::size_t epochs = 50;
  bool halve_on_plateau = false;
  std::size_t plateau_patience = 3;
  std::size_t early_stop_patience = 0;  // 0 = off

  augment::Method augment_method = augment::Method::kNone;
  double augment_rate = 0.0;
  bool augment_exact_count = false;
  double ps_substitute = 0.8;
  double ps_delete = 0.1;
  double ps_insert = 0.1;
  std::string confusion_table;  // CP only; path

  SentenceUnit sentence_unit = SentenceUnit::kPhoneme;
  std::size_t beam = 10;
  double prune_floor = -30.0;
  std::uint64_t seed = 1;
  nd::Precision precision = nd::Precision::kFloat32;

  /// Throws UsageError for invalid values.
  void validate() const;

  /// Parses INI text; unknown sections/keys and bad values throw UsageError.
  static RunConfig Parse(const std::string &text);
  static RunConfig Load(const std::string &path);
  std::string ToIni() const;

  /// "section.key=value"
  void override_with(const std::string &assignment);
  void set(const std::string &key, const std::string &value);
  std::string get(const std::string &key) const;
};

struct ConfigField {
  std::string key;  // "section.name"
  std::string help;
  std::function<std::string(const RunConfig &)> get;
  std::function<void(RunConfig &, const std::string &)> set;
};

/// All keys, in file order.
const std::vector<ConfigField> &RunConfigFields();

}  // namespace mdd

#endif  // MDD_CONFIG_HPP_
