// include/mdd/augment.hpp

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

// Random replacement of prompt phonemes. Only the sentence-encoder input is
// touched; the recognition target stays the annotated pronunciation.

#ifndef MDD_AUGMENT_HPP_
#define MDD_AUGMENT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdd/phoneset.hpp"
#include "mdd/rng.hpp"

namespace mdd::augment {

enum class Method { kNone, kPS, kVC, kCP };

/// "none", "ps", "vc", "cp". Throws UsageError otherwise.
Method ParseMethod(const std::string &name);
std::string MethodName(Method m);

struct AugmentSpec {
  Method method = Method::kNone;
  double rate = 0.0;
  std::uint64_t seed = 0;
  /// Select exactly ceil(rate * N) positions instead of Bernoulli(rate) each.
  bool exact_count = false;
  // PS outcome split for a selected position.
  double p_substitute = 0.8;
  double p_delete = 0.1;
  double p_insert = 0.1;
  const ConfusionTable *confusion = nullptr;  // CP only

  /// Throws UsageError for rates outside [0, 1], a bad PS split or CP
  /// without a non-empty table.
  void validate() const;
};

using Sequence = std::vector<std::string>;

struct Result {
  Sequence sequence;
  std::size_t selected = 0;  // positions drawn for modification
  std::size_t modified = 0;  // positions actually changed
};

Result augment_ps(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng);
Result augment_vc(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng);
Result augment_cp(std::span<const std::string> s, const AugmentSpec &spec, Rng &rng);

/// Dispatches on spec.method; kNone returns the input.
Result apply(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng);

/// Convenience: a fresh stream seeded from spec.seed.
Sequence apply(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones);

}  // namespace mdd::augment

#endif  // MDD_AUGMENT_HPP_
