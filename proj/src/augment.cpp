// src/augment.cpp

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

#include "mdd/augment.hpp"

#include <cmath>
#include <numeric>

#include "mdd/error.hpp"

namespace mdd::augment {

namespace {

std::vector<bool> Select(std::size_t n, const AugmentSpec &spec, Rng &rng) {
  std::vector<bool> chosen(n, false);
  if (spec.rate <= 0.0) return chosen;
  if (!spec.exact_count) {
    for (std::size_t i = 0; i < n; ++i) chosen[i] = rng.bernoulli(spec.rate);
    return chosen;
  }
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(spec.rate * static_cast<double>(n) - 1e-12)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(order[i], order[j]);
    chosen[order[i]] = true;
  }
  return chosen;
}

// Uniform pick from `pool` excluding `avoid`; returns avoid when nothing else exists.
const std::string &PickOther(const std::vector<std::string> &pool, const std::string &avoid, Rng &rng) {
  std::size_t others = pool.size();
  for (const auto &p : pool)
    if (p == avoid) --others;
  if (others == 0) return avoid;
  std::size_t k = rng.below(others);
  for (const auto &p : pool) {
    if (p == avoid) continue;
    if (k-- == 0) return p;
  }
  return avoid;
}

void RequireNonEmpty(std::span<const std::string> s, const char *op) {
  if (s.empty()) throw UsageError(std::string(op) + ": empty phoneme sequence");
}

}  // namespace

Method ParseMethod(const std::string &name) {
  if (name == "none") return Method::kNone;
  if (name == "ps") return Method::kPS;
  if (name == "vc") return Method::kVC;
  if (name == "cp") return Method::kCP;
  throw UsageError("unknown augmentation method '" + name + "' (expected none, ps, vc or cp)");
}

std::string MethodName(Method m) {
  switch (m) {
    case Method::kPS: return "ps";
    case Method::kVC: return "vc";
    case Method::kCP: return "cp";
    default: return "none";
  }
}

void AugmentSpec::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("augmentation rate must lie in [0, 1]");
  if (method == Method::kPS) {
    if (p_substitute < 0 || p_delete < 0 || p_insert < 0 || p_substitute + p_delete + p_insert <= 0)
      throw UsageError("PS outcome probabilities must be non-negative with a positive sum");
  }
  if (method == Method::kCP && (confusion == nullptr || confusion->empty()))
    throw UsageError("CP augmentation needs a non-empty confusion table");
}

Result augment_ps(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng) {
  RequireNonEmpty(s, "augment_ps");
  spec.validate();
  const auto chosen = Select(s.size(), spec, rng);
  const double total = spec.p_substitute + spec.p_delete + spec.p_insert;
  Result r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!chosen[i]) {
      r.sequence.push_back(s[i]);
      continue;
    }
    ++r.selected;
    ++r.modified;
    const double u = rng.uniform() * total;
    if (u < spec.p_substitute) {
      r.sequence.push_back(PickOther(phones.symbols(), s[i], rng));
    } else if (u < spec.p_substitute + spec.p_delete) {
      // dropped: the prompt now lacks a phoneme the speaker produced
    } else {
      r.sequence.push_back(s[i]);
      r.sequence.push_back(phones.symbols()[rng.below(phones.size())]);
    }
  }
  // The sentence encoder needs at least one position.
  if (r.sequence.empty()) r.sequence.push_back(s.front());
  return r;
}

Result augment_vc(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng) {
  RequireNonEmpty(s, "augment_vc");
  spec.validate();
  const auto chosen = Select(s.size(), spec, rng);
  Result r;
  r.sequence.assign(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!chosen[i]) continue;
    ++r.selected;
    const auto &pool = phones.class_of(s[i]) == PhoneClass::kVowel ? phones.vowels() : phones.consonants();
    r.sequence[i] = PickOther(pool, s[i], rng);
    if (r.sequence[i] != s[i]) ++r.modified;
  }
  return r;
}

Result augment_cp(std::span<const std::string> s, const AugmentSpec &spec, Rng &rng) {
  RequireNonEmpty(s, "augment_cp");
  spec.validate();
  const auto chosen = Select(s.size(), spec, rng);
  Result r;
  r.sequence.assign(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!chosen[i]) continue;
    ++r.selected;
    const auto *entries = spec.confusion->find(s[i]);
    if (!entries || entries->empty()) continue;
    long total = 0;
    for (const auto &e : *entries) total += e.count;
    if (total <= 0) continue;
    auto k = static_cast<long>(rng.below(static_cast<std::uint64_t>(total)));
    for (const auto &e : *entries) {
      if (k < e.count) {
        r.sequence[i] = e.replacement;
        break;
      }
      k -= e.count;
    }
    if (r.sequence[i] != s[i]) ++r.modified;
  }
  return r;
}

Result apply(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones, Rng &rng) {
  switch (spec.method) {
    case Method::kPS: return augment_ps(s, spec, phones, rng);
    case Method::kVC: return augment_vc(s, spec, phones, rng);
    case Method::kCP: return augment_cp(s, spec, rng);
    default: break;
  }
  Result r;
  r.sequence.assign(s.begin(), s.end());
  return r;
}

Sequence apply(std::span<const std::string> s, const AugmentSpec &spec, const PhoneSet &phones) {
  Rng rng(spec.seed);
  return apply(s, spec, phones, rng).sequence;
}

}  // namespace mdd::augment
