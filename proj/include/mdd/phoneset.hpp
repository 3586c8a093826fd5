// include/mdd/phoneset.hpp

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

#ifndef MDD_PHONESET_HPP_
#define MDD_PHONESET_HPP_

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mdd {

enum class PhoneClass { kVowel, kConsonant };
enum class FoldSource { kTimit61, kArctic48 };

/// Number of scorable symbols after folding (blank excluded).
inline constexpr std::size_t kInventorySize = 39;
/// Written in the fold sections for symbols that are removed entirely.
inline constexpr std::string_view kDropMarker = "-";
inline constexpr std::string_view kBlankSymbol = "<blank>";

/// The folded phoneme inventory.
///
/// Vocabulary indices used by every tensor put the CTC blank at 0 and the
/// symbols at 1..size() in file order. `symbols()` itself does not contain the
/// blank.
class PhoneSet {
 public:
  /// Reads the `[symbols]` / `[fold61]` / `[fold48]` config. Throws DataError.
  static PhoneSet Load(const std::string &path);
  static PhoneSet Parse(std::istream &in, const std::string &origin = "<stream>");

  const std::vector<std::string> &symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }
  int blank_id() const { return 0; }
  /// size() + 1 (blank included).
  int vocab_size() const { return static_cast<int>(symbols_.size()) + 1; }

  bool contains(std::string_view symbol) const;
  /// Vocabulary index (>= 1). Throws DataError for unknown symbols and for the blank.
  int index_of(std::string_view symbol) const;
  /// Inverse of index_of; index 0 yields the blank symbol.
  const std::string &symbol_at(int vocab_index) const;

  /// Maps a raw corpus label onto the folded inventory; std::nullopt means the
  /// label is dropped. Already-folded symbols map to themselves.
  std::optional<std::string> fold(std::string_view raw, FoldSource source) const;
  /// Folds a whole sequence, removing dropped labels.
  std::vector<std::string> fold_sequence(std::span<const std::string> raw,
                                         FoldSource source) const;

  PhoneClass class_of(std::string_view symbol) const;
  const std::vector<std::string> &vowels() const { return vowels_; }
  const std::vector<std::string> &consonants() const { return consonants_; }

  std::vector<int> encode(std::span<const std::string> symbols) const;
  std::vector<std::string> decode(std::span<const int> indices) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, PhoneClass> class_;
  std::vector<std::string> vowels_, consonants_;
  // Value is empty for dropped labels.
  std::unordered_map<std::string, std::string> fold61_, fold48_;
};

/// Canonical phoneme -> observed replacements with counts.
class ConfusionTable {
 public:
  struct Entry {
    std::string replacement;
    int count = 0;
    bool operator==(const Entry &) const = default;
  };

  /// Counts substitutions from aligned (annotated, canonical) pairs. Matches
  /// and pairs with an empty side (insertions/deletions) are ignored.
  static ConfusionTable Build(
      std::span<const std::pair<std::string, std::string>> annotated_canonical);

  static ConfusionTable Load(const std::string &path);
  static ConfusionTable Parse(std::istream &in, const std::string &origin = "<stream>");
  void Write(std::ostream &out) const;

  /// Adds `count` occurrences of canonical -> replacement.
  void Add(const std::string &canonical, const std::string &replacement, int count = 1);
  /// Throws DataError when a key or replacement is outside the phone set.
  void Validate(const PhoneSet &phones) const;

  /// Replacements for `canonical`, sorted by replacement symbol; nullptr when absent.
  const std::vector<Entry> *find(std::string_view canonical) const;
  bool empty() const { return pairs_.empty(); }
  /// Sum of all counts.
  long total() const;
  const std::map<std::string, std::vector<Entry>, std::less<>> &pairs() const {
    return pairs_;
  }

  bool operator==(const ConfusionTable &) const = default;

 private:
  std::map<std::string, std::vector<Entry>, std::less<>> pairs_;
};

}  // namespace mdd

#endif  // MDD_PHONESET_HPP_
