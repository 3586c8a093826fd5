// src/phoneset.cpp

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

#include "mdd/phoneset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mdd/error.hpp"

namespace mdd {

namespace {

std::string Trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> Fields(const std::string &line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string f; is >> f;) out.push_back(f);
  return out;
}

std::string Where(const std::string &origin, int line_no) {
  return origin + ":" + std::to_string(line_no) + ": ";
}

// '#' starts a comment only at the beginning of a field, so labels such as
// "h#" survive.
std::string StripComment(const std::string &line) {
  for (std::size_t i = 0; i < line.size(); ++i)
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) return line.substr(0, i);
  return line;
}

}  // namespace

PhoneSet PhoneSet::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open phone-set config " + path);
  return Parse(in, path);
}

PhoneSet PhoneSet::Parse(std::istream &in, const std::string &origin) {
  PhoneSet ps;
  enum class Section { kNone, kSymbols, kFold61, kFold48 } section = Section::kNone;
  // Fold targets are checked after the whole file is read so sections may
  // appear in any order.
  std::vector<std::pair<int, std::string>> fold_targets;

  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = StripComment(raw_line);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line == "[symbols]") section = Section::kSymbols;
      else if (line == "[fold61]") section = Section::kFold61;
      else if (line == "[fold48]") section = Section::kFold48;
      else throw DataError(Where(origin, line_no) + "unknown section " + line);
      continue;
    }
    const auto f = Fields(line);
    switch (section) {
      case Section::kNone:
        throw DataError(Where(origin, line_no) + "entry outside of any section");
      case Section::kSymbols: {
        if (f.empty() || f.size() > 2)
          throw DataError(Where(origin, line_no) + "expected 'label vowel|consonant'");
        if (f.size() == 1)
          throw DataError(Where(origin, line_no) + "class missing for symbol " + f[0]);
        if (f[0] == kBlankSymbol || f[0] == kDropMarker)
          throw DataError(Where(origin, line_no) + "reserved label " + f[0]);
        if (ps.index_.count(f[0]))
          throw DataError(Where(origin, line_no) + "duplicate symbol " + f[0]);
        PhoneClass cls;
        if (f[1] == "vowel") cls = PhoneClass::kVowel;
        else if (f[1] == "consonant") cls = PhoneClass::kConsonant;
        else throw DataError(Where(origin, line_no) + "unknown class " + f[1]);
        ps.symbols_.push_back(f[0]);
        ps.index_[f[0]] = static_cast<int>(ps.symbols_.size());
        ps.class_[f[0]] = cls;
        (cls == PhoneClass::kVowel ? ps.vowels_ : ps.consonants_).push_back(f[0]);
        break;
      }
      case Section::kFold61:
      case Section::kFold48: {
        if (f.size() != 2)
          throw DataError(Where(origin, line_no) + "expected 'raw folded' or 'raw -'");
        auto &table = section == Section::kFold61 ? ps.fold61_ : ps.fold48_;
        if (table.count(f[0]))
          throw DataError(Where(origin, line_no) + "duplicate fold entry " + f[0]);
        const std::string target = f[1] == kDropMarker ? std::string() : f[1];
        table[f[0]] = target;
        if (!target.empty()) fold_targets.emplace_back(line_no, target);
        break;
      }
    }
  }

  if (ps.symbols_.size() != kInventorySize) {
    throw DataError(origin + ": inventory size != " + std::to_string(kInventorySize) +
                    " (got " + std::to_string(ps.symbols_.size()) + ")");
  }
  for (const auto &[ln, target] : fold_targets) {
    if (!ps.contains(target))
      throw DataError(Where(origin, ln) + "folding target absent from [symbols]: " + target);
  }
  return ps;
}

bool PhoneSet::contains(std::string_view symbol) const {
  return index_.count(std::string(symbol)) > 0;
}

int PhoneSet::index_of(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw DataError("unknown phoneme '" + std::string(symbol) + "'");
  return it->second;
}

const std::string &PhoneSet::symbol_at(int vocab_index) const {
  static const std::string blank(kBlankSymbol);
  if (vocab_index == 0) return blank;
  if (vocab_index < 0 || vocab_index > static_cast<int>(symbols_.size()))
    throw DataError("vocabulary index out of range: " + std::to_string(vocab_index));
  return symbols_[vocab_index - 1];
}

std::optional<std::string> PhoneSet::fold(std::string_view raw, FoldSource source) const {
  const auto &table = source == FoldSource::kTimit61 ? fold61_ : fold48_;
  auto it = table.find(std::string(raw));
  if (it != table.end()) {
    if (it->second.empty()) return std::nullopt;
    return it->second;
  }
  if (contains(raw)) return std::string(raw);
  throw DataError("unknown raw symbol '" + std::string(raw) + "' for " +
                  (source == FoldSource::kTimit61 ? "timit61" : "arctic48"));
}

std::vector<std::string> PhoneSet::fold_sequence(std::span<const std::string> raw,
                                                 FoldSource source) const {
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (const auto &r : raw) {
    if (auto folded = fold(r, source)) out.push_back(std::move(*folded));
  }
  return out;
}

PhoneClass PhoneSet::class_of(std::string_view symbol) const {
  auto it = class_.find(std::string(symbol));
  if (it == class_.end()) throw DataError("no phonetic class for '" + std::string(symbol) + "'");
  return it->second;
}

std::vector<int> PhoneSet::encode(std::span<const std::string> symbols) const {
  std::vector<int> out;
  out.reserve(symbols.size());
  for (const auto &s : symbols) out.push_back(index_of(s));
  return out;
}

std::vector<std::string> PhoneSet::decode(std::span<const int> indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(symbol_at(i));
  return out;
}

// ---------------------------------------------------------------------------

ConfusionTable ConfusionTable::Build(
    std::span<const std::pair<std::string, std::string>> annotated_canonical) {
  ConfusionTable table;
  for (const auto &[annotated, canonical] : annotated_canonical) {
    if (annotated.empty() || canonical.empty() || annotated == canonical) continue;
    table.Add(canonical, annotated, 1);
  }
  return table;
}

void ConfusionTable::Add(const std::string &canonical, const std::string &replacement,
                         int count) {
  if (count < 1) throw UsageError("confusion count must be positive");
  if (canonical == replacement) throw UsageError("self-pair in confusion table: " + canonical);
  auto &entries = pairs_[canonical];
  auto it = std::lower_bound(entries.begin(), entries.end(), replacement,
                             [](const Entry &e, const std::string &r) { return e.replacement < r; });
  if (it != entries.end() && it->replacement == replacement) {
    it->count += count;
  } else {
    entries.insert(it, Entry{replacement, count});
  }
}

void ConfusionTable::Validate(const PhoneSet &phones) const {
  for (const auto &[canonical, entries] : pairs_) {
    if (!phones.contains(canonical))
      throw DataError("confusion table key not in phone set: " + canonical);
    for (const auto &e : entries) {
      if (!phones.contains(e.replacement))
        throw DataError("confusion table replacement not in phone set: " + e.replacement);
    }
  }
}

const std::vector<ConfusionTable::Entry> *ConfusionTable::find(std::string_view canonical) const {
  auto it = pairs_.find(canonical);
  return it == pairs_.end() ? nullptr : &it->second;
}

long ConfusionTable::total() const {
  long n = 0;
  for (const auto &[k, entries] : pairs_)
    for (const auto &e : entries) n += e.count;
  return n;
}

ConfusionTable ConfusionTable::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open confusion table " + path);
  return Parse(in, path);
}

ConfusionTable ConfusionTable::Parse(std::istream &in, const std::string &origin) {
  ConfusionTable table;
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const auto f = Fields(StripComment(raw_line));
    if (f.empty()) continue;
    if (f.size() != 3)
      throw DataError(Where(origin, line_no) + "expected 'canonical replacement count'");
    int count = 0;
    try {
      std::size_t used = 0;
      count = std::stoi(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
    } catch (const std::exception &) {
      throw DataError(Where(origin, line_no) + "bad count '" + f[2] + "'");
    }
    if (count < 1) throw DataError(Where(origin, line_no) + "count must be >= 1");
    if (f[0] == f[1]) throw DataError(Where(origin, line_no) + "self-pair " + f[0]);
    table.Add(f[0], f[1], count);
  }
  return table;
}

void ConfusionTable::Write(std::ostream &out) const {
  for (const auto &[canonical, entries] : pairs_)
    for (const auto &e : entries) out << canonical << ' ' << e.replacement << ' ' << e.count << '\n';
}

}  // namespace mdd
