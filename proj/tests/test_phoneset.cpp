// tests/test_phoneset.cpp

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

#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mdd/error.hpp"
#include "mdd/phoneset.hpp"
#include "test_util.hpp"

using mdd::ConfusionTable;
using mdd::DataError;
using mdd::FoldSource;
using mdd::PhoneClass;
using mdd::PhoneSet;
using mdd::testing::Phones;

namespace {

// Raw text of one section of the shipped config, read without the library.
std::vector<std::pair<std::string, std::string>> Section(const std::string &name) {
  std::ifstream in(mdd::testing::DataDir() + "/phoneset39.txt");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line, current;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      current = line.substr(1, line.find(']') - 1);
      continue;
    }
    if (current != name) continue;
    std::istringstream fields(line);
    std::string a, b;
    fields >> a >> b;
    out.emplace_back(a, b);
  }
  return out;
}

std::string SymbolsBlock(std::size_t n) {
  const auto syms = Section("symbols");
  std::string text = "[symbols]\n";
  for (std::size_t i = 0; i < n; ++i) text += syms[i].first + " " + syms[i].second + "\n";
  return text;
}

}  // namespace

TEST_CASE("shipped inventory has 39 symbols with indices after the blank") {
  const PhoneSet &ps = Phones();
  CHECK(ps.size() == 39);
  CHECK(ps.vocab_size() == 40);
  CHECK(ps.blank_id() == 0);
  for (const char *s : {"aa", "s", "z"}) CHECK(ps.contains(s));
  CHECK(ps.index_of(ps.symbols().front()) == 1);
  CHECK(ps.symbol_at(0) == std::string(mdd::kBlankSymbol));
  for (int i = 1; i <= 39; ++i) CHECK(ps.index_of(ps.symbol_at(i)) == i);
  CHECK(ps.vowels().size() + ps.consonants().size() == 39);
}

TEST_CASE("inventory of 38 symbols is rejected") {
  std::istringstream in(SymbolsBlock(38));
  try {
    PhoneSet::Parse(in, "short.txt");
    FAIL("expected DataError");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("inventory size != 39") != std::string::npos);
  }
}

TEST_CASE("self-mapping fold entry is the identity") {
  std::istringstream in(SymbolsBlock(39) + "[fold61]\naa aa\n");
  const PhoneSet ps = PhoneSet::Parse(in);
  CHECK(ps.fold("aa", FoldSource::kTimit61) == std::optional<std::string>("aa"));
}

TEST_CASE("folding of raw labels") {
  const PhoneSet &ps = Phones();
  CHECK(ps.fold("aa", FoldSource::kTimit61) == std::optional<std::string>("aa"));
  CHECK(ps.fold("ux", FoldSource::kTimit61) == std::optional<std::string>("uw"));
  CHECK_THROWS_AS(ps.fold("qq", FoldSource::kTimit61), DataError);
  CHECK_FALSE(ps.fold("q", FoldSource::kTimit61).has_value());
  const std::vector<std::string> raw = {"h#", "ux", "q", "ao", "h#"};
  CHECK(ps.fold_sequence(raw, FoldSource::kTimit61) == std::vector<std::string>{"sil", "uw", "aa", "sil"});
}

TEST_CASE("fold tables collapse onto exactly the 39 classes") {
  const PhoneSet &ps = Phones();
  for (const auto &[section, source] : {std::pair{"fold61", FoldSource::kTimit61}, {"fold48", FoldSource::kArctic48}}) {
    const auto rows = Section(section);
    std::set<std::string> targets;
    for (const auto &[raw, folded] : rows) {
      auto f = ps.fold(raw, source);
      if (folded == "-") {
        CHECK_FALSE(f.has_value());
      } else {
        REQUIRE(f.has_value());
        CHECK(*f == folded);
        targets.insert(*f);
      }
    }
    CHECK(targets.size() == 39);
  }
  CHECK(Section("fold61").size() == 61);
}

TEST_CASE("phonetic classes") {
  const PhoneSet &ps = Phones();
  CHECK(ps.class_of("aa") == PhoneClass::kVowel);
  CHECK(ps.class_of("s") == PhoneClass::kConsonant);
  CHECK_THROWS_AS(ps.class_of(mdd::kBlankSymbol), DataError);
  CHECK_THROWS_AS(ps.index_of(mdd::kBlankSymbol), DataError);
}

TEST_CASE("encode and decode round trip") {
  const PhoneSet &ps = Phones();
  const std::vector<std::string> seq = {"s", "ih", "t", "sil"};
  const auto ids = ps.encode(seq);
  for (int id : ids) CHECK(id >= 1);
  CHECK(ps.decode(ids) == seq);
  CHECK_THROWS_AS(ps.encode(std::vector<std::string>{"zz"}), DataError);
}

TEST_CASE("hash inside a label is not a comment") {
  std::istringstream in(SymbolsBlock(39) + "# note\n[fold61]\nh# sil  # trailing\n");
  const PhoneSet ps = PhoneSet::Parse(in);
  CHECK(ps.fold("h#", FoldSource::kTimit61) == std::optional<std::string>("sil"));
}

TEST_CASE("confusion table counts substitutions keyed by canonical") {
  const std::vector<std::pair<std::string, std::string>> pairs = {{"s", "z"}, {"s", "z"}, {"t", "t"}};
  const ConfusionTable t = ConfusionTable::Build(pairs);
  REQUIRE(t.pairs().size() == 1);
  const auto *z = t.find("z");
  REQUIRE(z != nullptr);
  REQUIRE(z->size() == 1);
  CHECK((*z)[0] == ConfusionTable::Entry{"s", 2});
  CHECK(t.find("s") == nullptr);
  CHECK(t.total() == 2);
  CHECK(ConfusionTable::Build({}).empty());
}

TEST_CASE("frequent z to s substitution shows up among replacements") {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 7; ++i) pairs.emplace_back("s", "z");
  pairs.emplace_back("th", "z");
  pairs.emplace_back("", "z");  // deletion, ignored
  const ConfusionTable t = ConfusionTable::Build(pairs);
  const auto *z = t.find("z");
  REQUIRE(z != nullptr);
  bool has_s = false;
  for (const auto &e : *z) has_s |= e.replacement == "s" && e.count == 7;
  CHECK(has_s);
  CHECK(t.total() == 8);
}

TEST_CASE("confusion table text round trip and validation") {
  ConfusionTable t;
  t.Add("z", "s", 9);
  t.Add("z", "th", 1);
  t.Add("eh", "hh", 2);
  std::ostringstream out;
  t.Write(out);
  std::istringstream in(out.str());
  const ConfusionTable back = ConfusionTable::Parse(in);
  CHECK(back == t);
  CHECK_NOTHROW(back.Validate(Phones()));
  ConfusionTable bad;
  bad.Add("z", "qq");
  CHECK_THROWS_AS(bad.Validate(Phones()), DataError);
  std::istringstream self("z z 3\n");
  CHECK_THROWS_AS(ConfusionTable::Parse(self), DataError);
  std::istringstream zero("z s 0\n");
  CHECK_THROWS_AS(ConfusionTable::Parse(zero), DataError);
}
