// tests/test_corpus.cpp

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
#include <iterator>

#include "doctest.h"
#include "mdd/corpus.hpp"
#include "mdd/error.hpp"
#include "mdd/eval.hpp"
#include "test_util.hpp"

using namespace mdd;
using testing::Phones;
using testing::ScratchDir;

namespace {

std::string Slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void Touch(const std::string &path) { std::ofstream(path) << "x"; }

FeatureMatrix Constant(std::size_t frames, double v) {
  FeatureMatrix f;
  f.frames = frames;
  f.dim = kStackedDim;
  f.values.assign(frames * f.dim, v);
  return f;
}

}  // namespace

TEST_CASE("manifest lines load in file order") {
  ScratchDir dir("manifest_order");
  for (const char *a : {"a.wav", "b.wav", "c.wav"}) Touch(dir / a);
  std::ofstream(dir / "m.jsonl") << R"({"id":"u2","audio":"b.wav","canonical":"s ih t","annotated":"s iy t"})" "\n"
                                 << R"({"id":"u1","audio":"a.wav","canonical":"aa","annotated":"aa"})" "\n"
                                 << "\n"
                                 << R"({"id":"u3","audio":"c.wav","canonical":"z","annotated":"s"})" "\n";
  const Manifest m = load_manifest(dir / "m.jsonl", Phones());
  REQUIRE(m.utterances.size() == 3);
  CHECK(m.utterances[0].id == "u2");
  CHECK(m.utterances[1].id == "u1");
  CHECK(m.utterances[2].id == "u3");
  CHECK(m.utterances[0].annotated == std::vector<std::string>{"s", "iy", "t"});
  CHECK(m.resolve("a.wav") == dir / "a.wav");
  CHECK(m.norm.empty());
}

TEST_CASE("manifest errors name the line") {
  ScratchDir dir("manifest_errors");
  Touch(dir / "a.wav");
  const auto expect = [&](const std::string &body, const std::string &needle) {
    std::ofstream(dir / "m.jsonl") << body;
    try {
      load_manifest(dir / "m.jsonl", Phones());
      FAIL("expected DataError for " << body);
    } catch (const DataError &e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  const std::string ok = R"({"id":"u1","audio":"a.wav","canonical":"aa","annotated":"aa"})" "\n";
  expect(ok + R"({"id":"u2","audio":"a.wav","canonical":"aa zz","annotated":"aa"})" "\n",
         "m.jsonl:2: unknown phoneme 'zz'");
  expect(ok + ok, ":2: duplicate id 'u1'");
  expect(R"({"id":"u1","audio":"nope.wav","canonical":"aa","annotated":"aa"})" "\n", ":1: missing audio");
  expect("{not json\n", ":1: malformed record");
  expect(R"({"id":"u1","audio":"a.wav","canonical":"","annotated":"aa"})" "\n", ":1:");
}

TEST_CASE("manifest write and load round trip with normalization") {
  ScratchDir dir("manifest_roundtrip");
  Touch(dir / "a.wav");
  Manifest m;
  m.norm.mean.assign(kFbankDim, 0.1);
  m.norm.stddev.assign(kFbankDim, 1.0 / 3.0);
  m.utterances.push_back({"x1", "a.wav", {"z", "aa"}, {"s", "aa"}});
  m.utterances.push_back({"x2", "a.wav", {"t"}, {"t"}});
  write_manifest(dir / "m.jsonl", m);
  const Manifest back = load_manifest(dir / "m.jsonl", Phones());
  CHECK(back.utterances == m.utterances);
  CHECK(back.norm.mean == m.norm.mean);
  CHECK(back.norm.stddev == m.norm.stddev);
  write_manifest(dir / "again.jsonl", back);
  CHECK(Slurp(dir / "m.jsonl") == Slurp(dir / "again.jsonl"));
}

TEST_CASE("feature cache replaces missing audio and agrees with extraction") {
  ScratchDir dir("feature_cache");
  SynthConfig cfg;
  cfg.utterances = 4;
  cfg.native_share = 0.25;
  cfg.l2_train_share = 0.25;
  cfg.dev_share = 0.25;
  const SynthCorpus c = generate_synthetic(cfg, Phones(), 3, dir.str());
  const Manifest m = load_manifest(dir / "train.jsonl", Phones());
  const Utterance &u = m.utterances.front();
  const FeatureMatrix direct = load_features(m, u);
  CHECK(direct.dim == kStackedDim);
  WriteFeatureCache(feature_cache_path(m, u), load_raw_features(m, u));
  const FeatureMatrix cached = load_features(m, u);
  CHECK(cached.values == direct.values);
  std::filesystem::remove(m.resolve(u.audio));
  CHECK_NOTHROW(load_manifest(dir / "train.jsonl", Phones()));
  CHECK(load_features(m, u).values == direct.values);
  CHECK(c.train.utterances.size() == 2);
}

TEST_CASE("synthetic split sizes") {
  const auto t = synthesize_transcripts(SynthConfig{}, Phones(), 1);
  std::size_t native = 0, l2_train = 0, dev = 0, test = 0;
  for (const auto &x : t) {
    if (x.split == "train") (x.kind == SpeakerKind::kNative ? native : l2_train)++;
    else if (x.split == "dev") ++dev;
    else ++test;
  }
  CHECK(native == 63);
  CHECK(l2_train == 19);
  CHECK(dev == 9);
  CHECK(test == 9);

  // The 6300 / 1800+897 / 900 grouping scaled by 1/100.
  SynthConfig grouped;
  grouped.utterances = 99;
  grouped.native_share = 63.0 / 99;
  grouped.l2_train_share = 0.0;
  grouped.dev_share = 27.0 / 99;
  std::size_t counts[3] = {0, 0, 0};
  for (const auto &x : synthesize_transcripts(grouped, Phones(), 1))
    ++counts[x.split == "train" ? 0 : x.split == "dev" ? 1 : 2];
  CHECK(counts[0] == 63);
  CHECK(counts[1] == 27);
  CHECK(counts[2] == 9);
}

TEST_CASE("synthetic error statistics") {
  SynthConfig clean;
  clean.utterances = 200;
  clean.error_rate = 0.0;
  for (const auto &x : synthesize_transcripts(clean, Phones(), 2)) CHECK(x.canonical == x.annotated);

  SynthConfig cfg;
  cfg.utterances = 1000;
  long errors = 0, positions = 0;
  for (const auto &x : synthesize_transcripts(cfg, Phones(), 2)) {
    CHECK(x.intended.size() == x.annotated.size());
    if (x.kind == SpeakerKind::kNative) {
      CHECK(x.canonical == x.annotated);
      continue;
    }
    positions += static_cast<long>(x.canonical.size());
    for (const auto &l : eval::classify_positions(x.canonical, x.annotated)) errors += l.type != eval::ErrorType::kCorrect;
    for (std::size_t k = 0; k < x.annotated.size(); ++k)
      if (!x.intended[k].empty()) CHECK(ConfusablePartner(Phones(), x.intended[k]) == x.annotated[k]);
  }
  const double frac = static_cast<double>(errors) / static_cast<double>(positions);
  INFO("mismatch fraction ", frac);
  CHECK(std::abs(frac - 0.15) <= 0.02);
}

TEST_CASE("confusable partners stay inside the class and pair up") {
  for (const auto &p : Phones().symbols()) {
    if (p == "sil") continue;
    const std::string q = ConfusablePartner(Phones(), p);
    CHECK(q != p);
    CHECK(Phones().class_of(q) == Phones().class_of(p));
  }
  CHECK(ConfusablePartner(Phones(), ConfusablePartner(Phones(), "aa")) == "aa");
}

TEST_CASE("generation is deterministic in config and seed") {
  ScratchDir a("synth_a"), b("synth_b"), c("synth_c");
  SynthConfig cfg;
  cfg.utterances = 12;
  cfg.accent_blend = 0.3;
  generate_synthetic(cfg, Phones(), 5, a.str());
  generate_synthetic(cfg, Phones(), 5, b.str());
  generate_synthetic(cfg, Phones(), 6, c.str());
  for (const char *f : {"train.jsonl", "dev.jsonl", "test.jsonl"}) CHECK(Slurp(a / f) == Slurp(b / f));
  CHECK(Slurp(a / "train.jsonl") != Slurp(c / "train.jsonl"));
  for (const auto &e : std::filesystem::directory_iterator(a / "audio"))
    CHECK(Slurp(e.path().string()) == Slurp(b / ("audio/" + e.path().filename().string())));
}

TEST_CASE("accented rendering only touches substituted phones") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.jitter_ms = 0.0;
  const std::vector<std::string> seq = {"aa", "s", "t"};
  const Waveform plain = render_phones(seq, cfg, Phones(), 9);
  const std::vector<std::string> intended = {"", "z", ""};
  cfg.accent_blend = 0.4;
  const Waveform accented = render_phones(seq, cfg, Phones(), 9, intended);
  REQUIRE(plain.samples.size() == accented.samples.size());
  const auto edge = static_cast<std::size_t>(cfg.edge_ms * 16), phone = static_cast<std::size_t>(cfg.phone_ms * 16);
  for (std::size_t n = 0; n < edge + phone; ++n) CHECK(plain.samples[n] == accented.samples[n]);
  double diff = 0;
  for (std::size_t n = edge + phone; n < edge + 2 * phone; ++n) diff += std::abs(plain.samples[n] - accented.samples[n]);
  CHECK(diff > 1.0);
  const std::vector<std::string> short_intended = {"z"};
  CHECK_THROWS_AS(render_phones(seq, cfg, Phones(), 9, short_intended), UsageError);
}

TEST_CASE("synthetic config validation") {
  SynthConfig c;
  c.pair_contrast = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.accent_blend = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.native_share = 0.9;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("batch planning") {
  const std::size_t lengths[] = {30, 10, 20, 50, 40};
  const auto plan = plan_batches(lengths, 2);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 2);
  CHECK(plan[1].size() == 2);
  CHECK(plan[2].size() == 1);
  CHECK(plan[0] == std::vector<std::size_t>{1, 2});
  CHECK(plan[2] == std::vector<std::size_t>{3});
  const auto unsorted = plan_batches(lengths, 2, false);
  CHECK(unsorted[0] == std::vector<std::size_t>{0, 1});
  // stable on ties
  const std::size_t ties[] = {5, 5, 5};
  CHECK(plan_batches(ties, 3)[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("padded batches") {
  const std::vector<FeatureMatrix> feats = {Constant(4, 1.0), Constant(4, 2.0), Constant(2, 3.0)};
  const std::vector<std::vector<int>> sents = {{1, 2}, {3}, {4, 5, 6}};
  const std::vector<std::vector<int>> targets = {{1}, {2, 3}, {4}};

  const std::size_t equal[] = {0, 1};
  const Batch e = make_batch(equal, feats, sents, targets);
  CHECK(e.padding_frames() == 0);

  const std::size_t all[] = {0, 2};
  const Batch b = make_batch(all, feats, sents, targets);
  CHECK(b.max_frames == 4);
  CHECK(b.max_tokens == 3);
  CHECK(b.padding_frames() == 2);
  CHECK(b.feat_lengths == std::vector<std::size_t>{4, 2});
  for (std::size_t t = 2; t < 4; ++t)
    for (std::size_t d = 0; d < kStackedDim; ++d) CHECK(b.features[(1 * 4 + t) * kStackedDim + d] == 0.0);
  CHECK(b.sentences == std::vector<int>{1, 2, 0, 4, 5, 6});
  CHECK(b.feature(1).values == feats[2].values);
  CHECK(b.feature(0).values == feats[0].values);
  CHECK(b.sentence(0) == sents[0]);
  CHECK(b.targets[0] == targets[0]);

  const auto batches = make_batches(feats, sents, targets, 2);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].items == std::vector<std::size_t>{2, 0});
  CHECK(batches[1].items == std::vector<std::size_t>{1});
}

TEST_CASE("sentence vocabularies") {
  const SentenceVocab ph(SentenceUnit::kPhoneme, Phones());
  CHECK(ph.size() == 40);
  const std::vector<std::string> s = {"s", "ih"};
  CHECK(ph.encode(s) == Phones().encode(s));
  const SentenceVocab ch(SentenceUnit::kCharacter, Phones());
  CHECK(ch.size() == 28);
  CHECK(ch.encode(s) == std::vector<int>{20, 1, 10, 9});
  CHECK(ParseSentenceUnit("character") == SentenceUnit::kCharacter);
  CHECK(SentenceUnitName(SentenceUnit::kPhoneme) == "phoneme");
  CHECK_THROWS_AS(ParseSentenceUnit("word"), UsageError);
}
