// tests/test_cli.cpp

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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "mdd/corpus.hpp"
#include "mdd/eval.hpp"
#include "mdd/features.hpp"
#include "test_util.hpp"

using namespace mdd;
using testing::Phones;
using testing::ScratchDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run Mdd(std::vector<std::string> args) {
  args.insert(args.begin(), "mdd");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const std::string &path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// A synthetic corpus and a tiny model trained to fit its training set.
struct Fixture {
  ScratchDir dir{"cli_fixture"};
  std::string train, dev, test, model;

  Fixture() {
    train = dir / "corpus/train.jsonl";
    dev = dir / "corpus/dev.jsonl";
    test = dir / "corpus/test.jsonl";
    model = dir / "model";
    const Run s = Mdd({"synth-corpus", "--out", dir / "corpus", "--utterances", "20", "--seed", "4", "--phone-ms", "90"});
    REQUIRE(s.code == 0);
    const Run t = Mdd({"train", "--train", train, "--dev", dev, "--out", model, "--set", "model.hidden=24", "--set",
                       "model.embed_dim=24", "--set", "model.conv_channels=4", "--set", "model.audio_layers=1", "--set",
                       "model.dropout=0", "--set", "optimizer.learning_rate=0.005", "--set", "optimizer.epochs=25",
                       "--set", "optimizer.batch_size=4", "--set", "decode.beam=1"});
    INFO(t.err);
    REQUIRE(t.code == 0);
  }
};

Fixture &Shared() {
  static Fixture f;
  return f;
}

double DecodePer(const std::string &checkpoint, const std::string &manifest, const std::string &out, int beam) {
  const Run r = Mdd({"decode", "--checkpoint", checkpoint, "--manifest", manifest, "--out", out, "--beam",
                     std::to_string(beam)});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const Manifest m = load_manifest(manifest, Phones());
  std::map<std::string, std::vector<std::string>> hyp;
  std::ifstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string id, p;
    ls >> id;
    while (ls >> p) hyp[id].push_back(p);
  }
  eval::ErrorTally tally;
  for (const auto &u : m.utterances) tally.add(eval::edit_align(u.annotated, hyp[u.id]));
  return tally.rate();
}

}  // namespace

TEST_CASE("help lists subcommands and defaults") {
  const Run top = Mdd({"--help"});
  CHECK(top.code == 0);
  for (const char *sub : {"synth-corpus", "augment", "train", "decode", "score", "inspect-attention"})
    CHECK(top.out.find(sub) != std::string::npos);
  const Run dec = Mdd({"decode", "--help"});
  CHECK(dec.code == 0);
  CHECK(dec.out.find("--beam") != std::string::npos);
  CHECK(dec.out.find("[10]") != std::string::npos);
  const Run keys = Mdd({"train", "--list-keys"});
  CHECK(keys.code == 0);
  CHECK(keys.out.find("model.hidden = 384") != std::string::npos);
  CHECK(keys.out.find("optimizer.learning_rate = 0.001") != std::string::npos);
  CHECK(keys.out.find("augment.method = none") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(Mdd({}).code == 1);
  CHECK(Mdd({"frobnicate"}).code == 1);
  CHECK(Mdd({"decode", "--manifest", "x"}).code == 1);
  CHECK(Mdd({"augment", "--manifest", "x", "--out", "y", "--rate", "2"}).code == 1);
  const Run r = Mdd({"train", "--list-keys", "--set", "bogus.key=1", "--train", "a", "--dev", "b", "--out", "c"});
  CHECK(r.code == 0);  // --list-keys wins
  ScratchDir dir("cli_usage");
  const Run bad = Mdd({"train", "--train", Shared().train, "--dev", Shared().dev, "--out", dir / "m", "--set",
                       "bogus.key=1"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bogus.key") != std::string::npos);
}

TEST_CASE("data errors exit with 2") {
  ScratchDir dir("cli_data");
  const Run missing = Mdd({"score", "--ref", dir / "none.jsonl", "--hyp", dir / "none.hyp"});
  CHECK(missing.code == 2);
  std::ofstream(dir / "bad.hyp") << "u1\tzz\n";
  const Run bad = Mdd({"score", "--ref", Shared().test, "--hyp", dir / "bad.hyp"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("zz") != std::string::npos);
  std::ofstream(dir / "junk.ckpt") << "junk";
  CHECK(Mdd({"decode", "--checkpoint", dir / "junk.ckpt", "--manifest", Shared().test, "--out", dir / "h"}).code == 2);
}

TEST_CASE("numeric errors exit with 3") {
  // Too little audio for the transcript: no CTC alignment exists.
  ScratchDir dir("cli_numeric");
  Waveform w;
  w.samples.assign(1600, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = 0.1 * std::sin(0.05 * static_cast<double>(i));
  WriteWav(dir / "short.wav", w);
  std::ofstream(dir / "m.jsonl")
      << R"({"id":"u1","audio":"short.wav","canonical":"s ih t aa b d k l m n","annotated":"s ih t aa b d k l m n"})"
      << "\n";
  const Run r = Mdd({"train", "--train", dir / "m.jsonl", "--dev", dir / "m.jsonl", "--out", dir / "model", "--set",
                     "model.hidden=4", "--set", "model.embed_dim=4", "--set", "model.conv_channels=2", "--set",
                     "model.audio_layers=1", "--set", "optimizer.epochs=1"});
  CHECK(r.code == 3);
  CHECK(r.err.find("frames") != std::string::npos);
}

TEST_CASE("augmenting twice with one seed gives identical files") {
  ScratchDir dir("cli_augment");
  for (const char *method : {"ps", "vc"}) {
    const Run a = Mdd({"augment", "--manifest", Shared().train, "--out", dir / "a.jsonl", "--method", method, "--rate",
                       "0.2", "--seed", "7"});
    const Run b = Mdd({"augment", "--manifest", Shared().train, "--out", dir / "b.jsonl", "--method", method, "--rate",
                       "0.2", "--seed", "7"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(Slurp(dir / "a.jsonl") == Slurp(dir / "b.jsonl"));
    CHECK(Slurp(dir / "a.jsonl") != Slurp(Shared().train));
    CHECK(a.out.find("modified") != std::string::npos);
    // The augmented manifest still resolves its audio.
    CHECK_NOTHROW(load_manifest(dir / "a.jsonl", Phones()));
  }
}

TEST_CASE("score writes text and JSON reports") {
  ScratchDir dir("cli_score");
  const Manifest m = load_manifest(Shared().test, Phones());
  std::ofstream hyp(dir / "parrot.hyp");
  for (const auto &u : m.utterances) {
    hyp << u.id << '\t';
    for (std::size_t i = 0; i < u.canonical.size(); ++i) hyp << (i ? " " : "") << u.canonical[i];
    hyp << '\n';
  }
  hyp.close();
  const Run r = Mdd({"score", "--ref", Shared().test, "--hyp", dir / "parrot.hyp", "--json", dir / "r.json", "--report",
                     dir / "r.txt"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Precision") != std::string::npos);
  CHECK(Slurp(dir / "r.txt") == r.out);
  const auto j = nlohmann::json::parse(Slurp(dir / "r.json"));
  // Parroting the prompt never rejects anything.
  CHECK(j["counts"]["false_rejection"] == 0);
  CHECK(j["counts"]["tr_correct_diagnosis"] == 0);
  CHECK(j["utterances"] == m.utterances.size());
}

TEST_CASE("training writes checkpoints and a log") {
  const Fixture &f = Shared();
  for (const char *name : {"best.ckpt", "last.ckpt", "train_log.jsonl", "config.ini"})
    CHECK(std::filesystem::exists(std::filesystem::path(f.model) / name));
  std::ifstream log(std::filesystem::path(f.model) / "train_log.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("dev_f"));
    ++n;
  }
  CHECK(n == 25);
}

TEST_CASE("wider beams do not hurt the fitted model") {
  const Fixture &f = Shared();
  ScratchDir dir("cli_beam");
  const std::string ckpt = (std::filesystem::path(f.model) / "last.ckpt").string();
  const double greedy = DecodePer(ckpt, f.train, dir / "b1.hyp", 1);
  const double wide = DecodePer(ckpt, f.train, dir / "b10.hyp", 10);
  INFO("beam 1 PER ", greedy, ", beam 10 PER ", wide);
  CHECK(greedy < 0.5);
  CHECK(wide <= greedy);
}

TEST_CASE("attention inspection writes a grid and an image") {
  const Fixture &f = Shared();
  ScratchDir dir("cli_attention");
  const Manifest m = load_manifest(f.dev, Phones());
  const Run r = Mdd({"inspect-attention", "--checkpoint", (std::filesystem::path(f.model) / "best.ckpt").string(),
                     "--manifest", f.dev, "--id", m.utterances[0].id, "--out-prefix", dir / "att", "--cell", "2"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string grid = Slurp(dir / "att.txt");
  CHECK(grid.rfind("frame\t" + m.utterances[0].canonical[0], 0) == 0);
  CHECK(Slurp(dir / "att.pgm").rfind("P2\n", 0) == 0);
  CHECK(Mdd({"inspect-attention", "--checkpoint", (std::filesystem::path(f.model) / "best.ckpt").string(), "--manifest",
             f.dev, "--id", "nobody", "--out-prefix", dir / "x"})
            .code == 2);
}
