// tools/cli.cpp

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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mdd/augment.hpp"
#include "mdd/checkpoint.hpp"
#include "mdd/config.hpp"
#include "mdd/corpus.hpp"
#include "mdd/error.hpp"
#include "mdd/eval.hpp"
#include "mdd/trainer.hpp"

namespace mdd::cli {

namespace fs = std::filesystem;

namespace {

std::string JoinWords(const std::vector<std::string> &w) {
  std::string s;
  for (const auto &x : w) {
    if (!s.empty()) s += ' ';
    s += x;
  }
  return s;
}

void WriteText(const std::string &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

/// "id<TAB>phone phone ..." per line.
std::map<std::string, std::vector<std::string>> ReadHypotheses(const std::string &path, const PhoneSet &phones) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hypotheses " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string id, p;
    ls >> id;
    std::vector<std::string> seq;
    while (ls >> p) {
      if (!phones.contains(p)) throw DataError(path + ":" + std::to_string(n) + ": unknown phoneme '" + p + "'");
      seq.push_back(p);
    }
    if (!out.emplace(id, std::move(seq)).second)
      throw DataError(path + ":" + std::to_string(n) + ": duplicate id '" + id + "'");
  }
  return out;
}

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<Model> model;
};

LoadedModel LoadModel(const std::string &path, const PhoneSet &phones) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedModel m;
  m.config = RunConfig::Parse(ckpt.config);
  m.model = std::make_unique<Model>(BuildModelConfig(m.config, phones), 0);
  RestoreModel(ckpt, *m.model);
  return m;
}

std::string HypothesesText(const std::vector<Decoded> &hyps) {
  std::string s;
  for (const auto &h : hyps) s += h.id + "\t" + JoinWords(h.recognized) + "\n";
  return s;
}

// --- subcommands ----------------------------------------------------------------

struct Common {
  std::string phoneset = DefaultPhoneSetPath();
  std::size_t workers = 1;
};

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 1;
  SynthConfig cfg;
};

int RunSynth(const SynthArgs &a, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  const SynthCorpus corpus = generate_synthetic(a.cfg, phones, a.seed, a.out);
  out << "wrote " << corpus.train.utterances.size() << " train, " << corpus.dev.utterances.size() << " dev, "
      << corpus.test.utterances.size() << " test utterances to " << a.out << "\n";
  return kOk;
}

int RunExtract(const std::string &manifest_path, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  const Manifest m = load_manifest(manifest_path, phones);
  std::size_t written = 0;
  for (const auto &u : m.utterances) {
    const std::string audio = m.resolve(u.audio);
    if (!fs::exists(audio)) continue;  // cache-only entry
    FeatureMatrix f = compute_fbank(ReadWav(audio));
    WriteFeatureCache(feature_cache_path(m, u), f);
    ++written;
  }
  out << "wrote " << written << " feature caches\n";
  return kOk;
}

struct AugmentArgs {
  std::string manifest, out, method = "vc", confusion;
  double rate = 0.10;
  std::uint64_t seed = 1;
  bool exact_count = false;
};

int RunAugment(const AugmentArgs &a, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  Manifest m = load_manifest(a.manifest, phones);
  augment::AugmentSpec spec;
  spec.method = augment::ParseMethod(a.method);
  spec.rate = a.rate;
  spec.seed = a.seed;
  spec.exact_count = a.exact_count;
  std::optional<ConfusionTable> table;
  if (!a.confusion.empty()) {
    table = ConfusionTable::Load(a.confusion);
    table->Validate(phones);
    spec.confusion = &*table;
  }
  spec.validate();
  std::size_t modified = 0, total = 0;
  for (auto &u : m.utterances) {
    Rng rng(Rng::Derive(a.seed, "augment:" + u.id));
    auto r = augment::apply(u.canonical, spec, phones, rng);
    total += u.canonical.size();
    modified += r.modified;
    u.canonical = std::move(r.sequence);
  }
  // Audio paths stay valid relative to the new location.
  const fs::path out_dir = fs::absolute(a.out).parent_path();
  for (auto &u : m.utterances)
    if (!fs::path(u.audio).is_absolute())
      u.audio = fs::relative(fs::absolute(m.resolve(u.audio)), out_dir).string();
  write_manifest(a.out, m);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "modified %zu of %zu prompt positions (%.4f)\n", modified, total,
                total ? static_cast<double>(modified) / static_cast<double>(total) : 0.0);
  out << buf;
  return kOk;
}

struct TrainArgs {
  std::string config, train, dev, out;
  std::vector<std::string> overrides;
  bool list_keys = false;
};

int RunTrain(const TrainArgs &a, const Common &c, std::ostream &out, std::ostream &err) {
  if (a.list_keys) {
    const RunConfig defaults;
    for (const auto &f : RunConfigFields()) out << f.key << " = " << f.get(defaults) << "    # " << f.help << "\n";
    return kOk;
  }
  if (a.train.empty() || a.dev.empty() || a.out.empty())
    throw UsageError("train needs --train, --dev and --out");
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::Load(a.config);
  for (const auto &o : a.overrides) cfg.override_with(o);
  cfg.validate();
  fs::create_directories(a.out);
  WriteText((fs::path(a.out) / "config.ini").string(), cfg.ToIni());

  const PreparedSet train = Prepare(load_manifest(a.train, phones), phones);
  const PreparedSet dev = Prepare(load_manifest(a.dev, phones), phones);
  Trainer trainer(cfg, phones);
  std::ofstream log((fs::path(a.out) / "train_log.jsonl").string());
  TrainOptions opts;
  opts.checkpoint_dir = a.out;
  opts.log = &log;
  opts.warnings = &err;
  opts.workers = c.workers;
  const TrainResult r = trainer.train(train, dev, opts);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "best epoch %zu: dev F %.4f, dev PER %.4f\n", r.best_epoch, r.best_f, r.best_per);
  out << buf;
  return kOk;
}

struct DecodeArgs {
  std::string checkpoint, manifest, out;
  std::size_t beam = 10;
  std::size_t batch = 8;
};

int RunDecode(const DecodeArgs &a, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  LoadedModel lm = LoadModel(a.checkpoint, phones);
  const PreparedSet set = Prepare(load_manifest(a.manifest, phones), phones);
  const EvalResult r = evaluate(*lm.model, lm.config.sentence_unit, phones, set, a.beam, a.batch, c.workers,
                                 lm.config.prune_floor);
  WriteText(a.out, HypothesesText(r.hypotheses));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "decoded %zu utterances, PER %.4f\n", set.size(), r.score.recognition.rate());
  out << buf;
  return kOk;
}

struct ScoreArgs {
  std::string ref, hyp, json, report;
};

int RunScore(const ScoreArgs &a, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  const Manifest ref = load_manifest(a.ref, phones);
  const auto hyps = ReadHypotheses(a.hyp, phones);
  eval::CorpusScore score;
  for (const auto &u : ref.utterances) {
    const auto it = hyps.find(u.id);
    if (it == hyps.end()) throw DataError(a.hyp + ": no hypothesis for '" + u.id + "'");
    score.add(u.canonical, u.annotated, it->second);
  }
  const std::string report = eval::format_report(score, phones);
  out << report;
  if (!a.report.empty()) WriteText(a.report, report);
  if (!a.json.empty()) WriteText(a.json, eval::report_json(score, phones).dump(2) + "\n");
  return kOk;
}

struct InspectArgs {
  std::string checkpoint, manifest, id, out_prefix;
  std::size_t cell = 8;
};

int RunInspect(const InspectArgs &a, const Common &c, std::ostream &out) {
  const PhoneSet phones = PhoneSet::Load(c.phoneset);
  LoadedModel lm = LoadModel(a.checkpoint, phones);
  const Manifest m = load_manifest(a.manifest, phones);
  const auto it = std::find_if(m.utterances.begin(), m.utterances.end(), [&](const Utterance &u) { return u.id == a.id; });
  if (it == m.utterances.end()) throw DataError(a.manifest + ": no utterance '" + a.id + "'");
  const FeatureMatrix f = load_features(m, *it);
  const SentenceVocab vocab(lm.config.sentence_unit, phones);
  const FeatureMatrix *fp = &f;
  const std::vector<std::vector<int>> sent{vocab.encode(it->canonical)};
  const auto result = lm.model->forward_batch(std::span(&fp, 1), sent, nd::Mode::kEval);
  const nd::Tensor &w = result.weights.front();

  std::ostringstream grid;
  std::vector<std::string> labels;
  if (lm.config.sentence_unit == SentenceUnit::kPhoneme) {
    labels = it->canonical;
  } else {
    for (char ch : JoinWords(it->canonical)) labels.push_back(ch == ' ' ? "_" : std::string(1, ch));
  }
  grid << "frame";
  for (const auto &l : labels) grid << '\t' << l;
  grid << '\n';
  char buf[32];
  for (std::size_t t = 0; t < w.rows(); ++t) {
    grid << t;
    for (std::size_t n = 0; n < w.cols(); ++n) {
      std::snprintf(buf, sizeof(buf), "\t%.4f", w.at(t, n));
      grid << buf;
    }
    grid << '\n';
  }
  WriteText(a.out_prefix + ".txt", grid.str());

  // Plain PGM: columns are prompt positions, rows are query frames, white = 1.
  std::ostringstream pgm;
  const std::size_t cell = std::max<std::size_t>(a.cell, 1);
  pgm << "P2\n" << w.cols() * cell << ' ' << w.rows() * cell << "\n255\n";
  for (std::size_t y = 0; y < w.rows() * cell; ++y) {
    for (std::size_t x = 0; x < w.cols() * cell; ++x)
      pgm << (x ? " " : "") << static_cast<int>(std::lround(255.0 * w.at(y / cell, x / cell)));
    pgm << '\n';
  }
  WriteText(a.out_prefix + ".pgm", pgm.str());
  out << "wrote " << a.out_prefix << ".txt and " << a.out_prefix << ".pgm (" << w.rows() << " x " << w.cols()
      << ")\n";
  return kOk;
}

}  // namespace

std::string DefaultPhoneSetPath() { return std::string(MDD_DATA_DIR) + "/phoneset39.txt"; }

int run(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Text-dependent mispronunciation detection and diagnosis toolkit", "mdd"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--phoneset", common.phoneset, "Phone-set definition file");
    sub->add_option("--workers", common.workers, "Parallel decode workers")->check(CLI::PositiveNumber);
  };

  SynthArgs synth;
  auto *s_synth = app.add_subcommand("synth-corpus", "Generate a synthetic corpus (audio + manifests)");
  s_synth->add_option("--out", synth.out, "Output directory")->required();
  s_synth->add_option("--seed", synth.seed, "Random seed");
  s_synth->add_option("--utterances", synth.cfg.utterances, "Number of utterances");
  s_synth->add_option("--native-share", synth.cfg.native_share, "Share of native training speakers");
  s_synth->add_option("--l2-train-share", synth.cfg.l2_train_share, "Share of L2 training speakers");
  s_synth->add_option("--dev-share", synth.cfg.dev_share, "Share of L2 dev speakers (the rest is test)");
  s_synth->add_option("--error-rate", synth.cfg.error_rate, "Mispronunciation rate of L2 speakers");
  s_synth->add_option("--min-phones", synth.cfg.min_phones, "Shortest prompt");
  s_synth->add_option("--max-phones", synth.cfg.max_phones, "Longest prompt");
  s_synth->add_option("--phone-ms", synth.cfg.phone_ms, "Mean phone duration (ms)");
  s_synth->add_option("--noise", synth.cfg.noise, "Gaussian noise level");
  s_synth->add_option("--pair-contrast", synth.cfg.pair_contrast, "Mel-band gap inside confusable pairs (1-4)");
  s_synth->add_option("--accent-blend", synth.cfg.accent_blend, "Share of the intended tone left in L2 substitutions");
  s_synth->add_option("--sample-rate", synth.cfg.sample_rate, "8000 or 16000");
  add_common(s_synth);

  std::string extract_manifest;
  auto *s_extract = app.add_subcommand("extract-features", "Write fbank caches next to the audio");
  s_extract->add_option("--manifest", extract_manifest, "Manifest to process")->required();
  add_common(s_extract);

  AugmentArgs aug;
  auto *s_aug = app.add_subcommand("augment", "Write a manifest with augmented prompts");
  s_aug->add_option("--manifest", aug.manifest, "Input manifest")->required();
  s_aug->add_option("--out", aug.out, "Output manifest")->required();
  s_aug->add_option("--method", aug.method, "ps, vc or cp")->check(CLI::IsMember({"none", "ps", "vc", "cp"}));
  s_aug->add_option("--rate", aug.rate, "Fraction of positions modified")->check(CLI::Range(0.0, 1.0));
  s_aug->add_option("--seed", aug.seed, "Random seed");
  s_aug->add_flag("--exact-count", aug.exact_count, "Modify exactly ceil(rate * N) positions");
  s_aug->add_option("--confusion", aug.confusion, "Confusion pairs file (cp)");
  add_common(s_aug);

  TrainArgs train;
  auto *s_train = app.add_subcommand("train", "Train a model; writes best.ckpt, last.ckpt and train_log.jsonl");
  s_train->add_option("--config", train.config, "Run config (INI); built-in defaults when omitted");
  s_train->add_option("--set", train.overrides, "Override a config key: section.key=value (repeatable)");
  s_train->add_option("--train", train.train, "Training manifest");
  s_train->add_option("--dev", train.dev, "Dev manifest (model selection)");
  s_train->add_option("--out", train.out, "Output directory");
  s_train->add_flag("--list-keys", train.list_keys, "Print every config key with its default and exit");
  add_common(s_train);

  DecodeArgs dec;
  auto *s_dec = app.add_subcommand("decode", "Decode a manifest with a checkpoint");
  s_dec->add_option("--checkpoint", dec.checkpoint, "Model checkpoint")->required();
  s_dec->add_option("--manifest", dec.manifest, "Manifest to decode")->required();
  s_dec->add_option("--out", dec.out, "Hypotheses file (id<TAB>phones)")->required();
  s_dec->add_option("--beam", dec.beam, "Beam width")->check(CLI::PositiveNumber);
  s_dec->add_option("--batch", dec.batch, "Utterances per forward pass")->check(CLI::PositiveNumber);
  add_common(s_dec);

  ScoreArgs score;
  auto *s_score = app.add_subcommand("score", "Score hypotheses against a manifest");
  s_score->add_option("--ref", score.ref, "Reference manifest")->required();
  s_score->add_option("--hyp", score.hyp, "Hypotheses file")->required();
  s_score->add_option("--json", score.json, "Also write the report as JSON");
  s_score->add_option("--report", score.report, "Also write the text report");
  add_common(s_score);

  InspectArgs ins;
  auto *s_ins = app.add_subcommand("inspect-attention", "Dump attention weights of one utterance");
  s_ins->add_option("--checkpoint", ins.checkpoint, "Model checkpoint")->required();
  s_ins->add_option("--manifest", ins.manifest, "Manifest holding the utterance")->required();
  s_ins->add_option("--id", ins.id, "Utterance id")->required();
  s_ins->add_option("--out-prefix", ins.out_prefix, "Writes <prefix>.txt and <prefix>.pgm")->required();
  s_ins->add_option("--cell", ins.cell, "Pixels per weight in the image")->check(CLI::PositiveNumber);
  add_common(s_ins);

  std::vector<std::string> reversed(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s_synth) return RunSynth(synth, common, out);
    if (*s_extract) return RunExtract(extract_manifest, common, out);
    if (*s_aug) return RunAugment(aug, common, out);
    if (*s_train) return RunTrain(train, common, out, err);
    if (*s_dec) return RunDecode(dec, common, out);
    if (*s_score) return RunScore(score, common, out);
    if (*s_ins) return RunInspect(ins, common, out);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError &e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace mdd::cli
