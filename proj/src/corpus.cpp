// src/corpus.cpp

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

#include "mdd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mdd/error.hpp"
#include "mdd/rng.hpp"

namespace mdd {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char *kManifestFormat = "mdd-manifest";
constexpr int kManifestVersion = 1;

std::vector<std::string> SplitWords(const std::string &s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string JoinWords(std::span<const std::string> words) {
  std::string out;
  for (const auto &w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string LineError(const std::string &path, std::size_t line, const std::string &what) {
  return path + ":" + std::to_string(line) + ": " + what;
}

std::vector<std::string> ParsePhones(const ordered_json &rec, const char *field, const PhoneSet &phones,
                                     const std::string &path, std::size_t line) {
  if (!rec.contains(field) || !rec[field].is_string())
    throw DataError(LineError(path, line, std::string("missing string field '") + field + "'"));
  auto seq = SplitWords(rec[field].get<std::string>());
  if (seq.empty()) throw DataError(LineError(path, line, std::string("empty ") + field + " sequence"));
  for (const auto &p : seq)
    if (!phones.contains(p)) throw DataError(LineError(path, line, "unknown phoneme '" + p + "' in " + field));
  return seq;
}

// Phones usable in synthetic sentences (silence is left to the edges).
std::vector<std::string> SpokenPhones(const PhoneSet &phones) {
  std::vector<std::string> out;
  for (const auto &p : phones.symbols())
    if (p != "sil") out.push_back(p);
  return out;
}

std::vector<std::string> ClassPool(const PhoneSet &phones, PhoneClass c) {
  std::vector<std::string> out;
  for (const auto &p : c == PhoneClass::kVowel ? phones.vowels() : phones.consonants())
    if (p != "sil") out.push_back(p);
  return out;
}

double MelToHz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

// Center frequency of mel band `b` for the default filterbank at `rate`.
double BandCenter(int b, int rate) {
  const FbankConfig fb;
  const double lo = 1127.0 * std::log(1.0 + fb.low_hz / 700.0);
  const double hi = 1127.0 * std::log(1.0 + (rate / 2.0) / 700.0);
  const double step = (hi - lo) / (fb.num_bins + 1);
  return MelToHz(lo + (b + 1) * step);
}

// Group and member of a phone within its confusable pairing.
std::pair<int, int> PhoneSlot(const PhoneSet &phones, const std::string &phone) {
  const auto vowels = ClassPool(phones, PhoneClass::kVowel);
  const auto consonants = ClassPool(phones, PhoneClass::kConsonant);
  auto it = std::find(vowels.begin(), vowels.end(), phone);
  if (it != vowels.end()) {
    const auto i = static_cast<int>(it - vowels.begin());
    return {i / 2, i % 2};
  }
  it = std::find(consonants.begin(), consonants.end(), phone);
  if (it == consonants.end()) throw DataError("synthetic corpus: no signature for '" + phone + "'");
  const auto i = static_cast<int>(it - consonants.begin());
  return {static_cast<int>((vowels.size() + 1) / 2) + i / 2, i % 2};
}

}  // namespace

std::string Manifest::resolve(const std::string &relative) const {
  const fs::path p(relative);
  if (p.is_absolute() || dir.empty()) return p.string();
  return (fs::path(dir) / p).string();
}

Manifest load_manifest(const std::string &path, const PhoneSet &phones) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  Manifest m;
  m.dir = fs::path(path).parent_path().string();
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
      throw DataError(LineError(path, line, std::string("malformed record: ") + e.what()));
    }
    if (!rec.is_object()) throw DataError(LineError(path, line, "record is not an object"));
    if (rec.contains("format")) {
      if (rec["format"] != kManifestFormat || !m.utterances.empty() || !m.norm.empty())
        throw DataError(LineError(path, line, "unexpected header record"));
      if (rec.value("version", 0) != kManifestVersion)
        throw DataError(LineError(path, line, "unsupported manifest version"));
      if (rec.contains("norm")) {
        m.norm.mean = rec["norm"].at("mean").get<std::vector<double>>();
        m.norm.stddev = rec["norm"].at("std").get<std::vector<double>>();
        if (m.norm.mean.size() != m.norm.stddev.size())
          throw DataError(LineError(path, line, "norm mean/std sizes differ"));
        for (double s : m.norm.stddev)
          if (!(s > 0)) throw DataError(LineError(path, line, "norm std must be positive"));
      }
      continue;
    }
    Utterance u;
    if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty())
      throw DataError(LineError(path, line, "missing id"));
    u.id = rec["id"].get<std::string>();
    if (!ids.insert(u.id).second) throw DataError(LineError(path, line, "duplicate id '" + u.id + "'"));
    if (!rec.contains("audio") || !rec["audio"].is_string())
      throw DataError(LineError(path, line, "missing audio path"));
    u.audio = rec["audio"].get<std::string>();
    u.canonical = ParsePhones(rec, "canonical", phones, path, line);
    u.annotated = ParsePhones(rec, "annotated", phones, path, line);
    const std::string audio = m.resolve(u.audio);
    if (!fs::exists(audio) && !fs::exists(audio + ".mddf"))
      throw DataError(LineError(path, line, "missing audio " + audio));
    m.utterances.push_back(std::move(u));
  }
  return m;
}

void write_manifest(const std::string &path, const Manifest &m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  ordered_json header;
  header["format"] = kManifestFormat;
  header["version"] = kManifestVersion;
  if (!m.norm.empty()) header["norm"] = {{"mean", m.norm.mean}, {"std", m.norm.stddev}};
  out << header.dump() << '\n';
  for (const auto &u : m.utterances) {
    ordered_json rec;
    rec["id"] = u.id;
    rec["audio"] = u.audio;
    rec["canonical"] = JoinWords(u.canonical);
    rec["annotated"] = JoinWords(u.annotated);
    out << rec.dump() << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path);
}

std::string feature_cache_path(const Manifest &m, const Utterance &u) {
  return m.resolve(u.audio) + ".mddf";
}

FeatureMatrix load_raw_features(const Manifest &m, const Utterance &u, const FbankConfig &cfg) {
  const std::string cache = feature_cache_path(m, u);
  FeatureMatrix f = fs::exists(cache) ? ReadFeatureCache(cache) : compute_fbank(ReadWav(m.resolve(u.audio)), cfg);
  RoundToFloat(f);
  f.frame_shift = static_cast<double>(static_cast<float>(f.frame_shift));
  return f;
}

FeatureMatrix load_features(const Manifest &m, const Utterance &u, const FbankConfig &cfg) {
  FeatureMatrix f = load_raw_features(m, u, cfg);
  m.norm.apply(f);
  return stack_frames(f);
}

// --- synthetic corpus --------------------------------------------------------

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw UsageError("synthetic corpus: " + what);
  };
  require(utterances >= 4, "need at least 4 utterances");
  require(native_share >= 0 && l2_train_share >= 0 && dev_share >= 0 &&
              native_share + l2_train_share + dev_share < 1.0,
          "split shares must be non-negative and leave room for a test split");
  require(min_phones >= 1 && max_phones >= min_phones, "bad phone count range");
  require(error_rate >= 0 && error_rate <= 1, "error_rate must lie in [0, 1]");
  require(substitute_share >= 0 && delete_share >= 0 && insert_share >= 0 &&
              substitute_share + delete_share + insert_share > 0,
          "error shares must be non-negative with a positive sum");
  require(phone_ms > 0 && jitter_ms >= 0 && jitter_ms < phone_ms, "bad phone duration");
  require(edge_ms >= 0 && noise >= 0, "bad edge or noise level");
  require(pair_contrast >= 1 && pair_contrast <= 4, "pair_contrast must lie in [1, 4]");
  require(accent_blend >= 0 && accent_blend < 1, "accent_blend must lie in [0, 1)");
  require(sample_rate == 8000 || sample_rate == 16000, "sample rate must be 8000 or 16000");
}

std::string ConfusablePartner(const PhoneSet &phones, const std::string &phone) {
  const auto pool = ClassPool(phones, phones.class_of(phone));
  const auto it = std::find(pool.begin(), pool.end(), phone);
  if (it == pool.end()) throw DataError("no confusable partner for '" + phone + "'");
  const auto i = static_cast<std::size_t>(it - pool.begin());
  const std::size_t j = (i ^ 1) < pool.size() ? (i ^ 1) : i - 1;
  return pool[j];
}

std::vector<SynthTranscript> synthesize_transcripts(const SynthConfig &cfg, const PhoneSet &phones,
                                                    std::uint64_t seed) {
  cfg.validate();
  const auto spoken = SpokenPhones(phones);
  const auto n = static_cast<double>(cfg.utterances);
  const auto native = static_cast<std::size_t>(std::lround(n * cfg.native_share));
  const auto l2_train = static_cast<std::size_t>(std::lround(n * cfg.l2_train_share));
  const auto dev = static_cast<std::size_t>(std::lround(n * cfg.dev_share));
  if (native + l2_train + dev >= cfg.utterances) throw UsageError("synthetic corpus: empty test split");

  const double share_total = cfg.substitute_share + cfg.delete_share + cfg.insert_share;
  std::vector<SynthTranscript> out;
  for (std::size_t i = 0; i < cfg.utterances; ++i) {
    Rng rng(Rng::Derive(seed, "transcript", i));
    SynthTranscript t;
    if (i < native) {
      t.split = "train";
      t.kind = SpeakerKind::kNative;
    } else if (i < native + l2_train) {
      t.split = "train";
      t.kind = SpeakerKind::kL2;
    } else if (i < native + l2_train + dev) {
      t.split = "dev";
      t.kind = SpeakerKind::kL2;
    } else {
      t.split = "test";
      t.kind = SpeakerKind::kL2;
    }
    char id[32];
    std::snprintf(id, sizeof(id), "%s%s%04zu", t.kind == SpeakerKind::kNative ? "nat" : "l2",
                  t.split.c_str(), i);
    t.id = id;

    const std::size_t len = cfg.min_phones + rng.below(cfg.max_phones - cfg.min_phones + 1);
    for (std::size_t k = 0; k < len; ++k) {
      std::string p;
      do {
        p = spoken[rng.below(spoken.size())];
      } while (!t.canonical.empty() && p == t.canonical.back());
      t.canonical.push_back(p);
    }

    if (t.kind == SpeakerKind::kNative) {
      t.annotated = t.canonical;
      t.intended.assign(t.annotated.size(), "");
    } else {
      for (const auto &p : t.canonical) {
        if (!rng.bernoulli(cfg.error_rate)) {
          t.annotated.push_back(p);
          t.intended.emplace_back();
          continue;
        }
        ++t.injected_errors;
        const double u = rng.uniform() * share_total;
        if (u < cfg.substitute_share) {
          t.annotated.push_back(ConfusablePartner(phones, p));
          t.intended.push_back(p);
        } else if (u < cfg.substitute_share + cfg.delete_share) {
          // the learner skipped it
        } else {
          t.annotated.push_back(p);
          t.annotated.push_back(spoken[rng.below(spoken.size())]);
          t.intended.resize(t.annotated.size());
        }
      }
      if (t.annotated.empty()) {
        t.annotated.push_back(t.canonical.front());
        t.intended.emplace_back();
        --t.injected_errors;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

Waveform render_phones(std::span<const std::string> seq, const SynthConfig &cfg, const PhoneSet &phones,
                       std::uint64_t seed, std::span<const std::string> intended) {
  cfg.validate();
  if (!intended.empty() && intended.size() != seq.size())
    throw UsageError("render_phones: intended phones must align with the sequence");
  auto second_band = [&](const std::string &p) {
    const auto [group, member] = PhoneSlot(phones, p);
    return std::min(79, (4 * group + 37) % 72 + 4 + member * cfg.pair_contrast);
  };
  Rng rng(seed);
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  const double rate = cfg.sample_rate;
  const double gain = rng.uniform(0.5, 1.0);  // speaker loudness
  const auto edge = static_cast<std::size_t>(cfg.edge_ms * rate / 1000.0);
  const auto ramp = static_cast<std::size_t>(0.010 * rate);

  w.samples.assign(edge, 0.0);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const std::string &p = seq[k];
    const int group = PhoneSlot(phones, p).first;
    const int band_a = std::min(79, 2 + 4 * group);
    const double fa = BandCenter(band_a, cfg.sample_rate), fb = BandCenter(second_band(p), cfg.sample_rate);
    const bool accented = !intended.empty() && !intended[k].empty() && cfg.accent_blend > 0;
    const double fc = accented ? BandCenter(second_band(intended[k]), cfg.sample_rate) : 0.0;
    const double blend = accented ? cfg.accent_blend : 0.0;
    const double ms = cfg.phone_ms + rng.uniform(-cfg.jitter_ms, cfg.jitter_ms);
    const auto len = static_cast<std::size_t>(ms * rate / 1000.0);
    const double phase_a = rng.uniform(0, 2 * std::numbers::pi), phase_b = rng.uniform(0, 2 * std::numbers::pi);
    const double phase_c = accented ? rng.uniform(0, 2 * std::numbers::pi) : 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double t = static_cast<double>(n) / rate;
      double env = 1.0;
      if (n < ramp) env = static_cast<double>(n) / ramp;
      if (len - n < ramp) env = std::min(env, static_cast<double>(len - n) / ramp);
      double s = 0.35 * std::sin(2 * std::numbers::pi * fa * t + phase_a) +
                 0.25 * (1 - blend) * std::sin(2 * std::numbers::pi * fb * t + phase_b);
      if (accented) s += 0.25 * blend * std::sin(2 * std::numbers::pi * fc * t + phase_c);
      w.samples.push_back(gain * env * s);
    }
  }
  w.samples.insert(w.samples.end(), edge, 0.0);
  for (double &s : w.samples) s = std::clamp(s + cfg.noise * rng.normal(), -1.0, 32767.0 / 32768.0);
  return w;
}

SynthCorpus generate_synthetic(const SynthConfig &cfg, const PhoneSet &phones, std::uint64_t seed,
                               const std::string &out_dir) {
  const auto transcripts = synthesize_transcripts(cfg, phones, seed);
  fs::create_directories(fs::path(out_dir) / "audio");
  SynthCorpus corpus;
  corpus.train.dir = corpus.dev.dir = corpus.test.dir = out_dir;
  std::vector<FeatureMatrix> train_feats;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const auto &t = transcripts[i];
    const Waveform w = render_phones(t.annotated, cfg, phones, Rng::Derive(seed, "audio", i), t.intended);
    Utterance u{t.id, "audio/" + t.id + ".wav", t.canonical, t.annotated};
    const std::string wav_path = corpus.train.resolve(u.audio);
    WriteWav(wav_path, w);
    if (t.split == "train") {
      // Features of what was written, so they match later extraction exactly.
      FeatureMatrix f = compute_fbank(ReadWav(wav_path));
      RoundToFloat(f);
      train_feats.push_back(std::move(f));
      corpus.train.utterances.push_back(std::move(u));
    } else if (t.split == "dev") {
      corpus.dev.utterances.push_back(std::move(u));
    } else {
      corpus.test.utterances.push_back(std::move(u));
    }
  }
  std::vector<const FeatureMatrix *> ptrs;
  for (const auto &f : train_feats) ptrs.push_back(&f);
  const FeatureNorm norm = ComputeNorm(ptrs);
  corpus.train.norm = corpus.dev.norm = corpus.test.norm = norm;
  write_manifest((fs::path(out_dir) / "train.jsonl").string(), corpus.train);
  write_manifest((fs::path(out_dir) / "dev.jsonl").string(), corpus.dev);
  write_manifest((fs::path(out_dir) / "test.jsonl").string(), corpus.test);
  return corpus;
}

// --- batching ----------------------------------------------------------------

std::size_t Batch::padding_frames() const {
  std::size_t pad = 0;
  for (auto l : feat_lengths) pad += max_frames - l;
  return pad;
}

FeatureMatrix Batch::feature(std::size_t i) const {
  FeatureMatrix f;
  f.frames = feat_lengths.at(i);
  f.dim = dim;
  const auto begin = features.begin() + static_cast<long>(i * max_frames * dim);
  f.values.assign(begin, begin + static_cast<long>(f.frames * dim));
  return f;
}

std::vector<int> Batch::sentence(std::size_t i) const {
  const auto begin = sentences.begin() + static_cast<long>(i * max_tokens);
  return {begin, begin + static_cast<long>(sent_lengths.at(i))};
}

std::vector<std::vector<std::size_t>> plan_batches(std::span<const std::size_t> lengths, std::size_t batch_size,
                                                   bool sort_by_length) {
  if (batch_size == 0) throw UsageError("batch size must be positive");
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  if (sort_by_length)
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(std::min(order.size(), i + batch_size)));
  return out;
}

Batch make_batch(std::span<const std::size_t> items, std::span<const FeatureMatrix> features,
                 std::span<const std::vector<int>> sentences, std::span<const std::vector<int>> targets) {
  Batch b;
  b.items.assign(items.begin(), items.end());
  for (auto i : items) {
    b.max_frames = std::max(b.max_frames, features[i].frames);
    b.max_tokens = std::max(b.max_tokens, sentences[i].size());
    if (b.dim != 0 && features[i].dim != b.dim) throw UsageError("make_batch: mixed feature dims");
    b.dim = features[i].dim;
  }
  b.features.assign(items.size() * b.max_frames * b.dim, 0.0);
  b.sentences.assign(items.size() * b.max_tokens, 0);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto &f = features[items[k]];
    std::copy(f.values.begin(), f.values.end(), b.features.begin() + static_cast<long>(k * b.max_frames * b.dim));
    b.feat_lengths.push_back(f.frames);
    const auto &s = sentences[items[k]];
    std::copy(s.begin(), s.end(), b.sentences.begin() + static_cast<long>(k * b.max_tokens));
    b.sent_lengths.push_back(s.size());
    b.targets.push_back(targets[items[k]]);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const FeatureMatrix> features, std::span<const std::vector<int>> sentences,
                                std::span<const std::vector<int>> targets, std::size_t batch_size,
                                bool sort_by_length) {
  if (features.size() != sentences.size() || features.size() != targets.size())
    throw UsageError("make_batches: features, sentences and targets differ in count");
  std::vector<std::size_t> lengths;
  for (const auto &f : features) lengths.push_back(f.frames);
  std::vector<Batch> out;
  for (const auto &items : plan_batches(lengths, batch_size, sort_by_length))
    out.push_back(make_batch(items, features, sentences, targets));
  return out;
}

// --- sentence units ----------------------------------------------------------

namespace {
constexpr std::string_view kAlphabet = " abcdefghijklmnopqrstuvwxyz";
}

SentenceUnit ParseSentenceUnit(const std::string &name) {
  if (name == "phoneme") return SentenceUnit::kPhoneme;
  if (name == "character") return SentenceUnit::kCharacter;
  throw UsageError("unknown sentence unit '" + name + "' (expected phoneme or character)");
}

std::string SentenceUnitName(SentenceUnit u) { return u == SentenceUnit::kPhoneme ? "phoneme" : "character"; }

std::size_t SentenceVocab::size() const {
  return unit_ == SentenceUnit::kPhoneme ? static_cast<std::size_t>(phones_->vocab_size()) : kAlphabet.size() + 1;
}

std::vector<int> SentenceVocab::encode(std::span<const std::string> canonical) const {
  if (unit_ == SentenceUnit::kPhoneme) return phones_->encode(canonical);
  std::vector<int> out;
  for (const char c : JoinWords(canonical)) {
    const auto pos = kAlphabet.find(c);
    if (pos == std::string_view::npos) throw DataError(std::string("character '") + c + "' outside the alphabet");
    out.push_back(static_cast<int>(pos) + 1);
  }
  return out;
}

}  // namespace mdd
