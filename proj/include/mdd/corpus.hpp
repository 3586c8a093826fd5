// include/mdd/corpus.hpp

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

#ifndef MDD_CORPUS_HPP_
#define MDD_CORPUS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdd/features.hpp"
#include "mdd/phoneset.hpp"

namespace mdd {

struct Utterance {
  std::string id;
  std::string audio;  // relative to the manifest directory unless absolute
  std::vector<std::string> canonical;
  std::vector<std::string> annotated;

  bool operator==(const Utterance &) const = default;
};

/// One JSON object per line. An optional first record
/// {"format": "mdd-manifest", "version": 1, "norm": {"mean": [...], "std": [...]}}
/// carries the corpus feature normalization; every other line is
/// {"id", "audio", "canonical", "annotated"} with space-separated phonemes.
struct Manifest {
  FeatureNorm norm;
  std::vector<Utterance> utterances;
  std::string dir;  // directory relative audio paths resolve against

  std::string resolve(const std::string &relative) const;
};

/// Throws DataError naming the line for parse errors, unknown phonemes, empty
/// sequences, duplicate ids and missing audio (a feature cache next to the
/// audio path is accepted in its place).
Manifest load_manifest(const std::string &path, const PhoneSet &phones);
void write_manifest(const std::string &path, const Manifest &m);

/// "<audio>.mddf"
std::string feature_cache_path(const Manifest &m, const Utterance &u);

/// Raw 81-dim fbank: read from the cache when present, otherwise computed from
/// the audio. Values are rounded to float precision either way so both
/// sources agree.
FeatureMatrix load_raw_features(const Manifest &m, const Utterance &u, const FbankConfig &cfg = {});
/// Normalized with the manifest statistics, then stacked to 243 dims.
FeatureMatrix load_features(const Manifest &m, const Utterance &u, const FbankConfig &cfg = {});

// --- synthetic corpus --------------------------------------------------------

struct SynthConfig {
  std::size_t utterances = 100;
  // Split shares: native speakers (annotated = canonical), L2 training
  // speakers, L2 dev, L2 test.
  double native_share = 0.63;
  double l2_train_share = 0.19;
  double dev_share = 0.09;
  std::size_t min_phones = 8;
  std::size_t max_phones = 14;
  double error_rate = 0.15;
  // Split of injected errors.
  double substitute_share = 0.8;
  double delete_share = 0.1;
  double insert_share = 0.1;
  double phone_ms = 80.0;
  double jitter_ms = 15.0;
  double edge_ms = 60.0;  // quiet lead-in / tail
  double noise = 0.02;
  /// Mel-band offset between the second tones of a confusable pair; smaller
  /// values make L2 substitutions harder to hear.
  int pair_contrast = 3;
  /// Amplitude share of the intended phone's second tone left in an L2
  /// substitution. 0 renders the partner cleanly; values near 0.5 make the
  /// realization ambiguous between the two.
  double accent_blend = 0.0;
  int sample_rate = 16000;

  void validate() const;
};

enum class SpeakerKind { kNative, kL2 };

struct SynthTranscript {
  std::string id;
  std::string split;  // "train", "dev" or "test"
  SpeakerKind kind = SpeakerKind::kNative;
  std::vector<std::string> canonical;
  std::vector<std::string> annotated;
  /// Aligned with `annotated`: the intended phone behind a substitution,
  /// empty elsewhere.
  std::vector<std::string> intended;
  std::size_t injected_errors = 0;
};

/// The phoneme the generator substitutes for `phone` (its confusable partner).
std::string ConfusablePartner(const PhoneSet &phones, const std::string &phone);

/// Transcripts only (no audio). Deterministic in (cfg, seed).
std::vector<SynthTranscript> synthesize_transcripts(const SynthConfig &cfg, const PhoneSet &phones,
                                                    std::uint64_t seed);

/// Audio for an annotated sequence. `intended`, when non-empty, is aligned
/// with `phones_seq`; non-empty entries blend in that phone's second tone by
/// cfg.accent_blend.
Waveform render_phones(std::span<const std::string> phones_seq, const SynthConfig &cfg, const PhoneSet &phones,
                       std::uint64_t seed, std::span<const std::string> intended = {});

struct SynthCorpus {
  Manifest train, dev, test;
};

/// Writes audio/<id>.wav and train.jsonl, dev.jsonl, test.jsonl under
/// `out_dir` (created if needed). The normalization statistics of the
/// training features go into every manifest header.
SynthCorpus generate_synthetic(const SynthConfig &cfg, const PhoneSet &phones, std::uint64_t seed,
                               const std::string &out_dir);

// --- batching ----------------------------------------------------------------

/// Padded batch. Features are B x T_max x D row-major, sentences B x N_max.
struct Batch {
  std::vector<std::size_t> items;  // indices into the source list
  std::size_t max_frames = 0, dim = 0, max_tokens = 0;
  std::vector<double> features;
  std::vector<std::size_t> feat_lengths;
  std::vector<int> sentences;  // padded with 0
  std::vector<std::size_t> sent_lengths;
  std::vector<std::vector<int>> targets;

  std::size_t size() const { return items.size(); }
  std::size_t padding_frames() const;
  /// Unpadded features of item i.
  FeatureMatrix feature(std::size_t i) const;
  std::vector<int> sentence(std::size_t i) const;
};

/// Groups indices into batches of at most batch_size after a stable sort by
/// feature length (when `sort_by_length`); every index appears once.
std::vector<std::vector<std::size_t>> plan_batches(std::span<const std::size_t> lengths, std::size_t batch_size,
                                                   bool sort_by_length = true);

Batch make_batch(std::span<const std::size_t> items, std::span<const FeatureMatrix> features,
                 std::span<const std::vector<int>> sentences, std::span<const std::vector<int>> targets);

std::vector<Batch> make_batches(std::span<const FeatureMatrix> features, std::span<const std::vector<int>> sentences,
                                std::span<const std::vector<int>> targets, std::size_t batch_size,
                                bool sort_by_length = true);

// --- sentence units ----------------------------------------------------------

enum class SentenceUnit { kPhoneme, kCharacter };

SentenceUnit ParseSentenceUnit(const std::string &name);
std::string SentenceUnitName(SentenceUnit u);

/// Maps a canonical phoneme sequence to sentence-encoder indices (0 = padding).
/// Phoneme mode uses the phone-set indices; character mode spells the
/// labels joined with spaces over the alphabet " a-z".
class SentenceVocab {
 public:
  SentenceVocab(SentenceUnit unit, const PhoneSet &phones) : unit_(unit), phones_(&phones) {}
  SentenceUnit unit() const { return unit_; }
  std::size_t size() const;
  std::vector<int> encode(std::span<const std::string> canonical) const;

 private:
  SentenceUnit unit_;
  const PhoneSet *phones_;
};

}  // namespace mdd

#endif  // MDD_CORPUS_HPP_
