// include/mdd/model.hpp

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

// Text-dependent recognizer: a sentence encoder turns the prompt into keys and
// values, an audio encoder turns stacked fbank frames into queries, dot-product
// attention gathers a context per audio frame, and the concatenation of
// context and query is classified framewise for CTC.

#ifndef MDD_MODEL_HPP_
#define MDD_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdd/features.hpp"
#include "mdd/ndiff/layers.hpp"
#include "mdd/ndiff/tensor.hpp"
#include "mdd/rng.hpp"

namespace mdd {

struct ModelConfig {
  std::size_t input_vocab = 40;   // sentence units, index 0 is padding
  std::size_t output_vocab = 40;  // blank + phones
  std::size_t embed_dim = 384;
  std::size_t hidden = 384;  // per direction, sentence and audio alike
  std::size_t conv_channels = 32;
  std::size_t conv_layers = 2;
  std::size_t audio_layers = 4;
  std::size_t feature_dim = kStackedDim;
  std::size_t feature_planes = 3;  // stacked frames read as conv input channels
  double dropout = 0.2;
  bool scaled_attention = false;

  std::size_t width() const { return 2 * hidden; }
  std::size_t downsample() const { return std::size_t{1} << conv_layers; }
  /// Throws UsageError on inconsistent sizes.
  void validate() const;
};

struct SentenceEncoding {
  nd::Tensor key;          // (N, width)
  nd::Tensor value;        // (N, width)
  std::vector<bool> mask;  // true = real position
};

struct AudioEncoding {
  nd::Tensor query;  // (T', width)
  std::size_t downsample_factor = 4;
};

struct Attention {
  nd::Tensor context;  // (T', width)
  nd::Tensor weights;  // (T', N)
};

class Model {
 public:
  Model(const ModelConfig &cfg, std::uint64_t seed);
  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;

  const ModelConfig &config() const { return cfg_; }
  nd::LayerParams &params() { return params_; }
  const nd::LayerParams &params() const { return params_; }

  /// `valid` is the number of real positions at the start of `s` (the rest is
  /// padding); 0 means all. Dropout draws come from `rng` in train mode.
  SentenceEncoding sentence_encode(std::span<const int> s, nd::Mode mode, Rng *rng = nullptr,
                                   std::size_t valid = 0);

  /// `x` is (T, feature_dim).
  AudioEncoding audio_encode(const nd::Tensor &x, nd::Mode mode);

  Attention attend(const AudioEncoding &q, const SentenceEncoding &k) const;

  /// (T', output_vocab) log-probabilities.
  nd::Tensor fuse_output(const nd::Tensor &context, const AudioEncoding &q) const;

  nd::Tensor forward(const nd::Tensor &x, std::span<const int> s, nd::Mode mode, Rng *rng = nullptr);

  struct BatchOutput {
    nd::Tensor log_probs;              // packed (sum T'_i, output_vocab)
    std::vector<std::size_t> offsets;  // B + 1
    std::vector<nd::Tensor> weights;   // per item (T'_i, N_i)
  };
  /// Packed batch forward; the audio stack and the sentence stack each run
  /// once over all items, attention runs per item.
  BatchOutput forward_batch(std::span<const FeatureMatrix *const> features,
                            std::span<const std::vector<int>> sentences, nd::Mode mode, Rng *rng = nullptr);

  /// Number of query frames produced for T input frames.
  std::size_t output_frames(std::size_t t) const;

 private:
  nd::Tensor encode_audio_packed(const nd::Tensor &x, std::span<const std::size_t> offsets, nd::Mode mode,
                                 std::vector<std::size_t> *out_offsets);
  nd::Tensor attend_scores(const nd::Tensor &q, const nd::Tensor &k) const;

  ModelConfig cfg_;
  nd::LayerParams params_;
  nd::Tensor embedding_;
  nd::BiLstmWeights sentence_lstm_;
  nd::Tensor key_w_, key_b_;
  std::vector<nd::ConvWeights> convs_;
  std::vector<nd::BatchNorm> conv_bn_;
  std::vector<nd::BiLstmWeights> audio_lstm_;
  std::vector<nd::BatchNorm> audio_bn_;
  nd::Tensor out_w_, out_b_;
};

/// Matrix view of features as a constant tensor.
nd::Tensor FeaturesToTensor(const FeatureMatrix &f);

}  // namespace mdd

#endif  // MDD_MODEL_HPP_
