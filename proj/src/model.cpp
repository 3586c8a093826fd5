// src/model.cpp

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

#include "mdd/model.hpp"

#include <cmath>

#include "mdd/error.hpp"
#include "mdd/ndiff/ops.hpp"

namespace mdd {

using nd::Mode;
using nd::Tensor;

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw UsageError("model config: " + what);
  };
  require(input_vocab >= 2, "input_vocab must be >= 2");
  require(output_vocab >= 2, "output_vocab must be >= 2");
  require(embed_dim > 0 && hidden > 0, "embed_dim and hidden must be positive");
  require(audio_layers > 0, "audio_layers must be positive");
  require(conv_layers == 0 || conv_channels > 0, "conv_channels must be positive");
  require(feature_planes > 0 && feature_dim % feature_planes == 0, "feature_dim must split into feature_planes");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

Model::Model(const ModelConfig &cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t width = cfg_.width();

  Tensor emb = Tensor::Zeros({cfg_.input_vocab, cfg_.embed_dim});
  for (double &v : emb.mutable_data()) v = rng.normal();
  embedding_ = params_.add("sentence.embedding", emb);
  sentence_lstm_ = nd::MakeBiLstm(params_, "sentence.lstm", cfg_.embed_dim, cfg_.hidden, rng);
  Tensor kw = Tensor::Zeros({width, width});
  nd::InitUniform(kw, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  key_w_ = params_.add("sentence.key.weight", kw);
  key_b_ = params_.add("sentence.key.bias", Tensor::Zeros({width}));

  const std::size_t freq = cfg_.feature_dim / cfg_.feature_planes;
  std::size_t channels = cfg_.feature_planes;
  for (std::size_t i = 0; i < cfg_.conv_layers; ++i) {
    nd::ConvGeometry g;
    g.in_channels = channels;
    g.out_channels = cfg_.conv_channels;
    g.freq = freq;
    g.kernel_t = 3;
    g.kernel_f = 3;
    g.stride_t = 2;
    const std::string name = "audio.conv" + std::to_string(i);
    convs_.push_back(nd::MakeConv(params_, name, g, rng));
    conv_bn_.push_back(nd::MakeBatchNorm(params_, name + ".bn", g.output_width()));
    channels = cfg_.conv_channels;
  }
  std::size_t input = channels * freq;
  for (std::size_t i = 0; i < cfg_.audio_layers; ++i) {
    const std::string name = "audio.lstm" + std::to_string(i);
    audio_lstm_.push_back(nd::MakeBiLstm(params_, name, input, cfg_.hidden, rng));
    audio_bn_.push_back(nd::MakeBatchNorm(params_, name + ".bn", width));
    input = width;
  }

  Tensor ow = Tensor::Zeros({cfg_.output_vocab, 2 * width});
  nd::InitUniform(ow, 1.0 / std::sqrt(static_cast<double>(2 * width)), rng);
  out_w_ = params_.add("output.weight", ow);
  out_b_ = params_.add("output.bias", Tensor::Zeros({cfg_.output_vocab}));
}

std::size_t Model::output_frames(std::size_t t) const {
  for (std::size_t i = 0; i < cfg_.conv_layers; ++i) t = (t + 1) / 2;
  return t;
}

SentenceEncoding Model::sentence_encode(std::span<const int> s, Mode mode, Rng *rng, std::size_t valid) {
  if (s.empty()) throw UsageError("sentence_encode: empty sequence");
  if (valid == 0) valid = s.size();
  if (valid > s.size()) throw UsageError("sentence_encode: valid length exceeds sequence length");
  std::vector<std::size_t> offsets{0, valid};
  if (valid < s.size()) offsets.push_back(s.size());

  Tensor value = nd::bilstm_forward(nd::embedding_forward(embedding_, s), sentence_lstm_, offsets);
  if (mode == Mode::kTrain && cfg_.dropout > 0) {
    if (!rng) throw UsageError("sentence_encode: train mode with dropout needs an rng");
    value = nd::dropout_forward(value, cfg_.dropout, *rng, mode);
  }
  SentenceEncoding enc;
  enc.key = nd::linear_forward(value, key_w_, key_b_);
  enc.value = value;
  enc.mask.assign(s.size(), false);
  for (std::size_t i = 0; i < valid; ++i) enc.mask[i] = true;
  return enc;
}

Tensor Model::encode_audio_packed(const Tensor &x, std::span<const std::size_t> offsets, Mode mode,
                                  std::vector<std::size_t> *out_offsets) {
  if (x.dim() != 2 || x.cols() != cfg_.feature_dim)
    throw UsageError("audio_encode: expected feature dim " + std::to_string(cfg_.feature_dim) + ", got " +
                     nd::ShapeString(x.shape()));
  if (x.rows() == 0) throw UsageError("audio_encode: no frames");
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  if (offs.empty()) offs = {0, x.rows()};

  Tensor h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    std::vector<std::size_t> next;
    h = nd::conv_forward(h, convs_[i], offs, &next);
    h = nd::relu(nd::batchnorm_forward(h, conv_bn_[i], mode));
    offs = std::move(next);
  }
  for (std::size_t i = 0; i < audio_lstm_.size(); ++i)
    h = nd::batchnorm_forward(nd::bilstm_forward(h, audio_lstm_[i], offs), audio_bn_[i], mode);
  if (out_offsets) *out_offsets = std::move(offs);
  return h;
}

AudioEncoding Model::audio_encode(const Tensor &x, Mode mode) {
  AudioEncoding enc;
  enc.query = encode_audio_packed(x, {}, mode, nullptr);
  enc.downsample_factor = cfg_.downsample();
  return enc;
}

Tensor Model::attend_scores(const Tensor &q, const Tensor &k) const {
  if (q.cols() != k.cols())
    throw UsageError("attend: query width " + std::to_string(q.cols()) + " != key width " + std::to_string(k.cols()));
  Tensor scores = nd::matmul_nt(q, k);
  if (cfg_.scaled_attention) scores = nd::scale(scores, 1.0 / std::sqrt(static_cast<double>(q.cols())));
  return scores;
}

Attention Model::attend(const AudioEncoding &q, const SentenceEncoding &k) const {
  if (k.mask.size() != k.key.rows() || k.value.rows() != k.key.rows())
    throw UsageError("attend: key, value and mask lengths differ");
  Attention a;
  a.weights = nd::masked_softmax(attend_scores(q.query, k.key), k.mask);
  a.context = nd::matmul(a.weights, k.value);
  return a;
}

Tensor Model::fuse_output(const Tensor &context, const AudioEncoding &q) const {
  if (context.rows() != q.query.rows() || context.cols() + q.query.cols() != out_w_.cols())
    throw UsageError("fuse_output: context " + nd::ShapeString(context.shape()) + " and query " +
                     nd::ShapeString(q.query.shape()) + " do not match the output layer");
  const Tensor parts[] = {context, q.query};
  return nd::log_softmax(nd::linear_forward(nd::concat_cols(parts), out_w_, out_b_));
}

Tensor Model::forward(const Tensor &x, std::span<const int> s, Mode mode, Rng *rng) {
  const SentenceEncoding k = sentence_encode(s, mode, rng);
  const AudioEncoding q = audio_encode(x, mode);
  return fuse_output(attend(q, k).context, q);
}

Model::BatchOutput Model::forward_batch(std::span<const FeatureMatrix *const> features,
                                        std::span<const std::vector<int>> sentences, Mode mode, Rng *rng) {
  if (features.empty() || features.size() != sentences.size())
    throw UsageError("forward_batch: feature and sentence counts differ or are zero");
  std::vector<std::size_t> feat_offsets{0}, sent_offsets{0};
  std::vector<double> packed;
  std::vector<int> indices;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureMatrix &f = *features[i];
    if (f.dim != cfg_.feature_dim || f.frames == 0)
      throw UsageError("forward_batch: item " + std::to_string(i) + " has bad feature shape");
    if (sentences[i].empty()) throw UsageError("forward_batch: item " + std::to_string(i) + " has empty sentence");
    packed.insert(packed.end(), f.values.begin(), f.values.end());
    feat_offsets.push_back(feat_offsets.back() + f.frames);
    indices.insert(indices.end(), sentences[i].begin(), sentences[i].end());
    sent_offsets.push_back(indices.size());
  }

  Tensor value = nd::bilstm_forward(nd::embedding_forward(embedding_, indices), sentence_lstm_, sent_offsets);
  if (mode == Mode::kTrain && cfg_.dropout > 0) {
    if (!rng) throw UsageError("forward_batch: train mode with dropout needs an rng");
    value = nd::dropout_forward(value, cfg_.dropout, *rng, mode);
  }
  const Tensor key = nd::linear_forward(value, key_w_, key_b_);

  BatchOutput out;
  const Tensor x = Tensor::FromData({feat_offsets.back(), cfg_.feature_dim}, std::move(packed));
  AudioEncoding q;
  q.query = encode_audio_packed(x, feat_offsets, mode, &out.offsets);
  q.downsample_factor = cfg_.downsample();

  std::vector<Tensor> contexts;
  for (std::size_t i = 0; i < features.size(); ++i) {
    AudioEncoding qi;
    qi.query = nd::slice_rows(q.query, out.offsets[i], out.offsets[i + 1]);
    SentenceEncoding ki;
    ki.key = nd::slice_rows(key, sent_offsets[i], sent_offsets[i + 1]);
    ki.value = nd::slice_rows(value, sent_offsets[i], sent_offsets[i + 1]);
    ki.mask.assign(ki.key.rows(), true);
    Attention a = attend(qi, ki);
    contexts.push_back(a.context);
    out.weights.push_back(a.weights);
  }
  out.log_probs = fuse_output(nd::concat_rows(contexts), q);
  return out;
}

Tensor FeaturesToTensor(const FeatureMatrix &f) {
  return Tensor::FromData({f.frames, f.dim}, f.values);
}

}  // namespace mdd
