// include/mdd/ndiff/layers.hpp

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

// Neural layers built on the tape.
//
// Sequence layers work on "packed" batches: the rows of all sequences are
// stacked into one (total_rows x D) tensor and `offsets` (size B + 1) marks
// where each sequence starts. An empty offsets span means a single sequence
// covering every row. Recurrence and convolution never cross a sequence
// boundary, so padding never has to be materialized.

#ifndef MDD_NDIFF_LAYERS_HPP_
#define MDD_NDIFF_LAYERS_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdd/ndiff/tensor.hpp"
#include "mdd/rng.hpp"

namespace mdd::nd {

enum class Mode { kTrain, kEval };

/// Named tensors of a model, in insertion order.
class LayerParams {
 public:
  /// Registers a tensor under a unique name and returns the (aliasing) handle.
  Tensor &add(const std::string &name, Tensor t, bool trainable = true);
  Tensor &get(const std::string &name);
  const Tensor &get(const std::string &name) const;
  bool contains(const std::string &name) const { return index_.count(name) > 0; }
  bool trainable(const std::string &name) const;

  const std::vector<std::string> &names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  /// Total element count of the trainable tensors.
  std::size_t num_trainable() const;
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::vector<bool> trainable_;
  std::map<std::string, std::size_t> index_;
};

/// Uniform(-k, k) fill.
void InitUniform(Tensor &t, double k, Rng &rng);

// --- recurrent ---------------------------------------------------------------

/// One LSTM direction. Gate blocks are stacked [input, forget, cell, output].
struct LstmWeights {
  Tensor w_ih;  // (4H, D)
  Tensor w_hh;  // (4H, H)
  Tensor bias;  // (4H)
  std::size_t hidden() const { return w_hh.cols(); }
};

/// Zero initial state. `reverse` runs each sequence from its last row.
Tensor lstm_forward(const Tensor &x, const LstmWeights &w, std::span<const std::size_t> offsets,
                    bool reverse);

struct BiLstmWeights {
  LstmWeights fwd, bwd;
  std::size_t hidden() const { return fwd.hidden(); }
};

/// Row t of the (T, 2H) result is [forward state t ; backward state t].
Tensor bilstm_forward(const Tensor &x, const BiLstmWeights &w,
                      std::span<const std::size_t> offsets = {});

/// Registers "<prefix>.{fwd,bwd}.{w_ih,w_hh,bias}" with uniform(+-1/sqrt(fan_in))
/// weights, zero biases and forget-gate bias +1.
BiLstmWeights MakeBiLstm(LayerParams &params, const std::string &prefix, std::size_t input,
                         std::size_t hidden, Rng &rng);

// --- convolution -------------------------------------------------------------

/// 2-D convolution over (time, frequency) where each row of the input holds
/// `in_channels` planes of `freq` bins ([channel][bin]). Same padding on both
/// axes; stride only along time.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t freq = 1;
  std::size_t kernel_t = 1;
  std::size_t kernel_f = 1;
  std::size_t stride_t = 1;

  std::size_t input_width() const { return in_channels * freq; }
  std::size_t output_width() const { return out_channels * freq; }
  std::size_t patch() const { return in_channels * kernel_t * kernel_f; }
  std::size_t output_length(std::size_t t) const { return (t + stride_t - 1) / stride_t; }
};

struct ConvWeights {
  ConvGeometry geom;
  Tensor weight;  // (out_channels, in_channels * kernel_t * kernel_f)
  Tensor bias;    // (out_channels)
};

/// Output has ceil(T / stride_t) rows per sequence; `out_offsets`, when given,
/// receives the packed offsets of the result.
Tensor conv_forward(const Tensor &x, const ConvWeights &w, std::span<const std::size_t> offsets = {},
                    std::vector<std::size_t> *out_offsets = nullptr);

ConvWeights MakeConv(LayerParams &params, const std::string &prefix, const ConvGeometry &geom,
                     Rng &rng);

// --- normalization / regularization -----------------------------------------

struct BatchNorm {
  Tensor gamma, beta;                // trainable, (D)
  Tensor running_mean, running_var;  // state, (D)
  double momentum = 0.1;
  double eps = 1e-5;
};

BatchNorm MakeBatchNorm(LayerParams &params, const std::string &prefix, std::size_t dim);

/// Per-column normalization over all rows. Train mode uses the batch
/// statistics and updates the running ones; eval mode uses the running ones.
Tensor batchnorm_forward(const Tensor &x, BatchNorm &bn, Mode mode);

/// Inverted dropout; the identity in eval mode or when rate == 0.
Tensor dropout_forward(const Tensor &x, double rate, Rng &rng, Mode mode);

/// Rows of `table` (V, E) selected by `indices`. Throws UsageError for
/// indices outside [0, V).
Tensor embedding_forward(const Tensor &table, std::span<const int> indices);

/// x (N, in) W^T (in, out) + b.
Tensor linear_forward(const Tensor &x, const Tensor &w, const Tensor &b);

}  // namespace mdd::nd

#endif  // MDD_NDIFF_LAYERS_HPP_
