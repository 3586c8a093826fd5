// src/ndiff/layers.cpp

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

#include "mdd/ndiff/layers.hpp"

#include <cmath>
#include <memory>

#include "eigen_util.hpp"
#include "mdd/error.hpp"
#include "mdd/ndiff/ops.hpp"

namespace mdd::nd {

using detail::ConstMatMap;
using detail::Grad;
using detail::GradVec;
using detail::RowMat;
using detail::Value;

// --- LayerParams ---------------------------------------------------------------

Tensor &LayerParams::add(const std::string &name, Tensor t, bool trainable) {
  if (index_.count(name)) throw UsageError("duplicate parameter name " + name);
  t.set_requires_grad(trainable);
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(t));
  trainable_.push_back(trainable);
  return tensors_.back();
}

Tensor &LayerParams::get(const std::string &name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return tensors_[it->second];
}

const Tensor &LayerParams::get(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return tensors_[it->second];
}

bool LayerParams::trainable(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return trainable_[it->second];
}

std::size_t LayerParams::num_trainable() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (trainable_[i]) n += tensors_[i].size();
  return n;
}

void LayerParams::zero_grad() {
  for (auto &t : tensors_) t.zero_grad();
}

void InitUniform(Tensor &t, double k, Rng &rng) {
  for (double &v : t.mutable_data()) v = rng.uniform(-k, k);
}

namespace {

std::vector<std::size_t> Segments(std::span<const std::size_t> offsets, std::size_t rows,
                                  const char *op) {
  if (offsets.empty()) return {0, rows};
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != rows)
    throw UsageError(std::string(op) + ": offsets do not cover the " + std::to_string(rows) + " rows");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    if (offsets[i] <= offsets[i - 1])
      throw UsageError(std::string(op) + ": empty or decreasing segment in offsets");
  return {offsets.begin(), offsets.end()};
}

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmCache {
  RowMat acts;  // (N, 4H) activated gates
  RowMat cell;  // (N, H)
  std::vector<long> prev;
  std::vector<std::size_t> seg;
};

}  // namespace

// --- LSTM ---------------------------------------------------------------------

Tensor lstm_forward(const Tensor &x, const LstmWeights &w, std::span<const std::size_t> offsets,
                    bool reverse) {
  if (x.dim() != 2) throw UsageError("lstm: expected (T, D) input, got " + ShapeString(x.shape()));
  const std::size_t n = x.rows(), d = x.cols(), h = w.hidden();
  if (w.w_ih.shape() != Shape{4 * h, d} || w.w_hh.shape() != Shape{4 * h, h} || w.bias.size() != 4 * h)
    throw UsageError("lstm: weight shapes " + ShapeString(w.w_ih.shape()) + "/" +
                     ShapeString(w.w_hh.shape()) + " do not fit input " + ShapeString(x.shape()));

  auto cache = std::make_shared<LstmCache>();
  cache->seg = Segments(offsets, n, "lstm");
  RowMat pre = Value(x) * Value(w.w_ih).transpose();
  pre.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(w.bias.data().data(), static_cast<Eigen::Index>(4 * h));
  cache->acts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(4 * h));
  cache->cell.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(h));
  cache->prev.assign(n, -1);
  Tensor out = Tensor::Zeros({n, h});
  auto hout = detail::MutableValue(out);
  const auto whh = Value(w.w_hh);

  Eigen::RowVectorXd row(static_cast<Eigen::Index>(4 * h));
  for (std::size_t s = 0; s + 1 < cache->seg.size(); ++s) {
    const long b = static_cast<long>(cache->seg[s]), e = static_cast<long>(cache->seg[s + 1]);
    long p = -1;
    for (long k = 0; k < e - b; ++k) {
      const long t = reverse ? e - 1 - k : b + k;
      row = pre.row(t);
      if (p >= 0) row.noalias() += hout.row(p) * whh.transpose();
      for (std::size_t j = 0; j < h; ++j) {
        const double ig = Sigmoid(row[j]);
        const double fg = Sigmoid(row[h + j]);
        const double gg = std::tanh(row[2 * h + j]);
        const double og = Sigmoid(row[3 * h + j]);
        const double cprev = p >= 0 ? cache->cell(p, j) : 0.0;
        const double c = fg * cprev + ig * gg;
        cache->acts(t, j) = ig;
        cache->acts(t, h + j) = fg;
        cache->acts(t, 2 * h + j) = gg;
        cache->acts(t, 3 * h + j) = og;
        cache->cell(t, j) = c;
        hout(t, j) = og * std::tanh(c);
      }
      cache->prev[t] = p;
      p = t;
    }
  }
  CheckFinite(out, "lstm");

  if (Tape::Recording({&x, &w.w_ih, &w.w_hh, &w.bias})) {
    Tape::active()->record(out, [x, w, out, cache, reverse, n, h]() {
      const auto go = ConstMatMap(out.node()->grad.data(), n, h);
      const auto hv = Value(out);
      const auto whh = Value(w.w_hh);
      const auto &acts = cache->acts;
      const auto &cell = cache->cell;
      RowMat dg = RowMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(4 * h));
      Eigen::RowVectorXd dh_next(static_cast<Eigen::Index>(h)), dc_next(static_cast<Eigen::Index>(h));
      for (std::size_t s = 0; s + 1 < cache->seg.size(); ++s) {
        const long b = static_cast<long>(cache->seg[s]), e = static_cast<long>(cache->seg[s + 1]);
        dh_next.setZero();
        dc_next.setZero();
        for (long k = e - b - 1; k >= 0; --k) {
          const long t = reverse ? e - 1 - k : b + k;
          const long p = cache->prev[t];
          for (std::size_t j = 0; j < h; ++j) {
            const double ig = acts(t, j), fg = acts(t, h + j), gg = acts(t, 2 * h + j), og = acts(t, 3 * h + j);
            const double tc = std::tanh(cell(t, j));
            const double dh = go(t, j) + dh_next[j];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            const double cprev = p >= 0 ? cell(p, j) : 0.0;
            dg(t, j) = dc * gg * ig * (1.0 - ig);
            dg(t, h + j) = dc * cprev * fg * (1.0 - fg);
            dg(t, 2 * h + j) = dc * ig * (1.0 - gg * gg);
            dg(t, 3 * h + j) = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          dh_next.noalias() = dg.row(t) * whh;
        }
      }
      if (w.w_hh.requires_grad()) {
        RowMat hprev = RowMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(h));
        for (std::size_t t = 0; t < n; ++t)
          if (cache->prev[t] >= 0) hprev.row(static_cast<long>(t)) = hv.row(cache->prev[t]);
        Grad(w.w_hh).noalias() += dg.transpose() * hprev;
      }
      if (w.w_ih.requires_grad()) Grad(w.w_ih).noalias() += dg.transpose() * Value(x);
      if (x.requires_grad()) Grad(x).noalias() += dg * Value(w.w_ih);
      if (w.bias.requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd>(GradVec(w.bias).data(), static_cast<Eigen::Index>(4 * h)) +=
            dg.colwise().sum();
      }
    });
  }
  return out;
}

Tensor bilstm_forward(const Tensor &x, const BiLstmWeights &w, std::span<const std::size_t> offsets) {
  if (w.fwd.hidden() != w.bwd.hidden()) throw UsageError("bilstm: direction hidden sizes differ");
  const Tensor parts[] = {lstm_forward(x, w.fwd, offsets, false), lstm_forward(x, w.bwd, offsets, true)};
  return concat_cols(parts);
}

BiLstmWeights MakeBiLstm(LayerParams &params, const std::string &prefix, std::size_t input,
                         std::size_t hidden, Rng &rng) {
  auto make = [&](const std::string &dir) {
    LstmWeights lw;
    Tensor w_ih = Tensor::Zeros({4 * hidden, input});
    Tensor w_hh = Tensor::Zeros({4 * hidden, hidden});
    Tensor bias = Tensor::Zeros({4 * hidden});
    InitUniform(w_ih, 1.0 / std::sqrt(static_cast<double>(input)), rng);
    InitUniform(w_hh, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) bias.mutable_data()[j] = 1.0;
    lw.w_ih = params.add(prefix + "." + dir + ".w_ih", w_ih);
    lw.w_hh = params.add(prefix + "." + dir + ".w_hh", w_hh);
    lw.bias = params.add(prefix + "." + dir + ".bias", bias);
    return lw;
  };
  BiLstmWeights w;
  w.fwd = make("fwd");
  w.bwd = make("bwd");
  return w;
}

// --- convolution --------------------------------------------------------------

Tensor conv_forward(const Tensor &x, const ConvWeights &w, std::span<const std::size_t> offsets,
                    std::vector<std::size_t> *out_offsets) {
  const ConvGeometry g = w.geom;
  if (x.dim() != 2 || x.cols() != g.input_width())
    throw UsageError("conv: input " + ShapeString(x.shape()) + " does not have " +
                     std::to_string(g.input_width()) + " columns");
  if (g.stride_t == 0 || g.kernel_t == 0 || g.kernel_f == 0)
    throw UsageError("conv: kernel and stride must be positive");
  if (w.weight.shape() != Shape{g.out_channels, g.patch()} || w.bias.size() != g.out_channels)
    throw UsageError("conv: weight shape " + ShapeString(w.weight.shape()) + " does not match geometry");

  const auto seg = Segments(offsets, x.rows(), "conv");
  std::vector<std::size_t> oseg{0};
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) oseg.push_back(oseg.back() + g.output_length(seg[s + 1] - seg[s]));
  const std::size_t n_out = oseg.back();
  const std::size_t f_bins = g.freq, patch = g.patch();
  const long half_t = static_cast<long>(g.kernel_t / 2), half_f = static_cast<long>(g.kernel_f / 2);

  // Patch matrix: one row per (output frame, bin).
  auto cols = std::make_shared<RowMat>(RowMat::Zero(static_cast<Eigen::Index>(n_out * f_bins),
                                                    static_cast<Eigen::Index>(patch)));
  // Source element of every patch entry (-1 when it falls into padding), reused by backward.
  auto src = std::make_shared<std::vector<long>>(n_out * f_bins * patch, -1);
  const auto xv = x.data();
  const std::size_t xw = g.input_width();
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const long len = static_cast<long>(seg[s + 1] - seg[s]);
    for (std::size_t to = 0; to < oseg[s + 1] - oseg[s]; ++to) {
      const long center = static_cast<long>(to * g.stride_t);
      for (std::size_t f = 0; f < f_bins; ++f) {
        const std::size_t r = (oseg[s] + to) * f_bins + f;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t dt = 0; dt < g.kernel_t; ++dt) {
            const long ti = center + static_cast<long>(dt) - half_t;
            if (ti < 0 || ti >= len) continue;
            for (std::size_t df = 0; df < g.kernel_f; ++df) {
              const long fi = static_cast<long>(f) + static_cast<long>(df) - half_f;
              if (fi < 0 || fi >= static_cast<long>(f_bins)) continue;
              const std::size_t c = (ci * g.kernel_t + dt) * g.kernel_f + df;
              const long idx = static_cast<long>((seg[s] + static_cast<std::size_t>(ti)) * xw + ci * f_bins) + fi;
              (*cols)(static_cast<long>(r), static_cast<long>(c)) = xv[static_cast<std::size_t>(idx)];
              (*src)[r * patch + c] = idx;
            }
          }
        }
      }
    }
  }
  RowMat y = (*cols) * Value(w.weight).transpose();  // (n_out*F, C_out)
  Tensor out = Tensor::Zeros({n_out, g.output_width()});
  auto ov = out.mutable_data();
  const auto bv = w.bias.data();
  for (std::size_t t = 0; t < n_out; ++t)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t f = 0; f < f_bins; ++f)
        ov[t * g.output_width() + co * f_bins + f] = y(static_cast<long>(t * f_bins + f), static_cast<long>(co)) + bv[co];
  CheckFinite(out, "conv");
  if (out_offsets) *out_offsets = oseg;

  if (Tape::Recording({&x, &w.weight, &w.bias})) {
    Tape::active()->record(out, [x, w, out, cols, src, n_out, g]() {
      const std::size_t f_bins = g.freq, patch = g.patch();
      const auto &go = out.node()->grad;
      RowMat dy(static_cast<long>(n_out * f_bins), static_cast<long>(g.out_channels));
      for (std::size_t t = 0; t < n_out; ++t)
        for (std::size_t co = 0; co < g.out_channels; ++co)
          for (std::size_t f = 0; f < f_bins; ++f)
            dy(static_cast<long>(t * f_bins + f), static_cast<long>(co)) = go[t * g.output_width() + co * f_bins + f];
      if (w.weight.requires_grad()) Grad(w.weight).noalias() += dy.transpose() * (*cols);
      if (w.bias.requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd>(GradVec(w.bias).data(), static_cast<long>(g.out_channels)) +=
            dy.colwise().sum();
      }
      if (x.requires_grad()) {
        const RowMat dcols = dy * Value(w.weight);
        auto &gx = GradVec(x);
        for (std::size_t r = 0; r < n_out * f_bins; ++r)
          for (std::size_t c = 0; c < patch; ++c) {
            const long idx = (*src)[r * patch + c];
            if (idx >= 0) gx[static_cast<std::size_t>(idx)] += dcols(static_cast<long>(r), static_cast<long>(c));
          }
      }
    });
  }
  return out;
}

ConvWeights MakeConv(LayerParams &params, const std::string &prefix, const ConvGeometry &geom, Rng &rng) {
  ConvWeights w;
  w.geom = geom;
  Tensor weight = Tensor::Zeros({geom.out_channels, geom.patch()});
  InitUniform(weight, 1.0 / std::sqrt(static_cast<double>(geom.patch())), rng);
  w.weight = params.add(prefix + ".weight", weight);
  w.bias = params.add(prefix + ".bias", Tensor::Zeros({geom.out_channels}));
  return w;
}

// --- batch norm ---------------------------------------------------------------

BatchNorm MakeBatchNorm(LayerParams &params, const std::string &prefix, std::size_t dim) {
  BatchNorm bn;
  bn.gamma = params.add(prefix + ".gamma", Tensor::Filled({dim}, 1.0));
  bn.beta = params.add(prefix + ".beta", Tensor::Zeros({dim}));
  bn.running_mean = params.add(prefix + ".running_mean", Tensor::Zeros({dim}), false);
  bn.running_var = params.add(prefix + ".running_var", Tensor::Filled({dim}, 1.0), false);
  return bn;
}

Tensor batchnorm_forward(const Tensor &x, BatchNorm &bn, Mode mode) {
  if (x.dim() != 2 || x.cols() != bn.gamma.size())
    throw UsageError("batchnorm: input " + ShapeString(x.shape()) + " does not match " +
                     std::to_string(bn.gamma.size()) + " features");
  const std::size_t n = x.rows(), d = x.cols();
  const auto xv = x.data();
  const auto gamma = bn.gamma.data(), beta = bn.beta.data();
  auto inv_std = std::make_shared<std::vector<double>>(d);
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  if (mode == Mode::kTrain) {
    auto rm = bn.running_mean.mutable_data(), rv = bn.running_var.mutable_data();
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0;
      for (std::size_t i = 0; i < n; ++i) mu += xv[i * d + j];
      mu /= static_cast<double>(n);
      double var = 0;
      for (std::size_t i = 0; i < n; ++i) var += (xv[i * d + j] - mu) * (xv[i * d + j] - mu);
      const double unbiased = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
      var /= static_cast<double>(n);
      (*inv_std)[j] = 1.0 / std::sqrt(var + bn.eps);
      for (std::size_t i = 0; i < n; ++i) (*xhat)[i * d + j] = (xv[i * d + j] - mu) * (*inv_std)[j];
      rm[j] = (1.0 - bn.momentum) * rm[j] + bn.momentum * mu;
      rv[j] = (1.0 - bn.momentum) * rv[j] + bn.momentum * (n > 1 ? unbiased : var);
    }
  } else {
    const auto rm = bn.running_mean.data(), rv = bn.running_var.data();
    for (std::size_t j = 0; j < d; ++j) {
      (*inv_std)[j] = 1.0 / std::sqrt(rv[j] + bn.eps);
      for (std::size_t i = 0; i < n; ++i) (*xhat)[i * d + j] = (xv[i * d + j] - rm[j]) * (*inv_std)[j];
    }
  }
  std::vector<double> y(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] = gamma[j] * (*xhat)[i * d + j] + beta[j];
  Tensor out = Tensor::FromData({n, d}, std::move(y));
  CheckFinite(out, "batchnorm");

  if (Tape::Recording({&x, &bn.gamma, &bn.beta})) {
    const bool train = mode == Mode::kTrain;
    Tape::active()->record(out, [x, gamma_t = bn.gamma, beta_t = bn.beta, out, inv_std, xhat, n, d, train]() {
      const auto &go = out.node()->grad;
      const auto gamma = gamma_t.data();
      std::vector<double> sum_dy(d, 0.0), sum_dy_xhat(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          sum_dy[j] += go[i * d + j];
          sum_dy_xhat[j] += go[i * d + j] * (*xhat)[i * d + j];
        }
      if (gamma_t.requires_grad()) {
        auto &gg = GradVec(gamma_t);
        for (std::size_t j = 0; j < d; ++j) gg[j] += sum_dy_xhat[j];
      }
      if (beta_t.requires_grad()) {
        auto &gb = GradVec(beta_t);
        for (std::size_t j = 0; j < d; ++j) gb[j] += sum_dy[j];
      }
      if (!x.requires_grad()) return;
      auto &gx = GradVec(x);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double k = gamma[j] * (*inv_std)[j];
          if (train) {
            gx[i * d + j] += k * (go[i * d + j] - inv_n * sum_dy[j] - (*xhat)[i * d + j] * inv_n * sum_dy_xhat[j]);
          } else {
            gx[i * d + j] += k * go[i * d + j];
          }
        }
    });
  }
  return out;
}

// --- dropout / embedding / linear ----------------------------------------------

Tensor dropout_forward(const Tensor &x, double rate, Rng &rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout: rate must lie in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> m(x.size());
  for (double &v : m) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  const Tensor mask = Tensor::FromData(x.shape(), std::move(m));
  return mul(x, mask);
}

Tensor embedding_forward(const Tensor &table, std::span<const int> indices) {
  if (table.dim() != 2) throw UsageError("embedding: table must be 2-D");
  if (indices.empty()) throw UsageError("embedding: empty index sequence");
  const std::size_t v = table.rows(), e = table.cols();
  std::vector<double> out_v(indices.size() * e);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= v)
      throw UsageError("embedding: index " + std::to_string(indices[i]) + " outside vocabulary of " +
                       std::to_string(v));
    std::copy_n(table.data().begin() + static_cast<long>(static_cast<std::size_t>(indices[i]) * e), e,
                out_v.begin() + static_cast<long>(i * e));
  }
  Tensor out = Tensor::FromData({indices.size(), e}, std::move(out_v));
  if (Tape::Recording({&table})) {
    std::vector<int> idx(indices.begin(), indices.end());
    Tape::active()->record(out, [table, out, idx, e]() {
      const auto &go = out.node()->grad;
      auto &gt = GradVec(table);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t k = 0; k < e; ++k) gt[static_cast<std::size_t>(idx[i]) * e + k] += go[i * e + k];
    });
  }
  return out;
}

Tensor linear_forward(const Tensor &x, const Tensor &w, const Tensor &b) {
  return add_bias(matmul_nt(x, w), b);
}

}  // namespace mdd::nd
