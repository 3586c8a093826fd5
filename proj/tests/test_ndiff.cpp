// tests/test_ndiff.cpp

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

#include <cmath>

#include "doctest.h"
#include "mdd/error.hpp"
#include "mdd/ndiff/layers.hpp"
#include "mdd/ndiff/ops.hpp"
#include "test_util.hpp"

using namespace mdd;
using namespace mdd::nd;
using mdd::testing::CheckGradients;
using mdd::testing::RandomTensor;

namespace {

constexpr double kTol = 1e-4;

// Scalar loss that weights every output entry differently.
Tensor Weighted(const Tensor &out, const Tensor &w) { return sum(mul(out, w)); }

Tensor WeightsLike(const Tensor &out, std::uint64_t seed) {
  Rng rng(seed);
  return RandomTensor(out.shape(), rng);
}

// Checks gradients of sum(f(inputs) * R) for a fixed random R.
double Check(const std::function<Tensor()> &f, std::vector<Tensor> inputs) {
  const Tensor r = WeightsLike(f(), 99);
  const auto res = CheckGradients([&] { return Weighted(f(), r); }, std::move(inputs));
  CHECK(res.checked > 0);
  return res.max_rel_error;
}

Tensor AwayFromZero(Tensor t) {
  for (double &v : t.mutable_data())
    if (std::abs(v) < 0.05) v += v < 0 ? -0.1 : 0.1;
  return t;
}

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-gate scalar LSTM (gates ordered input, forget, cell, output).
std::vector<double> ScalarLstm(const Tensor &x, const LstmWeights &w, bool reverse) {
  const std::size_t n = x.rows(), d = x.cols(), h = w.hidden();
  std::vector<double> out(n * h), hp(h, 0.0), cp(h, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    std::vector<double> hn(h), cn(h);
    for (std::size_t j = 0; j < h; ++j) {
      double z[4];
      for (std::size_t g = 0; g < 4; ++g) {
        const std::size_t row = g * h + j;
        double acc = w.bias.data()[row];
        for (std::size_t i = 0; i < d; ++i) acc += w.w_ih.at(row, i) * x.at(t, i);
        for (std::size_t i = 0; i < h; ++i) acc += w.w_hh.at(row, i) * hp[i];
        z[g] = acc;
      }
      cn[j] = Sig(z[1]) * cp[j] + Sig(z[0]) * std::tanh(z[2]);
      hn[j] = Sig(z[3]) * std::tanh(cn[j]);
      out[t * h + j] = hn[j];
    }
    hp = hn;
    cp = cn;
  }
  return out;
}

}  // namespace

TEST_CASE("basic op values") {
  const Tensor a = Tensor::Matrix({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  const Tensor eye = Tensor::Matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Tensor p = matmul(eye, a);
  CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>(a.data().begin(), a.data().end()));
  const Tensor s = softmax(Tensor::Matrix({{0, 0}}));
  CHECK(s.at(0, 0) == doctest::Approx(0.5));
  CHECK(s.at(0, 1) == doctest::Approx(0.5));
  const Tensor m = masked_softmax(Tensor::Matrix({{1, 5, 1}}), {true, false, true});
  CHECK(m.at(0, 1) == 0.0);
  CHECK(m.at(0, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(masked_softmax(Tensor::Matrix({{1, 2}}), {false, false}), UsageError);
  CHECK_THROWS_AS(matmul(a, Tensor::Matrix({{1, 2}})), UsageError);
  const Tensor ls = log_softmax(Tensor::Matrix({{1000, 0}}));
  CHECK(ls.at(0, 0) == doctest::Approx(0.0));
  CHECK(std::isfinite(ls.at(0, 1)));
  CHECK(transpose(a).at(0, 2) == 7.0);
}

TEST_CASE("simple analytic gradients") {
  SUBCASE("sigmoid at zero") {
    Tensor x = Tensor::Zeros({2, 3});
    x.set_requires_grad();
    Tape tape;
    {
      Tape::Scope scope(tape);
      backward(sum(sigmoid(x)), tape);
    }
    for (double g : x.grad()) CHECK(g == doctest::Approx(0.25));
  }
  SUBCASE("sum") {
    Tensor x = Tensor::Filled({2, 3}, 1.7);
    x.set_requires_grad();
    Tape tape;
    {
      Tape::Scope scope(tape);
      backward(sum(x), tape);
    }
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares") {
    Rng rng(1);
    Tensor x = RandomTensor({3, 2}, rng);
    x.set_requires_grad();
    Tape tape;
    {
      Tape::Scope scope(tape);
      backward(sum(mul(x, x)), tape);
    }
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.data()[i]));
  }
}

TEST_CASE("nothing is recorded without an active tape or trainable input") {
  Tensor x = Tensor::Filled({2, 2}, 1.0);
  x.set_requires_grad();
  const Tensor y = tanh(x);
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor c = Tensor::Filled({2, 2}, 1.0);
    (void)tanh(c);
    CHECK(tape.size() == 0);
    (void)tanh(x);
    CHECK(tape.size() == 1);
  }
  CHECK(Tape::active() == nullptr);
  CHECK(y.size() == 4);
}

TEST_CASE("finite differences: elementwise and matrix primitives") {
  Rng rng(7);
  Tensor a = RandomTensor({3, 4}, rng), b = RandomTensor({3, 4}, rng);
  Tensor m = RandomTensor({4, 2}, rng), n = RandomTensor({5, 4}, rng);
  Tensor bias = RandomTensor({4}, rng);
  Tensor pos = RandomTensor({3, 4}, rng, 0.5, 2.0);
  Tensor r = AwayFromZero(RandomTensor({3, 4}, rng));

  CHECK(Check([&] { return matmul(a, m); }, {a, m}) < kTol);
  CHECK(Check([&] { return matmul_nt(a, n); }, {a, n}) < kTol);
  CHECK(Check([&] { return transpose(a); }, {a}) < kTol);
  CHECK(Check([&] { return add(a, b); }, {a, b}) < kTol);
  CHECK(Check([&] { return sub(a, b); }, {a, b}) < kTol);
  CHECK(Check([&] { return mul(a, b); }, {a, b}) < kTol);
  CHECK(Check([&] { return add_bias(a, bias); }, {a, bias}) < kTol);
  CHECK(Check([&] { return scale(a, -1.5); }, {a}) < kTol);
  CHECK(Check([&] { return sigmoid(a); }, {a}) < kTol);
  CHECK(Check([&] { return nd::tanh(a); }, {a}) < kTol);
  CHECK(Check([&] { return relu(r); }, {r}) < kTol);
  CHECK(Check([&] { return nd::exp(a); }, {a}) < kTol);
  CHECK(Check([&] { return nd::log(pos); }, {pos}) < kTol);
  CHECK(Check([&] { return softmax(a); }, {a}) < kTol);
  CHECK(Check([&] { return log_softmax(a); }, {a}) < kTol);
  CHECK(Check([&] { return masked_softmax(a, {true, false, true, true}); }, {a}) < kTol);
  CHECK(Check([&] {
          const Tensor parts[] = {a, b};
          return concat_cols(parts);
        },
        {a, b}) < kTol);
  CHECK(Check([&] {
          const Tensor parts[] = {a, n};
          return concat_rows(parts);
        },
        {a, n}) < kTol);
  CHECK(Check([&] { return slice_rows(n, 1, 4); }, {n}) < kTol);
  CHECK(Check([&] { return mean(mul(a, a)); }, {a}) < kTol);
}

TEST_CASE("finite differences: a composed graph") {
  Rng rng(11);
  Tensor x = RandomTensor({4, 3}, rng), w = RandomTensor({2, 3}, rng), b = RandomTensor({2}, rng);
  const auto loss = [&] {
    const Tensor h = nd::tanh(linear_forward(x, w, b));
    return mean(log_softmax(mul(h, h)));
  };
  CHECK(CheckGradients(loss, {x, w, b}).max_rel_error < kTol);
}

TEST_CASE("LSTM against a scalar per-gate reference") {
  Rng rng(13);
  LayerParams params;
  const BiLstmWeights bw = MakeBiLstm(params, "l", 8, 5, rng);
  const Tensor x = RandomTensor({4, 8}, rng);
  for (bool reverse : {false, true}) {
    const LstmWeights &w = reverse ? bw.bwd : bw.fwd;
    const Tensor y = lstm_forward(x, w, {}, reverse);
    const auto ref = ScalarLstm(x, w, reverse);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }
  const Tensor both = bilstm_forward(x, bw);
  CHECK(both.shape() == Shape{4, 10});
  const auto fwd = ScalarLstm(x, bw.fwd, false), bwd = ScalarLstm(x, bw.bwd, true);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(both.at(t, j) == doctest::Approx(fwd[t * 5 + j]));
      CHECK(both.at(t, 5 + j) == doctest::Approx(bwd[t * 5 + j]));
    }
}

TEST_CASE("LSTM edge cases") {
  LstmWeights w{Tensor::Zeros({12, 2}), Tensor::Zeros({12, 3}), Tensor::Zeros({12})};
  Rng rng(2);
  const Tensor x = RandomTensor({5, 2}, rng);
  const Tensor zero_out = lstm_forward(x, w, {}, false);
  for (double v : zero_out.data()) CHECK(v == 0.0);

  LayerParams params;
  const BiLstmWeights bw = MakeBiLstm(params, "l", 3, 2, rng);
  const Tensor one = RandomTensor({1, 3}, rng);
  const Tensor y = bilstm_forward(one, bw);
  CHECK(y.shape() == Shape{1, 4});
  const auto f = ScalarLstm(one, bw.fwd, false), b = ScalarLstm(one, bw.bwd, false);
  CHECK(y.at(0, 0) == doctest::Approx(f[0]));
  CHECK(y.at(0, 2) == doctest::Approx(b[0]));
}

TEST_CASE("packed LSTM segments are independent") {
  Rng rng(17);
  LayerParams params;
  const BiLstmWeights bw = MakeBiLstm(params, "l", 3, 4, rng);
  const Tensor a = RandomTensor({3, 3}, rng), b = RandomTensor({5, 3}, rng);
  const Tensor parts[] = {a, b};
  const Tensor packed = concat_rows(parts);
  const std::size_t offsets[] = {0, 3, 8};
  const Tensor yp = bilstm_forward(packed, bw, offsets);
  const Tensor ya = bilstm_forward(a, bw), yb = bilstm_forward(b, bw);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(yp.at(t, j) == ya.at(t, j));
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(yp.at(3 + t, j) == yb.at(t, j));
}

TEST_CASE("finite differences: LSTM") {
  Rng rng(19);
  LayerParams params;
  BiLstmWeights bw = MakeBiLstm(params, "l", 3, 2, rng);
  Tensor x = RandomTensor({5, 3}, rng);
  const std::size_t offsets[] = {0, 2, 5};
  const double err = Check([&] { return bilstm_forward(x, bw, offsets); },
                           {x, bw.fwd.w_ih, bw.fwd.w_hh, bw.fwd.bias, bw.bwd.w_ih, bw.bwd.w_hh, bw.bwd.bias});
  CHECK(err < kTol);
}

TEST_CASE("convolution against a direct sliding-window sum") {
  Rng rng(23);
  LayerParams params;
  ConvGeometry g{2, 3, 5, 3, 3, 2};
  ConvWeights w = MakeConv(params, "c", g, rng);
  const std::size_t t_in = 7;
  const Tensor x = RandomTensor({t_in, g.input_width()}, rng);
  const Tensor y = conv_forward(x, w);
  REQUIRE(y.rows() == 4);
  for (std::size_t to = 0; to < 4; ++to)
    for (std::size_t co = 0; co < 3; ++co)
      for (std::size_t f = 0; f < 5; ++f) {
        double acc = w.bias.data()[co];
        for (std::size_t ci = 0; ci < 2; ++ci)
          for (int dt = -1; dt <= 1; ++dt)
            for (int df = -1; df <= 1; ++df) {
              const long ti = static_cast<long>(to * 2) + dt, fi = static_cast<long>(f) + df;
              if (ti < 0 || ti >= static_cast<long>(t_in) || fi < 0 || fi >= 5) continue;
              acc += w.weight.at(co, (ci * 3 + static_cast<std::size_t>(dt + 1)) * 3 + static_cast<std::size_t>(df + 1)) *
                     x.at(static_cast<std::size_t>(ti), ci * 5 + static_cast<std::size_t>(fi));
            }
        CHECK(y.at(to, co * 5 + f) == doctest::Approx(acc).epsilon(1e-6));
      }
}

TEST_CASE("convolution geometry cases") {
  Rng rng(29);
  ConvWeights id{{1, 1, 4, 1, 1, 1}, Tensor::Filled({1, 1}, 1.0), Tensor::Zeros({1})};
  const Tensor x = RandomTensor({6, 4}, rng);
  const Tensor y = conv_forward(x, id);
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));

  ConvWeights s2{{1, 1, 4, 3, 3, 2}, Tensor::Zeros({1, 9}), Tensor::Zeros({1})};
  CHECK(conv_forward(RandomTensor({10, 4}, rng), s2).rows() == 5);
  std::vector<std::size_t> out_offsets;
  const std::size_t offsets[] = {0, 3, 10};
  CHECK(conv_forward(RandomTensor({10, 4}, rng), s2, offsets, &out_offsets).rows() == 6);
  CHECK(out_offsets == std::vector<std::size_t>{0, 2, 6});
}

TEST_CASE("finite differences: convolution") {
  Rng rng(31);
  LayerParams params;
  ConvWeights w = MakeConv(params, "c", {2, 2, 3, 3, 3, 2}, rng);
  Tensor x = RandomTensor({5, 6}, rng);
  const std::size_t offsets[] = {0, 2, 5};
  CHECK(Check([&] { return conv_forward(x, w, offsets); }, {x, w.weight, w.bias}) < kTol);
}

TEST_CASE("batch norm, dropout, embedding") {
  LayerParams params;
  BatchNorm bn = MakeBatchNorm(params, "bn", 3);
  const Tensor c = Tensor::Filled({4, 3}, 2.5);
  const Tensor normed = batchnorm_forward(c, bn, Mode::kTrain);
  for (double v : normed.data()) CHECK(std::abs(v) < 1e-6);
  CHECK(bn.running_mean.data()[0] == doctest::Approx(0.25));  // momentum 0.1 toward 2.5

  Rng rng(37);
  const Tensor x = RandomTensor({3, 4}, rng);
  for (Mode m : {Mode::kTrain, Mode::kEval}) {
    const Tensor y = dropout_forward(x, 0.0, rng, m);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));
  }
  const Tensor e = dropout_forward(x, 0.5, rng, Mode::kEval);
  CHECK(std::vector<double>(e.data().begin(), e.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));
  const Tensor d = dropout_forward(Tensor::Filled({100, 10}, 1.0), 0.5, rng, Mode::kTrain);
  for (double v : d.data()) CHECK((v == 0.0 || v == doctest::Approx(2.0)));

  const Tensor table = RandomTensor({5, 3}, rng);
  const int idx[] = {4, 0, 4};
  const Tensor emb = embedding_forward(table, idx);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(emb.at(0, k) == table.at(4, k));
    CHECK(emb.at(1, k) == table.at(0, k));
  }
}

TEST_CASE("finite differences: batch norm, dropout, embedding, linear") {
  Rng rng(41);
  LayerParams params;
  BatchNorm bn = MakeBatchNorm(params, "bn", 3);
  InitUniform(bn.gamma, 1.0, rng);
  Tensor x = RandomTensor({5, 3}, rng);
  CHECK(Check([&] { return batchnorm_forward(x, bn, Mode::kTrain); }, {x, bn.gamma, bn.beta}) < kTol);
  CHECK(Check([&] { return batchnorm_forward(x, bn, Mode::kEval); }, {x, bn.gamma, bn.beta}) < kTol);

  CHECK(Check(
            [&] {
              Rng fixed(5);
              return dropout_forward(x, 0.3, fixed, Mode::kTrain);
            },
            {x}) < kTol);

  Tensor table = RandomTensor({4, 3}, rng);
  const int idx[] = {1, 3, 1};
  CHECK(Check([&] { return embedding_forward(table, idx); }, {table}) < kTol);

  Tensor w = RandomTensor({2, 3}, rng), b = RandomTensor({2}, rng);
  CHECK(Check([&] { return linear_forward(x, w, b); }, {x, w, b}) < kTol);
}

TEST_CASE("float32 rounding") {
  Tensor t = Tensor::FromData({2}, {0.1, 1.0 / 3.0});
  RoundTo(t, Precision::kFloat32);
  CHECK(t.data()[0] == static_cast<double>(0.1f));
  Tensor u = Tensor::FromData({1}, {0.1});
  RoundTo(u, Precision::kFloat64);
  CHECK(u.data()[0] == 0.1);
  Tensor bad = Tensor::FromData({1}, {std::nan("")});
  CHECK_THROWS_AS(CheckFinite(bad, "test"), NumericError);
}
