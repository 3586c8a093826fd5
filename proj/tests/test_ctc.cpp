// tests/test_ctc.cpp

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
#include "mdd/ctc.hpp"
#include "mdd/error.hpp"
#include "mdd/ndiff/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mdd;
using namespace mdd::ctc;
using mdd::testing::BruteForceCtc;
using mdd::testing::LabelingProbabilities;
using mdd::testing::RandomLogProbs;

namespace {

nd::Tensor LogOf(std::initializer_list<std::initializer_list<double>> probs) {
  nd::Tensor t = nd::Tensor::Matrix(probs);
  for (double &v : t.mutable_data()) v = std::log(v);
  return t;
}

nd::Tensor OneHot(const std::vector<int> &frames, std::size_t vocab) {
  nd::Tensor t = nd::Tensor::Filled({frames.size(), vocab}, -1e4);
  for (std::size_t i = 0; i < frames.size(); ++i) t.at(i, static_cast<std::size_t>(frames[i])) = 0.0;
  return t;
}

}  // namespace

TEST_CASE("single forced path") {
  const nd::Tensor lp = LogOf({{0.3, 0.6, 0.1}});
  CHECK(ctc_loss(lp, CtcTarget::Make({1})).loss == doctest::Approx(-std::log(0.6)));
}

TEST_CASE("empty target is the all-blank path") {
  const nd::Tensor lp = LogOf({{0.5, 0.3, 0.2}, {0.7, 0.2, 0.1}, {0.4, 0.4, 0.2}});
  CHECK(ctc_loss(lp, CtcTarget::Make({})).loss == doctest::Approx(-(std::log(0.5) + std::log(0.7) + std::log(0.4))));
}

TEST_CASE("target helpers") {
  const CtcTarget t = CtcTarget::Make({1, 1, 2});
  CHECK(t.extended() == std::vector<int>{0, 1, 0, 1, 0, 2, 0});
  CHECK(t.min_frames() == 4);
  CHECK_THROWS_AS(CtcTarget::Make({1, 0}), UsageError);
}

TEST_CASE("infeasible target is a distinct error") {
  Rng rng(1);
  const nd::Tensor lp = RandomLogProbs(2, 3, rng);
  try {
    ctc_loss(lp, CtcTarget::Make({1, 1}));
    FAIL("expected InfeasibleTargetError");
  } catch (const InfeasibleTargetError &e) {
    CHECK(e.frames() == 2);
    CHECK(e.needed() == 3);
  }
}

TEST_CASE("loss equals brute-force path enumeration") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 1 + rng.below(6), vocab = 2 + rng.below(3);
    const nd::Tensor lp = RandomLogProbs(frames, vocab, rng);
    std::vector<int> target;
    const std::size_t len = rng.below(4);
    for (std::size_t i = 0; i < len; ++i) target.push_back(1 + static_cast<int>(rng.below(vocab - 1)));
    const CtcTarget t = CtcTarget::Make(target);
    if (t.min_frames() > frames) {
      CHECK_THROWS_AS(ctc_loss(lp, t), InfeasibleTargetError);
      continue;
    }
    const double oracle = BruteForceCtc(lp, target);
    CHECK(ctc_loss(lp, t).loss == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("loss gradient matches finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    nd::Tensor lp = RandomLogProbs(5, 4, rng);
    const CtcTarget t = CtcTarget::Make({1, 2, 2});
    const LossResult r = ctc_loss(lp, t);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      const double keep = lp.mutable_data()[i];
      lp.mutable_data()[i] = keep + eps;
      const double up = ctc_loss(lp, t).loss;
      lp.mutable_data()[i] = keep - eps;
      const double down = ctc_loss(lp, t).loss;
      lp.mutable_data()[i] = keep;
      CHECK(r.grad.data()[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
    }
  }
}

TEST_CASE("batch loss is the mean and backpropagates through log_softmax") {
  Rng rng(4);
  nd::Tensor logits = testing::RandomTensor({7, 3}, rng);
  const std::size_t offsets[] = {0, 3, 7};
  const CtcTarget targets[] = {CtcTarget::Make({1}), CtcTarget::Make({2, 1})};
  const nd::Tensor lp = nd::log_softmax(logits);
  const double a = ctc_loss(nd::slice_rows(lp, 0, 3), targets[0]).loss;
  const double b = ctc_loss(nd::slice_rows(lp, 3, 7), targets[1]).loss;
  CHECK(ctc_loss_batch(lp, offsets, targets).item() == doctest::Approx((a + b) / 2));
  const auto res = testing::CheckGradients([&] { return ctc_loss_batch(nd::log_softmax(logits), offsets, targets); },
                                           {logits});
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("collapse rule") {
  CHECK(collapse(std::vector<int>{1, 1, 0, 1, 2, 2}) == std::vector<int>{1, 1, 2});
  CHECK(collapse(std::vector<int>{0, 0}).empty());
}

TEST_CASE("greedy decoding") {
  CHECK(greedy_decode(OneHot({1, 1, 0, 1}, 3)).labels == std::vector<int>{1, 1});
  CHECK(greedy_decode(OneHot({0, 0, 0}, 3)).labels.empty());
  // Exact tie between symbols 1 and 2: the lower index wins.
  const nd::Tensor tie = LogOf({{0.2, 0.4, 0.4}});
  CHECK(greedy_decode(tie).labels == std::vector<int>{1});
}

TEST_CASE("beam decoding on one-hot rows") {
  const nd::Tensor oh = OneHot({2, 2, 0, 1, 1, 0, 1}, 3);
  const Hypothesis h = beam_decode(oh, {});
  CHECK(h.labels == std::vector<int>{2, 1, 1});
  CHECK(h.score == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(beam_decode(oh, {1}).labels == greedy_decode(oh).labels);
  CHECK_THROWS_AS(beam_decode(oh, {0}), UsageError);
}

TEST_CASE("wide beam equals the exhaustive best labeling") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t frames = 4, vocab = 3;
    const nd::Tensor lp = RandomLogProbs(frames, vocab, rng, 1.0);
    const auto probs = LabelingProbabilities(lp);
    auto best = probs.begin();
    for (auto it = probs.begin(); it != probs.end(); ++it)
      if (it->second > best->second) best = it;
    const Hypothesis h = beam_decode(lp, {probs.size()});
    CHECK(h.labels == best->first);
    CHECK(h.score == doctest::Approx(std::log(best->second)).epsilon(1e-9));
  }
}
