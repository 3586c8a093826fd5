// src/ctc.cpp

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

#include "mdd/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mdd::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void RequireLogProbs(const nd::Tensor &logp, int blank, const char *op) {
  if (logp.dim() != 2) throw UsageError(std::string(op) + ": expected a (T, V) matrix");
  if (blank < 0 || static_cast<std::size_t>(blank) >= logp.cols())
    throw UsageError(std::string(op) + ": blank index outside vocabulary");
}

}  // namespace

InfeasibleTargetError::InfeasibleTargetError(std::size_t frames, std::size_t needed)
    : NumericError("ctc: target needs " + std::to_string(needed) + " frames but only " +
                   std::to_string(frames) + " are available"),
      frames_(frames),
      needed_(needed) {}

CtcTarget CtcTarget::Make(std::vector<int> labels, int blank) {
  for (int l : labels)
    if (l == blank) throw UsageError("ctc target contains the blank label");
  return CtcTarget{std::move(labels)};
}

std::vector<int> CtcTarget::extended(int blank) const {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

std::size_t CtcTarget::min_frames() const {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

LossResult ctc_loss(const nd::Tensor &logp, const CtcTarget &target, int blank) {
  RequireLogProbs(logp, blank, "ctc_loss");
  const std::size_t frames = logp.rows(), vocab = logp.cols();
  if (frames < target.min_frames()) throw InfeasibleTargetError(frames, target.min_frames());
  for (int l : target.labels)
    if (l < 0 || static_cast<std::size_t>(l) >= vocab || l == blank)
      throw UsageError("ctc_loss: target label outside vocabulary");

  const std::vector<int> ext = target.extended(blank);
  const std::size_t states = ext.size();
  const auto lp = logp.data();
  auto emit = [&](std::size_t t, std::size_t s) { return lp[t * vocab + static_cast<std::size_t>(ext[s])]; };
  // A path may jump over a blank only between two different labels.
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * states, kNegInf), beta(frames * states, kNegInf);
  alpha[0] = emit(0, 0);
  if (states > 1) alpha[1] = emit(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha[(t - 1) * states + s];
      if (s >= 1) a = LogAdd(a, alpha[(t - 1) * states + s - 1]);
      if (can_skip(s)) a = LogAdd(a, alpha[(t - 1) * states + s - 2]);
      alpha[t * states + s] = a == kNegInf ? kNegInf : a + emit(t, s);
    }
  }

  // beta excludes the emission at t itself.
  beta[(frames - 1) * states + states - 1] = 0.0;
  if (states > 1) beta[(frames - 1) * states + states - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = beta[(t + 1) * states + s] + emit(t + 1, s);
      if (s + 1 < states) b = LogAdd(b, beta[(t + 1) * states + s + 1] + emit(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = LogAdd(b, beta[(t + 1) * states + s + 2] + emit(t + 1, s + 2));
      beta[t * states + s] = b;
    }
  }

  double log_total = alpha[(frames - 1) * states + states - 1];
  if (states > 1) log_total = LogAdd(log_total, alpha[(frames - 1) * states + states - 2]);
  if (!std::isfinite(log_total)) throw NumericError("ctc_loss: target has zero probability");

  std::vector<double> grad(frames * vocab, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha[t * states + s] + beta[t * states + s];
      if (ab == kNegInf) continue;
      grad[t * vocab + static_cast<std::size_t>(ext[s])] -= std::exp(ab - log_total);
    }
  }
  return {-log_total, nd::Tensor::FromData(logp.shape(), std::move(grad))};
}

nd::Tensor ctc_loss_batch(const nd::Tensor &logp, std::span<const std::size_t> offsets,
                          std::span<const CtcTarget> targets, int blank) {
  RequireLogProbs(logp, blank, "ctc_loss_batch");
  if (offsets.size() != targets.size() + 1 || offsets.front() != 0 || offsets.back() != logp.rows())
    throw UsageError("ctc_loss_batch: offsets do not match targets / rows");
  if (targets.empty()) throw UsageError("ctc_loss_batch: empty batch");
  const std::size_t vocab = logp.cols();
  const double inv_b = 1.0 / static_cast<double>(targets.size());
  std::vector<double> grad(logp.size(), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t b = offsets[i], e = offsets[i + 1];
    std::vector<double> rows(logp.data().begin() + static_cast<long>(b * vocab),
                             logp.data().begin() + static_cast<long>(e * vocab));
    const auto r = ctc_loss(nd::Tensor::FromData({e - b, vocab}, std::move(rows)), targets[i], blank);
    total += r.loss;
    const auto g = r.grad.data();
    for (std::size_t k = 0; k < g.size(); ++k) grad[b * vocab + k] = g[k] * inv_b;
  }
  nd::Tensor out = nd::Tensor::Scalar(total * inv_b);
  if (nd::Tape::Recording({&logp})) {
    nd::Tape::active()->record(out, [logp, out, grad = std::move(grad)]() {
      const double g = out.node()->grad[0];
      auto &gl = logp.node()->grad_buffer();
      for (std::size_t k = 0; k < gl.size(); ++k) gl[k] += g * grad[k];
    });
  }
  return out;
}

std::vector<int> collapse(std::span<const int> frames, int blank) {
  std::vector<int> out;
  int last = -1;
  bool have_last = false;
  for (int f : frames) {
    if (!have_last || f != last) {
      if (f != blank) out.push_back(f);
    }
    last = f;
    have_last = true;
  }
  return out;
}

Hypothesis greedy_decode(const nd::Tensor &logp, int blank) {
  RequireLogProbs(logp, blank, "greedy_decode");
  const std::size_t vocab = logp.cols();
  std::vector<int> best(logp.rows());
  Hypothesis h;
  for (std::size_t t = 0; t < logp.rows(); ++t) {
    const double *row = logp.data().data() + t * vocab;
    const auto k = static_cast<std::size_t>(std::max_element(row, row + vocab) - row);  // first max
    best[t] = static_cast<int>(k);
    h.score += row[k];
  }
  h.labels = collapse(best, blank);
  return h;
}

Hypothesis beam_decode(const nd::Tensor &logp, const BeamOptions &options, int blank) {
  RequireLogProbs(logp, blank, "beam_decode");
  if (options.width == 0) throw UsageError("beam_decode: width must be >= 1");
  const std::size_t vocab = logp.cols();

  struct Score {
    double blank = kNegInf;
    double non_blank = kNegInf;
    double total() const { return LogAdd(blank, non_blank); }
  };
  using Beam = std::map<std::vector<int>, Score>;
  Beam beam;
  beam[{}] = Score{0.0, kNegInf};

  for (std::size_t t = 0; t < logp.rows(); ++t) {
    const double *row = logp.data().data() + t * vocab;
    const auto top = static_cast<std::size_t>(std::max_element(row, row + vocab) - row);
    Beam next;
    for (const auto &[prefix, sc] : beam) {
      const double total = sc.total();
      for (std::size_t k = 0; k < vocab; ++k) {
        const double lp = row[k];
        if (lp < options.prune_floor && k != top) continue;
        if (static_cast<int>(k) == blank) {
          auto &n = next[prefix];
          n.blank = LogAdd(n.blank, total + lp);
          continue;
        }
        std::vector<int> extended = prefix;
        extended.push_back(static_cast<int>(k));
        auto &n = next[extended];
        if (!prefix.empty() && prefix.back() == static_cast<int>(k)) {
          // Repeating the last label needs a blank in between; otherwise the
          // frame merges into the existing prefix.
          n.non_blank = LogAdd(n.non_blank, sc.blank + lp);
          auto &same = next[prefix];
          same.non_blank = LogAdd(same.non_blank, sc.non_blank + lp);
        } else {
          n.non_blank = LogAdd(n.non_blank, total + lp);
        }
      }
    }
    std::vector<std::pair<double, const std::vector<int> *>> ranked;
    ranked.reserve(next.size());
    for (const auto &[prefix, sc] : next) ranked.emplace_back(sc.total(), &prefix);
    // Stable on ties: std::map order (lexicographic prefix) is kept.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
    Beam pruned;
    for (std::size_t i = 0; i < std::min(options.width, ranked.size()); ++i)
      pruned.emplace(*ranked[i].second, next.at(*ranked[i].second));
    beam = std::move(pruned);
  }

  Hypothesis best;
  best.score = kNegInf;
  for (const auto &[prefix, sc] : beam) {
    if (sc.total() > best.score) {
      best.score = sc.total();
      best.labels = prefix;
    }
  }
  return best;
}

}  // namespace mdd::ctc
