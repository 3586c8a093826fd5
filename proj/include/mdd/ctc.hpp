// include/mdd/ctc.hpp

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

#ifndef MDD_CTC_HPP_
#define MDD_CTC_HPP_

#include <span>
#include <vector>

#include "mdd/error.hpp"
#include "mdd/ndiff/tensor.hpp"

namespace mdd::ctc {

/// Raised when no alignment of the target fits into the available frames.
class InfeasibleTargetError : public NumericError {
 public:
  InfeasibleTargetError(std::size_t frames, std::size_t needed);
  std::size_t frames() const { return frames_; }
  std::size_t needed() const { return needed_; }

 private:
  std::size_t frames_, needed_;
};

struct CtcTarget {
  std::vector<int> labels;  // no blanks

  /// Validates that no label is the blank.
  static CtcTarget Make(std::vector<int> labels, int blank = 0);
  /// blank, l1, blank, l2, ..., lL, blank (length 2L + 1).
  std::vector<int> extended(int blank = 0) const;
  /// Frames required by any alignment: L plus one per adjacent repeat.
  std::size_t min_frames() const;
};

struct LossResult {
  double loss = 0;  // -log p(target | logp)
  nd::Tensor grad;  // d loss / d logp, same shape as logp
};

/// Negative log-likelihood of `target` summed over all blank-augmented
/// frame paths, computed by the forward-backward recursions in log space.
/// `logp` is (T', V); rows need not be normalized, the gradient is taken with
/// respect to each entry independently. Throws InfeasibleTargetError when
/// T' < target.min_frames().
LossResult ctc_loss(const nd::Tensor &logp, const CtcTarget &target, int blank = 0);

/// Differentiable mean of ctc_loss over the packed utterances of `logp`
/// (rows [offsets[i], offsets[i+1]) belong to targets[i]).
nd::Tensor ctc_loss_batch(const nd::Tensor &logp, std::span<const std::size_t> offsets,
                          std::span<const CtcTarget> targets, int blank = 0);

struct Hypothesis {
  std::vector<int> labels;
  double score = 0;  // log-probability
};

/// Merges adjacent repeats, then drops blanks.
std::vector<int> collapse(std::span<const int> frames, int blank = 0);

/// Per-frame argmax (lowest index wins ties), collapsed. Score is the sum of
/// the chosen log-probabilities.
Hypothesis greedy_decode(const nd::Tensor &logp, int blank = 0);

struct BeamOptions {
  std::size_t width = 10;
  /// Symbols whose frame log-probability falls below this are not expanded
  /// (the frame's best symbol always is).
  double prune_floor = -30.0;
};

/// CTC prefix beam search keeping blank / non-blank ending probabilities per
/// prefix. Returns the most probable collapsed labeling among the survivors;
/// with a beam at least as wide as the number of distinct prefixes and no
/// pruning this is the exact maximum-probability labeling.
Hypothesis beam_decode(const nd::Tensor &logp, const BeamOptions &options, int blank = 0);

}  // namespace mdd::ctc

#endif  // MDD_CTC_HPP_
