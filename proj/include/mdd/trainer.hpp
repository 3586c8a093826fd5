// include/mdd/trainer.hpp

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

#ifndef MDD_TRAINER_HPP_
#define MDD_TRAINER_HPP_

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mdd/checkpoint.hpp"
#include "mdd/config.hpp"
#include "mdd/corpus.hpp"
#include "mdd/eval.hpp"
#include "mdd/model.hpp"
#include "mdd/phoneset.hpp"

namespace mdd {

/// Model shape for a run: vocabularies come from the phone set and the
/// sentence unit, everything else from cfg.model.
ModelConfig BuildModelConfig(const RunConfig &cfg, const PhoneSet &phones);

/// Features and index targets of a manifest, loaded once.
struct PreparedSet {
  std::vector<Utterance> utterances;
  std::vector<FeatureMatrix> features;  // normalized, stacked
  std::vector<std::vector<int>> targets;  // annotated, vocabulary indices

  std::size_t size() const { return utterances.size(); }
};
PreparedSet Prepare(const Manifest &m, const PhoneSet &phones);

struct Decoded {
  std::string id;
  std::vector<std::string> recognized;
};

struct EvalResult {
  eval::CorpusScore score;
  std::vector<Decoded> hypotheses;  // in set order
};

/// Eval-mode forward, prefix beam search per utterance (beam 1 and up), then
/// scoring against canonical and annotated sequences. The prompt fed to the
/// sentence encoder is the canonical sequence.
EvalResult evaluate(Model &model, SentenceUnit unit, const PhoneSet &phones, const PreparedSet &set,
                    std::size_t beam, std::size_t batch_size = 8, std::size_t workers = 1,
                    double prune_floor = -30.0);

/// Adaptive moment estimation over the trainable tensors of a parameter set.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(nd::LayerParams &params);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return t_; }
  /// Moments as "optim.m.<name>" / "optim.v.<name>" plus "optim.step".
  void capture(const nd::LayerParams &params, Checkpoint &ckpt) const;
  void restore(const Checkpoint &ckpt, const nd::LayerParams &params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

/// Scales all trainable gradients so their joint L2 norm is at most
/// max_norm. Returns the norm before clipping.
double ClipGradNorm(nd::LayerParams &params, double max_norm);
double GradNorm(const nd::LayerParams &params);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double dev_per = 0;
  eval::MddMetrics dev;
  double learning_rate = 0;
  bool best = false;
};

struct TrainResult {
  std::size_t best_epoch = 0;
  double best_f = 0;
  double best_per = 0;
  std::vector<EpochRecord> history;
  Checkpoint best;  // includes optimizer state
};

struct TrainOptions {
  std::string checkpoint_dir;  // best.ckpt / last.ckpt when non-empty
  std::ostream *log = nullptr;  // one JSON record per epoch
  std::ostream *warnings = nullptr;  // skipped utterances
  std::size_t workers = 1;
};

class Trainer {
 public:
  Trainer(const RunConfig &cfg, const PhoneSet &phones);

  Model &model() { return *model_; }
  const RunConfig &config() const { return cfg_; }
  Adam &optimizer() { return adam_; }
  std::size_t next_epoch() const { return next_epoch_; }

  /// Loads model and optimizer state and continues after the stored epoch.
  void resume(const Checkpoint &ckpt);

  /// Utterances whose target cannot be aligned to their frame count are
  /// left out (and reported to opts.warnings); none left is a NumericError.
  TrainResult train(const PreparedSet &train, const PreparedSet &dev, const TrainOptions &opts = {});

  /// One training step's loss with gradients left in the parameters (they
  /// are zeroed first). `step` only seeds the dropout stream.
  double compute_gradients(const PreparedSet &set, std::span<const std::size_t> items, std::size_t epoch,
                           std::size_t step);

  /// Prompt for an item in a given epoch: the augmented canonical sequence.
  std::vector<std::string> prompt(const Utterance &u, std::size_t epoch) const;

  Checkpoint snapshot(std::size_t epoch, double dev_f, double dev_per) const;

 private:
  RunConfig cfg_;
  const PhoneSet *phones_;
  std::optional<ConfusionTable> confusion_;
  augment::AugmentSpec spec_;
  SentenceVocab vocab_;
  std::unique_ptr<Model> model_;
  Adam adam_;
  std::size_t next_epoch_ = 1;
};

}  // namespace mdd

#endif  // MDD_TRAINER_HPP_
