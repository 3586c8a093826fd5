// src/trainer.cpp

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

#include "mdd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <thread>

#include "json.hpp"
#include "mdd/ctc.hpp"
#include "mdd/ndiff/ops.hpp"
#include "mdd/error.hpp"

namespace mdd {

namespace {

std::vector<std::size_t> FrameCounts(const PreparedSet &set) {
  std::vector<std::size_t> out;
  for (const auto &f : set.features) out.push_back(f.frames);
  return out;
}

}  // namespace

ModelConfig BuildModelConfig(const RunConfig &cfg, const PhoneSet &phones) {
  ModelConfig m = cfg.model;
  m.input_vocab = SentenceVocab(cfg.sentence_unit, phones).size();
  m.output_vocab = static_cast<std::size_t>(phones.vocab_size());
  m.feature_dim = kStackedDim;
  m.feature_planes = 3;
  return m;
}

PreparedSet Prepare(const Manifest &m, const PhoneSet &phones) {
  PreparedSet set;
  set.utterances = m.utterances;
  for (const auto &u : m.utterances) {
    set.features.push_back(load_features(m, u));
    set.targets.push_back(phones.encode(u.annotated));
  }
  return set;
}

EvalResult evaluate(Model &model, SentenceUnit unit, const PhoneSet &phones, const PreparedSet &set,
                    std::size_t beam, std::size_t batch_size, std::size_t workers, double prune_floor) {
  if (beam == 0) throw UsageError("evaluate: beam must be >= 1");
  const SentenceVocab vocab(unit, phones);
  std::vector<nd::Tensor> log_probs(set.size());
  std::vector<std::vector<int>> prompts;
  for (const auto &u : set.utterances) prompts.push_back(vocab.encode(u.canonical));

  for (const auto &items : plan_batches(FrameCounts(set), std::max<std::size_t>(batch_size, 1))) {
    std::vector<const FeatureMatrix *> feats;
    std::vector<std::vector<int>> sents;
    for (auto i : items) {
      feats.push_back(&set.features[i]);
      sents.push_back(prompts[i]);
    }
    const auto out = model.forward_batch(feats, sents, nd::Mode::kEval);
    for (std::size_t k = 0; k < items.size(); ++k)
      log_probs[items[k]] = nd::slice_rows(out.log_probs, out.offsets[k], out.offsets[k + 1]);
  }

  EvalResult r;
  r.hypotheses.resize(set.size());
  ctc::BeamOptions opts;
  opts.width = beam;
  opts.prune_floor = prune_floor;
  auto decode_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto h = ctc::beam_decode(log_probs[i], opts, phones.blank_id());
      r.hypotheses[i] = {set.utterances[i].id, phones.decode(h.labels)};
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(set.size(), 1));
  if (workers == 1) {
    decode_range(0, set.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (set.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(decode_range, std::min(set.size(), w * chunk), std::min(set.size(), (w + 1) * chunk));
    for (auto &t : pool) t.join();
  }
  for (std::size_t i = 0; i < set.size(); ++i)
    r.score.add(set.utterances[i].canonical, set.utterances[i].annotated, r.hypotheses[i].recognized);
  return r;
}

// --- optimization -------------------------------------------------------------

double GradNorm(const nd::LayerParams &params) {
  double sq = 0;
  for (const auto &name : params.names()) {
    if (!params.trainable(name)) continue;
    for (double g : params.get(name).grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double ClipGradNorm(nd::LayerParams &params, double max_norm) {
  const double norm = GradNorm(params);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto &name : params.names()) {
      if (!params.trainable(name)) continue;
      nd::Tensor &t = params.get(name);
      if (!t.has_grad()) continue;
      for (double &g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

void Adam::step(nd::LayerParams &params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto &name : params.names()) {
    if (!params.trainable(name)) continue;
    nd::Tensor &p = params.get(name);
    auto &m = m_[name];
    auto &v = v_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    const auto g = p.grad();
    auto x = p.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
      x[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::capture(const nd::LayerParams &params, Checkpoint &ckpt) const {
  ckpt.tensors.push_back({"optim.step", {1}, {static_cast<double>(t_)}});
  ckpt.tensors.push_back({"optim.learning_rate", {1}, {lr_}});
  for (const auto &name : params.names()) {
    if (!params.trainable(name)) continue;
    const auto it = m_.find(name);
    const std::size_t n = params.get(name).size();
    ckpt.tensors.push_back({"optim.m." + name, params.get(name).shape(),
                            it == m_.end() ? std::vector<double>(n, 0.0) : it->second});
    ckpt.tensors.push_back({"optim.v." + name, params.get(name).shape(),
                            it == m_.end() ? std::vector<double>(n, 0.0) : v_.at(name)});
  }
}

void Adam::restore(const Checkpoint &ckpt, const nd::LayerParams &params) {
  const auto *step = ckpt.find("optim.step");
  if (!step) throw DataError("checkpoint has no optimizer state");
  t_ = static_cast<std::uint64_t>(step->values.at(0));
  if (const auto *lr = ckpt.find("optim.learning_rate")) lr_ = lr->values.at(0);
  m_.clear();
  v_.clear();
  for (const auto &name : params.names()) {
    if (!params.trainable(name)) continue;
    const auto *m = ckpt.find("optim.m." + name);
    const auto *v = ckpt.find("optim.v." + name);
    if (!m || !v) throw DataError("checkpoint lacks optimizer moments for '" + name + "'");
    if (m->shape != params.get(name).shape() || v->shape != params.get(name).shape())
      throw DataError("optimizer moments for '" + name + "' have the wrong shape");
    m_[name] = m->values;
    v_[name] = v->values;
  }
}

// --- trainer ------------------------------------------------------------------

Trainer::Trainer(const RunConfig &cfg, const PhoneSet &phones)
    : cfg_(cfg), phones_(&phones), vocab_(cfg.sentence_unit, phones), adam_(cfg.learning_rate) {
  cfg_.validate();
  if (cfg_.augment_method == augment::Method::kCP) {
    confusion_ = ConfusionTable::Load(cfg_.confusion_table);
    confusion_->Validate(phones);
  }
  spec_.method = cfg_.augment_method;
  spec_.rate = cfg_.augment_rate;
  spec_.seed = cfg_.seed;
  spec_.exact_count = cfg_.augment_exact_count;
  spec_.p_substitute = cfg_.ps_substitute;
  spec_.p_delete = cfg_.ps_delete;
  spec_.p_insert = cfg_.ps_insert;
  spec_.confusion = confusion_ ? &*confusion_ : nullptr;
  spec_.validate();
  model_ = std::make_unique<Model>(BuildModelConfig(cfg_, phones), Rng::Derive(cfg_.seed, "init"));
  for (const auto &name : model_->params().names()) {
    nd::Tensor &t = model_->params().get(name);
    nd::RoundTo(t, cfg_.precision);
  }
}

void Trainer::resume(const Checkpoint &ckpt) {
  RestoreModel(ckpt, *model_);
  adam_.restore(ckpt, model_->params());
  next_epoch_ = ckpt.epoch + 1;
}

std::vector<std::string> Trainer::prompt(const Utterance &u, std::size_t epoch) const {
  if (spec_.method == augment::Method::kNone) return u.canonical;
  Rng rng(Rng::Derive(cfg_.seed, "augment:" + u.id, epoch));
  return augment::apply(u.canonical, spec_, *phones_, rng).sequence;
}

double Trainer::compute_gradients(const PreparedSet &set, std::span<const std::size_t> items, std::size_t epoch,
                                  std::size_t step) {
  model_->params().zero_grad();
  std::vector<const FeatureMatrix *> feats;
  std::vector<std::vector<int>> sents;
  std::vector<ctc::CtcTarget> targets;
  for (auto i : items) {
    feats.push_back(&set.features[i]);
    sents.push_back(vocab_.encode(prompt(set.utterances[i], epoch)));
    targets.push_back(ctc::CtcTarget::Make(set.targets[i], phones_->blank_id()));
  }
  Rng dropout(Rng::Derive(cfg_.seed, "dropout", epoch * 1000003 + step));
  nd::Tape tape;
  nd::Tape::Scope scope(tape);
  const auto out = model_->forward_batch(feats, sents, nd::Mode::kTrain, &dropout);
  const nd::Tensor loss = ctc::ctc_loss_batch(out.log_probs, out.offsets, targets, phones_->blank_id());
  if (!std::isfinite(loss.item())) throw NumericError("loss is not finite");
  nd::backward(loss, tape);
  return loss.item();
}

Checkpoint Trainer::snapshot(std::size_t epoch, double dev_f, double dev_per) const {
  Checkpoint c;
  c.config = cfg_.ToIni();
  c.epoch = static_cast<std::uint32_t>(epoch);
  c.dev_f = dev_f;
  c.dev_per = dev_per;
  c.dtype = cfg_.precision;
  CaptureModel(*model_, c);
  adam_.capture(model_->params(), c);
  return c;
}

TrainResult Trainer::train(const PreparedSet &train, const PreparedSet &dev, const TrainOptions &opts) {
  if (train.size() == 0 || dev.size() == 0) throw DataError("training and dev sets must be non-empty");
  namespace fs = std::filesystem;
  if (!opts.checkpoint_dir.empty()) fs::create_directories(opts.checkpoint_dir);

  std::vector<std::size_t> usable, frames;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::size_t t = model_->output_frames(train.features[i].frames);
    const std::size_t needed = ctc::CtcTarget::Make(train.targets[i], phones_->blank_id()).min_frames();
    if (t < needed) {
      if (opts.warnings)
        *opts.warnings << "warning: skipping " << train.utterances[i].id << ": target needs " << needed
                       << " frames but only " << t << " are available\n";
      continue;
    }
    usable.push_back(i);
    frames.push_back(train.features[i].frames);
  }
  if (usable.empty()) throw NumericError("no training utterance has enough frames for its target");

  TrainResult result;
  double best_f = -1, best_per = 0;
  std::size_t since_best = 0;
  auto plan = plan_batches(frames, cfg_.batch_size);
  for (auto &batch : plan)
    for (auto &i : batch) i = usable[i];
  for (std::size_t epoch = next_epoch_; epoch <= cfg_.epochs; ++epoch) {
    auto order = plan;
    Rng shuffle(Rng::Derive(cfg_.seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); ++s) {
      double loss = 0;
      try {
        loss = compute_gradients(train, order[s], epoch, s);
        ClipGradNorm(model_->params(), cfg_.clip);
      } catch (const ctc::InfeasibleTargetError &) {
        throw;
      } catch (const NumericError &e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(s) +
                           ": " + e.what());
      }
      adam_.step(model_->params());
      for (const auto &name : model_->params().names()) nd::RoundTo(model_->params().get(name), cfg_.precision);
      loss_sum += loss * static_cast<double>(order[s].size());
      seen += order[s].size();
    }
    model_->params().zero_grad();

    const EvalResult ev = evaluate(*model_, cfg_.sentence_unit, *phones_, dev, cfg_.beam, cfg_.batch_size, opts.workers,
                                   cfg_.prune_floor);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.dev_per = ev.score.recognition.rate();
    rec.dev = eval::metrics(ev.score.counts);
    rec.learning_rate = adam_.learning_rate();
    rec.best = rec.dev.f_measure > best_f || (rec.dev.f_measure == best_f && rec.dev_per < best_per);
    next_epoch_ = epoch + 1;
    if (rec.best) {
      best_f = rec.dev.f_measure;
      best_per = rec.dev_per;
      since_best = 0;
      result.best_epoch = epoch;
      result.best = snapshot(epoch, rec.dev.f_measure, rec.dev_per);
      if (!opts.checkpoint_dir.empty())
        save_checkpoint((fs::path(opts.checkpoint_dir) / "best.ckpt").string(), result.best);
    } else {
      ++since_best;
      if (cfg_.halve_on_plateau && since_best % cfg_.plateau_patience == 0)
        adam_.set_learning_rate(adam_.learning_rate() * 0.5);
    }
    if (!opts.checkpoint_dir.empty())
      save_checkpoint((fs::path(opts.checkpoint_dir) / "last.ckpt").string(), snapshot(epoch, rec.dev.f_measure, rec.dev_per));
    if (opts.log) {
      nlohmann::ordered_json j;
      j["epoch"] = rec.epoch;
      j["train_loss"] = rec.train_loss;
      j["dev_per"] = rec.dev_per;
      j["dev_precision"] = rec.dev.precision;
      j["dev_recall"] = rec.dev.recall;
      j["dev_f"] = rec.dev.f_measure;
      j["learning_rate"] = rec.learning_rate;
      j["best"] = rec.best;
      *opts.log << j.dump() << '\n' << std::flush;
    }
    result.history.push_back(rec);
    if (cfg_.early_stop_patience > 0 && since_best >= cfg_.early_stop_patience) break;
  }
  result.best_f = best_f < 0 ? 0 : best_f;
  result.best_per = best_per;
  return result;
}

}  // namespace mdd
