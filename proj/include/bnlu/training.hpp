// Copyright 2026 The bnlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/metrics.hpp"
#include "bnlu/model.hpp"

namespace bnlu {

// ---------------------------------------------------------------------------
// Objective

/// -log intent_probs[gold]
template <typename T>
Var<T> intent_loss(Var<T> intent_probs, int gold) {
  return cross_entropy(intent_probs, gold);
}

/// sum_n mask[n] * -log slot_probs[n][gold[n]]; include_pad counts every row.
template <typename T>
Var<T> slot_loss(Var<T> slot_probs, std::span<const int> gold, std::span<const int> mask, bool include_pad = false) {
  detail::check(slot_probs.rank() == 2 && gold.size() == slot_probs.dim(0) && mask.size() == gold.size(),
                Errc::shape, "slot_loss: probs ", to_string(slot_probs.dims()), ", ", gold.size(), " gold ids, ",
                mask.size(), " mask entries");
  std::vector<T> weight(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) weight[i] = include_pad || mask[i] != 0 ? T{1} : T{0};
  return nll_rows(slot_probs, gold, std::span<const T>(weight));
}

/// L = L_I + L_S for one example.
template <typename T>
Var<T> joint_loss(const ForwardOutput<T>& fo, const EncodedExample& ex, bool include_pad = false) {
  detail::check(ex.intent_id >= 0, Errc::data, "joint_loss: example intent is not in the vocabulary");
  return add(intent_loss(fo.intent_probs, ex.intent_id), slot_loss(fo.slot_probs, ex.slot_ids, ex.loss_mask, include_pad));
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction; no warmup, no weight decay.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  std::size_t steps() const { return t_; }

  /// Applies one update from the gradients held in each tensor.
  void step(std::span<const NamedParam<T>> params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.tensor->numel(), 0.0);
        v_.emplace_back(p.tensor->numel(), 0.0);
      }
    }
    detail::check(m_.size() == params.size(), Errc::usage, "Adam: parameter list changed between steps");
    for (const auto& p : params)
      for (T g : p.tensor->grad())
        detail::check(std::isfinite(g), Errc::numeric, "non-finite gradient in parameter ", p.name);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto w = params[k].tensor->data();
      auto g = params[k].tensor->grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Inference

struct Prediction {
  std::string intent;
  std::vector<std::string> tags;  // one per input word
};

/// Eval-mode prediction for one raw word sequence. A predicted padding
/// label on a real word is reported as "O".
template <typename T>
Prediction predict(Model<T>& model, const Vocabularies& vocabs, std::span<const std::string> words,
                   std::size_t index = 0) {
  const auto ids = encode_tokens(words, vocabs.tokens, model.config.encoder.seq_len, index);
  Tape<T> tape(false);
  auto fo = forward(tape, model, ids, Mode::eval, nullptr);
  Prediction p;
  p.intent = vocabs.intents.item(fo.intent_pred);
  p.tags.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const int id = fo.slot_pred[i];
    p.tags.push_back(id == Vocabulary::kPadLabel ? std::string("O") : vocabs.slots.item(id));
  }
  return p;
}

template <typename T>
EvalReport evaluate(Model<T>& model, const Vocabularies& vocabs, std::span<const Utterance> data,
                    BioMode mode = BioMode::lenient) {
  std::vector<std::string> pred_intents, gold_intents;
  TagSequences pred_tags, gold_tags;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto p = predict(model, vocabs, data[i].tokens, i + 1);
    pred_intents.push_back(std::move(p.intent));
    pred_tags.push_back(std::move(p.tags));
    gold_intents.push_back(data[i].intent);
    gold_tags.push_back(data[i].slot_labels);
  }
  return evaluate_predictions(pred_intents, pred_tags, gold_intents, gold_tags, mode);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_intent_acc = 0.0;
  double val_slot_f1 = 0.0;
  double val_semantic_acc = 0.0;
};

struct TrainData {
  Vocabularies vocabs;
  std::vector<Utterance> train;
  std::vector<Utterance> valid;
};

struct TrainResult {
  Model<float> final_model;
  Model<float> best_model;  // highest validation semantic accuracy (earliest on ties)
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> log;
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

inline ModelConfig model_config_for(const RunConfig& run, const Vocabularies& vocabs) {
  ModelConfig m = run.model;
  m.vocab_size = vocabs.tokens.size();
  m.num_intents = vocabs.intents.size();
  m.num_slot_labels = vocabs.slots.size();
  return m;
}

/// Freshly initialized model for a run; pretrained vectors, if configured,
/// overwrite the matching embedding rows.
inline Model<float> initial_model(const RunConfig& run, const Vocabularies& vocabs) {
  Model<float> m = Model<float>::init(model_config_for(run, vocabs), run.train.seed);
  if (!run.embedding_file.empty()) load_pretrained_embeddings(run.embedding_file, vocabs.tokens, m.encoder.embedding);
  return m;
}

/// Minibatch Adam on the mean per-example joint loss. Deterministic for a
/// fixed TrainConfig::seed.
inline TrainResult train(const TrainData& data, Model<float> model, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  detail::check(!data.train.empty(), Errc::data, "training split is empty");
  const std::size_t seq_len = model.config.encoder.seq_len;
  const DatasetSplit split = encode_split("train", data.train, data.vocabs, seq_len);

  Adam<float> adam({cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});
  Rng dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  auto params = model.parameters();
  Tape<float> tape(true);

  TrainResult result;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : make_batches(split, cfg.batch_size, cfg.seed * 1000003ULL + epoch)) {
      model.zero_grad();
      const float inv = 1.0f / static_cast<float>(batch.indices.size());
      for (std::size_t idx : batch.indices) {
        const EncodedExample& ex = split.examples[idx];
        tape.reset();
        auto fo = forward(tape, model, ex.token_ids, Mode::train, &dropout_rng);
        Var<float> loss = joint_loss(fo, ex, cfg.loss_include_pad);
        total += loss.item();
        tape.backward(scale(loss, inv));
      }
      adam.step(params);
    }
    tape.reset();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(split.examples.size());
    if (!data.valid.empty()) {
      const EvalReport r = evaluate(model, data.vocabs, data.valid);
      rec.val_intent_acc = r.intent_acc;
      rec.val_slot_f1 = r.slot_f1;
      rec.val_semantic_acc = r.semantic_acc;
    }
    result.log.push_back(rec);
    if (rec.val_semantic_acc > best) {
      best = rec.val_semantic_acc;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  result.final_model = std::move(model);
  return result;
}

inline void write_metrics_log(std::ostream& os, std::span<const EpochRecord> log) {
  os << "epoch,train_loss,val_intent_acc,val_slot_f1,val_semantic_acc\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.4f,%.4f,%.4f\n", r.epoch, r.train_loss, r.val_intent_acc,
                  r.val_slot_f1, r.val_semantic_acc);
    os << buf;
  }
}

}  // namespace bnlu
