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

#include <cstdint>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/gradcheck.hpp"
#include "bnlu/model.hpp"
#include "bnlu/training.hpp"

namespace bnlu {

/// Model dimensions used by the whole-model gradient check: the run's
/// architecture with the gradcheck_* label inventory sizes.
inline ModelConfig gradcheck_model_config(const RunConfig& run) {
  ModelConfig mc = run.model;
  mc.vocab_size = run.gradcheck_vocab;
  mc.num_intents = run.gradcheck_intents;
  mc.num_slot_labels = run.gradcheck_slots;
  mc.validate();
  detail::check(mc.vocab_size > 4 && mc.num_slot_labels >= 2, Errc::config,
                "gradcheck needs gradcheck_vocab > 4 and gradcheck_slots >= 2");
  return mc;
}

/// Random padded examples with between 1 and N-2 words.
inline std::vector<EncodedExample> random_examples(const ModelConfig& mc, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = mc.encoder.seq_len;
  std::vector<EncodedExample> out;
  for (std::size_t k = 0; k < count; ++k) {
    EncodedExample e;
    e.length = 1 + rng.below(n - 2);
    e.token_ids.assign(n, Vocabulary::kPad);
    e.slot_ids.assign(n - 1, Vocabulary::kPadLabel);
    e.loss_mask.assign(n - 1, 0);
    e.token_ids[0] = Vocabulary::kCls;
    for (std::size_t i = 0; i < e.length; ++i) {
      e.token_ids[i + 1] = static_cast<int>(4 + rng.below(mc.vocab_size - 4));
      e.slot_ids[i] = static_cast<int>(1 + rng.below(mc.num_slot_labels - 1));
      e.loss_mask[i] = 1;
    }
    e.token_ids[e.length + 1] = Vocabulary::kSep;
    e.intent_id = static_cast<int>(rng.below(mc.num_intents));
    out.push_back(std::move(e));
  }
  return out;
}

/// Mean joint loss over `examples`, eval mode (no dropout).
template <typename T>
Var<T> batch_loss(Tape<T>& tape, Model<T>& model, std::span<const EncodedExample> examples, bool include_pad,
                  std::span<const FrozenLinks<T>> frozen = {}) {
  const T inv = T{1} / static_cast<T>(examples.size());
  Var<T> total;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto fo = forward(tape, model, examples[i].token_ids, Mode::eval, nullptr, frozen.empty() ? nullptr : &frozen[i]);
    Var<T> l = scale(joint_loss(fo, examples[i], include_pad), inv);
    total = total.valid() ? add(total, l) : l;
  }
  return total;
}

struct ModelGradCheck {
  GradCheckReport report;       // 64-bit gradients vs extended-precision differences
  GradCheckReport report_fd64;  // 64-bit gradients vs 64-bit differences (diagnostic)
};

/// Whole-model gradient check in 64-bit with dropout off. When links are
/// detached, their values are frozen so the differenced function is the
/// one the gradient describes.
inline ModelGradCheck model_gradcheck(const RunConfig& run, double eps = 1e-5, std::size_t examples = 2,
                                      bool with_fd64 = true) {
  using Ext = long double;
  const ModelConfig mc = gradcheck_model_config(run);
  Model<double> model = Model<double>::init(mc, run.train.seed);
  Model<Ext> ref = model.cast<Ext>();
  const auto batch = random_examples(mc, examples, run.train.seed + 1);
  const bool include_pad = run.train.loss_include_pad;

  std::vector<FrozenLinks<double>> frozen;
  std::vector<FrozenLinks<Ext>> frozen_ext;
  if (mc.detach_links && mc.bidirectional) {
    for (const auto& e : batch) {
      Tape<double> tape(false);
      auto fo = forward(tape, model, e.token_ids, Mode::eval, nullptr);
      frozen.push_back(fo.links);
      FrozenLinks<Ext> fe;
      fe.intent_probs.assign(fo.links.intent_probs.begin(), fo.links.intent_probs.end());
      fe.slot_probs_flat.assign(fo.links.slot_probs_flat.begin(), fo.links.slot_probs_flat.end());
      frozen_ext.push_back(std::move(fe));
    }
  }
  auto build = [&](Tape<double>& t) {
    return batch_loss<double>(t, model, batch, include_pad, frozen);
  };
  auto build_ref = [&](Tape<Ext>& t) { return batch_loss<Ext>(t, ref, batch, include_pad, frozen_ext); };

  auto params = model.parameters();
  auto ref_params = ref.parameters();
  ModelGradCheck out;
  out.report = finite_diff_check<double, Ext>(build, std::span<const NamedParam<double>>(params), build_ref,
                                              std::span<const NamedParam<Ext>>(ref_params), eps);
  if (with_fd64) out.report_fd64 = finite_diff_check<double>(build, std::span<const NamedParam<double>>(params), eps);
  return out;
}

}  // namespace bnlu
