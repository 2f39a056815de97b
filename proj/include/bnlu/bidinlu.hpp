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

// Bi-directional joint heads over encoder states (h_1 .. h_N).
//
// intent2slot: an initial intent distribution P_I read from h_1 is repeated
// for each of the N-1 later positions, concatenated onto that position's
// hidden state, and classified by a per-position dense layer into slot
// logits S; softmax + argmax give the slot predictions.
//
// slot2intent: a separate per-position dense layer over the same N-1 states
// yields slot distributions P_S; their row-major flattening is concatenated
// onto h_1 and classified into the final intent distribution.
//
// Gradients flow through both probability links unless detach_links is set.
// With bidirectional off the links are replaced by zeros, which leaves two
// independent heads on H and h_1.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/ops.hpp"
#include "bnlu/tensor.hpp"

namespace bnlu {

struct HeadDims {
  std::size_t hidden;       // D_E
  std::size_t intents;      // D_IP
  std::size_t slot_labels;  // D_SP
  std::size_t seq_len;      // N
  bool tie_positions = false;

  std::size_t positions() const { return tie_positions ? 1 : seq_len - 1; }
};

template <typename T>
struct HeadParams {
  Tensor<T> w_i;  // [D_IP, D_E]
  Tensor<T> b_i;  // [D_IP]
  Tensor<T> v_s;  // [P, D_SP, D_E + D_IP]
  Tensor<T> m_s;  // [P, D_SP]
  Tensor<T> w_s;  // [P, D_SP, D_E]
  Tensor<T> b_s;  // [P, D_SP]
  Tensor<T> v_i;  // [D_IP, D_E + D_SP (N-1)]
  Tensor<T> m_i;  // [D_IP]

  static HeadParams init(const HeadDims& d, double init_std, Rng& rng) {
    detail::check(d.seq_len >= 2 && d.hidden >= 1 && d.intents >= 1 && d.slot_labels >= 1, Errc::config,
                  "invalid head dimensions");
    const std::size_t p = d.positions();
    auto weight = [&](Shape dims) {
      Tensor<T> t(std::move(dims), true);
      t.fill_normal(rng, init_std);
      return t;
    };
    HeadParams h;
    h.w_i = weight({d.intents, d.hidden});
    h.b_i = weight({d.intents});
    h.v_s = weight({p, d.slot_labels, d.hidden + d.intents});
    h.m_s = weight({p, d.slot_labels});
    h.w_s = weight({p, d.slot_labels, d.hidden});
    h.b_s = weight({p, d.slot_labels});
    h.v_i = weight({d.intents, d.hidden + d.slot_labels * (d.seq_len - 1)});
    h.m_i = weight({d.intents});
    return h;
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix = "heads.") {
    std::pair<const char*, Tensor<T>*> named[] = {{"W_I", &w_i}, {"b_I", &b_i}, {"V_S", &v_s}, {"m_S", &m_s},
                                                  {"W_S", &w_s}, {"b_S", &b_s}, {"V_I", &v_i}, {"m_I", &m_i}};
    for (auto [n, t] : named) out.push_back({prefix + n, t});
  }
};

// Fixed values substituted for the detached links (used by gradient checks
// so that the finite-difference function matches the detached gradient).
template <typename T>
struct FrozenLinks {
  std::vector<T> intent_probs;     // P_I, length D_IP
  std::vector<T> slot_probs_flat;  // flattened P_S, length D_SP (N-1)
};

template <typename T>
struct ForwardOutput {
  Var<T> initial_intent_probs;  // P_I [D_IP]
  Var<T> slot_logits;           // S [N-1, D_SP]
  Var<T> slot_probs;            // softmax(S) [N-1, D_SP]
  Var<T> probe_probs;           // P_S [N-1, D_SP]
  Var<T> intent_probs;          // [D_IP]
  std::vector<int> slot_pred;   // N-1
  int intent_pred = 0;
  FrozenLinks<T> links;  // link values that were actually concatenated
};

/// P_I = softmax(h1 W_I^T + b_I)
template <typename T>
Var<T> intent_probe(Var<T> h1, HeadParams<T>& p) {
  Tape<T>& tape = *h1.tape;
  detail::check(h1.rank() == 1 && h1.numel() == p.w_i.dim(1), Errc::shape, "intent_probe: h1 ",
                to_string(h1.dims()), " vs W_I ", to_string(p.w_i.dims()));
  return softmax(affine(h1, tape.param(p.w_i), tape.param(p.b_i)));
}

/// P_I repeated for the N-1 labelled positions.
template <typename T>
Var<T> broadcast_intent(Var<T> intent_probs, std::size_t seq_len) {
  detail::check(seq_len >= 2, Errc::usage, "broadcast_intent: N must be >= 2, got ", seq_len);
  return repeat_rows(intent_probs, seq_len - 1);
}

/// S[n] = (H[n] ++ P_I) V_S[n]^T + m_S[n]
template <typename T>
Var<T> intent2slot_logits(Var<T> states, Var<T> intent_rows, HeadParams<T>& p) {
  Tape<T>& tape = *states.tape;
  detail::check(states.rank() == 2 && intent_rows.rank() == 2 && states.dim(0) == intent_rows.dim(0) &&
                    p.v_s.dim(2) == states.dim(1) + intent_rows.dim(1),
                Errc::shape, "intent2slot_logits: H ", to_string(states.dims()), ", P_I rows ",
                to_string(intent_rows.dims()), ", V_S ", to_string(p.v_s.dims()));
  return position_affine(concat_last(states, intent_rows), tape.param(p.v_s), tape.param(p.m_s));
}

template <typename T>
std::vector<int> row_argmax(Var<T> probs) {
  const std::size_t rows = probs.dim(0), k = probs.dim(1);
  auto v = probs.value();
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = static_cast<int>(argmax(v.subspan(r * k, k)));
  return out;
}

template <typename T>
std::pair<Var<T>, std::vector<int>> predict_slots(Var<T> slot_logits) {
  Var<T> probs = softmax(slot_logits);
  return {probs, row_argmax(probs)};
}

/// P_S[n] = softmax(H[n] W_S[n]^T + b_S[n])
template <typename T>
Var<T> slot_probe(Var<T> states, HeadParams<T>& p) {
  Tape<T>& tape = *states.tape;
  detail::check(states.rank() == 2 && p.w_s.dim(2) == states.dim(1), Errc::shape, "slot_probe: H ",
                to_string(states.dims()), " vs W_S ", to_string(p.w_s.dims()));
  return softmax(position_affine(states, tape.param(p.w_s), tape.param(p.b_s)));
}

/// softmax((h1 ++ flat) V_I^T + m_I) where flat is the flattened P_S.
template <typename T>
std::pair<Var<T>, int> slot2intent_predict(Var<T> h1, Var<T> flat_slot_probs, HeadParams<T>& p) {
  Tape<T>& tape = *h1.tape;
  detail::check(h1.rank() == 1 && flat_slot_probs.rank() == 1 &&
                    p.v_i.dim(1) == h1.numel() + flat_slot_probs.numel(),
                Errc::shape, "slot2intent_predict: h1 ", to_string(h1.dims()), ", flattened P_S ",
                to_string(flat_slot_probs.dims()), ", V_I ", to_string(p.v_i.dims()));
  Var<T> probs = softmax(affine(concat_last(h1, flat_slot_probs), tape.param(p.v_i), tape.param(p.m_i)));
  return {probs, static_cast<int>(argmax(probs.value()))};
}

/// Runs both heads on hidden[N, D_E].
template <typename T>
ForwardOutput<T> heads_forward(Var<T> hidden, HeadParams<T>& p, const ModelConfig& cfg,
                               const FrozenLinks<T>* frozen = nullptr) {
  Tape<T>& tape = *hidden.tape;
  const std::size_t n = hidden.dim(0);
  detail::check(n == cfg.encoder.seq_len && n >= 2, Errc::shape, "heads: hidden has ", n, " rows, expected ",
                cfg.encoder.seq_len);
  Var<T> h1 = row(hidden, 0);
  Var<T> states = slice_rows(hidden, 1, n - 1);

  ForwardOutput<T> out;
  out.initial_intent_probs = intent_probe(h1, p);
  out.probe_probs = slot_probe(states, p);
  Var<T> flat = flatten(out.probe_probs);

  Var<T> intent_link = out.initial_intent_probs;
  Var<T> slot_link = flat;
  if (!cfg.bidirectional) {
    intent_link = tape.constant({intent_link.numel()}, std::vector<T>(intent_link.numel(), T{0}));
    slot_link = tape.constant({slot_link.numel()}, std::vector<T>(slot_link.numel(), T{0}));
  } else if (cfg.detach_links) {
    if (frozen != nullptr) {
      intent_link = tape.constant({intent_link.numel()}, frozen->intent_probs);
      slot_link = tape.constant({slot_link.numel()}, frozen->slot_probs_flat);
    } else {
      intent_link = detach(intent_link);
      slot_link = detach(slot_link);
    }
  }
  out.links.intent_probs.assign(intent_link.value().begin(), intent_link.value().end());
  out.links.slot_probs_flat.assign(slot_link.value().begin(), slot_link.value().end());

  out.slot_logits = intent2slot_logits(states, broadcast_intent(intent_link, n), p);
  std::tie(out.slot_probs, out.slot_pred) = predict_slots(out.slot_logits);
  std::tie(out.intent_probs, out.intent_pred) = slot2intent_predict(h1, slot_link, p);
  return out;
}

}  // namespace bnlu
