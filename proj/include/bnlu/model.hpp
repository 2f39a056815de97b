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

#include <span>
#include <string>
#include <vector>

#include "bnlu/bidinlu.hpp"
#include "bnlu/config.hpp"
#include "bnlu/encoder.hpp"

namespace bnlu {

/// Encoder plus joint heads. Every learned array is reachable through
/// parameters() in a fixed order, which is also the checkpoint order.
template <typename T>
struct Model {
  ModelConfig config;
  EncoderParams<T> encoder;
  HeadParams<T> heads;

  static HeadDims head_dims(const ModelConfig& cfg) {
    return {cfg.encoder.hidden, cfg.num_intents, cfg.num_slot_labels, cfg.encoder.seq_len, cfg.tie_positions};
  }

  static Model init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Model m;
    m.config = cfg;
    m.encoder = EncoderParams<T>::init(cfg.encoder, cfg.vocab_size, cfg.init_std, rng);
    m.heads = HeadParams<T>::init(head_dims(cfg), cfg.init_std, rng);
    return m;
  }

  std::vector<NamedParam<T>> parameters() {
    std::vector<NamedParam<T>> out;
    encoder.collect(out);
    heads.collect(out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& p : parameters()) n += p.tensor->numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.tensor->zero_grad();
  }

  /// Same architecture and values in another scalar type.
  template <typename U>
  Model<U> cast() const {
    Model<U> out = Model<U>::skeleton(config);
    auto src = const_cast<Model&>(*this).parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
    return out;
  }

  /// Correctly shaped model with unspecified (deterministic) values.
  static Model skeleton(const ModelConfig& cfg) { return init(cfg, 0); }
};

/// Full forward pass for one example: encoder then both heads.
template <typename T>
ForwardOutput<T> forward(Tape<T>& tape, Model<T>& model, std::span<const int> token_ids, Mode mode, Rng* rng,
                         const FrozenLinks<T>* frozen = nullptr) {
  EncoderOutput<T> enc = encode(tape, token_ids, model.config.encoder, model.encoder, mode, rng);
  return heads_forward(enc.hidden, model.heads, model.config, frozen);
}

}  // namespace bnlu
