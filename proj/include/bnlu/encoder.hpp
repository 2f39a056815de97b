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

// Sequence encoders producing the hidden states (h_1 .. h_N), one row per
// token position: a transformer stack over learned token + position
// embeddings, or a single-layer unidirectional LSTM / GRU over token
// embeddings. All three share the embedding table and output [N, D_E].

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/ops.hpp"
#include "bnlu/tensor.hpp"

namespace bnlu {

template <typename T>
struct TransformerLayerParams {
  Tensor<T> wq, bq, wk, wv, bv, wo, bo;  // attention projections (keys carry no bias)
  Tensor<T> w1, b1, w2, b2;               // feed-forward
  Tensor<T> ln1_g, ln1_b;
  Tensor<T> ln2_g, ln2_b;  // standard wiring only
};

// Gate blocks are stacked along the output dim: i,f,g,o for LSTM; r,z,n for GRU.
template <typename T>
struct RecurrentParams {
  Tensor<T> w_ih, b_ih, w_hh, b_hh;
};

template <typename T>
struct EncoderParams {
  Tensor<T> embedding;  // [V, D_E]
  Tensor<T> position;   // [N, D_E], transformer only
  std::vector<TransformerLayerParams<T>> layers;
  RecurrentParams<T> rnn;

  static EncoderParams init(const EncoderConfig& cfg, std::size_t vocab_size, double init_std, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.hidden;
    auto weight = [&](Shape dims) {
      Tensor<T> t(std::move(dims), true);
      t.fill_normal(rng, init_std);
      return t;
    };
    auto zeros = [](Shape dims) { return Tensor<T>(std::move(dims), true); };
    auto ones = [](Shape dims) {
      Tensor<T> t(std::move(dims), true);
      std::fill(t.data().begin(), t.data().end(), T{1});
      return t;
    };
    EncoderParams p;
    p.embedding = weight({vocab_size, d});
    if (cfg.kind == EncoderKind::transformer) {
      p.position = weight({cfg.seq_len, d});
      for (std::size_t l = 0; l < cfg.stacks; ++l) {
        TransformerLayerParams<T> L;
        L.wq = weight({d, d});
        L.bq = zeros({d});
        L.wk = weight({d, d});
        L.wv = weight({d, d});
        L.bv = zeros({d});
        L.wo = weight({d, d});
        L.bo = zeros({d});
        L.w1 = weight({cfg.ffn_dim, d});
        L.b1 = zeros({cfg.ffn_dim});
        L.w2 = weight({d, cfg.ffn_dim});
        L.b2 = zeros({d});
        L.ln1_g = ones({d});
        L.ln1_b = zeros({d});
        if (cfg.standard_pre_norm) {
          L.ln2_g = ones({d});
          L.ln2_b = zeros({d});
        }
        p.layers.push_back(std::move(L));
      }
    } else {
      const std::size_t gates = cfg.kind == EncoderKind::lstm ? 4 : 3;
      p.rnn.w_ih = weight({gates * d, d});
      p.rnn.b_ih = zeros({gates * d});
      p.rnn.w_hh = weight({gates * d, d});
      p.rnn.b_hh = zeros({gates * d});
    }
    return p;
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix = "encoder.") {
    out.push_back({prefix + "embedding", &embedding});
    if (position.numel() > 0) out.push_back({prefix + "position", &position});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string lp = prefix + "layer" + std::to_string(l) + ".";
      std::pair<const char*, Tensor<T>*> named[] = {
          {"attn.wq", &L.wq}, {"attn.bq", &L.bq}, {"attn.wk", &L.wk},
          {"attn.wv", &L.wv}, {"attn.bv", &L.bv}, {"attn.wo", &L.wo}, {"attn.bo", &L.bo},
          {"ffn.w1", &L.w1},  {"ffn.b1", &L.b1},  {"ffn.w2", &L.w2},  {"ffn.b2", &L.b2},
          {"ln1.g", &L.ln1_g}, {"ln1.b", &L.ln1_b}, {"ln2.g", &L.ln2_g}, {"ln2.b", &L.ln2_b},
      };
      for (auto [n, t] : named)
        if (t->numel() > 0) out.push_back({lp + n, t});
    }
    if (rnn.w_ih.numel() > 0) {
      out.push_back({prefix + "rnn.w_ih", &rnn.w_ih});
      out.push_back({prefix + "rnn.b_ih", &rnn.b_ih});
      out.push_back({prefix + "rnn.w_hh", &rnn.w_hh});
      out.push_back({prefix + "rnn.b_hh", &rnn.b_hh});
    }
  }
};

template <typename T>
struct EncoderOutput {
  Var<T> hidden;  // [N, D_E]; row 0 is h_1
};

/// Table lookup, plus the matching position rows when `positions` is valid.
template <typename T>
Var<T> embed(std::span<const int> token_ids, Var<T> table, Var<T> positions = {}) {
  Var<T> x = gather_rows(table, token_ids);
  if (!positions.valid()) return x;
  detail::check(positions.rank() == 2 && positions.dim(0) >= token_ids.size(), Errc::shape,
                "embed: position table ", to_string(positions.dims()), " too short for ", token_ids.size(),
                " tokens");
  if (positions.dim(0) != token_ids.size()) positions = slice_rows(positions, 0, token_ids.size());
  return add(x, positions);
}

/// Additive attention mask [N, N]: 0 for real key columns, a large negative
/// value for [PAD] key columns so their attention weight is exactly zero.
template <typename T>
Var<T> key_padding_mask(Tape<T>& tape, std::span<const int> token_ids) {
  const std::size_t n = token_ids.size();
  std::vector<T> m(n * n, T{0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (token_ids[j] == Vocabulary::kPad) m[i * n + j] = T(-1e9);
  return tape.constant({n, n}, std::move(m));
}

template <typename T>
Var<T> multi_head_attention(Var<T> x, TransformerLayerParams<T>& L, Var<T> mask, std::size_t heads, double dropout_p,
                            Mode mode, Rng* rng) {
  Tape<T>& tape = *x.tape;
  const std::size_t d = x.dim(1);
  const std::size_t dh = d / heads;
  Var<T> q = affine(x, tape.param(L.wq), tape.param(L.bq));
  Var<T> k = affine(x, tape.param(L.wk));
  Var<T> v = affine(x, tape.param(L.wv), tape.param(L.bv));
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));
  Var<T> merged;
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
    Var<T> kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
    Var<T> vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
    Var<T> scores = add(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    Var<T> probs = dropout(softmax(scores), dropout_p, mode, rng);
    Var<T> out = matmul(probs, vh);
    merged = h == 0 ? out : concat_last(merged, out);
  }
  return affine(merged, tape.param(L.wo), tape.param(L.bo));
}

/// One encoder stack over x[N, D_E].
///
/// Default wiring: a = MHA(x); out = LN(a + Dropout(FFN(a))).
/// With standard_pre_norm: a = LN1(x + Dropout(MHA(x))); out = LN2(a + Dropout(FFN(a))).
/// FFN is dense(ffn_dim, GELU) followed by dense(D_E).
template <typename T>
Var<T> transformer_layer(Var<T> x, TransformerLayerParams<T>& L, Var<T> mask, const EncoderConfig& cfg, Mode mode,
                         Rng* rng) {
  Tape<T>& tape = *x.tape;
  detail::check(x.rank() == 2 && x.dim(1) == cfg.hidden && L.wq.dims() == Shape{cfg.hidden, cfg.hidden},
                Errc::shape, "transformer_layer: input ", to_string(x.dims()), " vs hidden size ", cfg.hidden);
  Var<T> attn = multi_head_attention(x, L, mask, cfg.heads, cfg.dropout, mode, rng);
  Var<T> a = attn;
  if (cfg.standard_pre_norm) {
    a = layer_norm(add(x, dropout(attn, cfg.dropout, mode, rng)), tape.param(L.ln1_g), tape.param(L.ln1_b));
  }
  Var<T> ffn = affine(gelu(affine(a, tape.param(L.w1), tape.param(L.b1))), tape.param(L.w2), tape.param(L.b2));
  ffn = dropout(ffn, cfg.dropout, mode, rng);
  if (cfg.standard_pre_norm) return layer_norm(add(a, ffn), tape.param(L.ln2_g), tape.param(L.ln2_b));
  return layer_norm(add(a, ffn), tape.param(L.ln1_g), tape.param(L.ln1_b));
}

/// Single-layer unidirectional LSTM or GRU from zero initial state; one
/// output row per input row.
template <typename T>
Var<T> recurrent_encode(Var<T> x, EncoderKind kind, RecurrentParams<T>& p) {
  Tape<T>& tape = *x.tape;
  detail::check(kind == EncoderKind::lstm || kind == EncoderKind::gru, Errc::usage,
                "recurrent_encode: kind must be lstm or gru");
  const std::size_t gates = kind == EncoderKind::lstm ? 4 : 3;
  detail::check(p.w_hh.rank() == 2 && p.w_hh.dim(0) % gates == 0, Errc::shape,
                "recurrent_encode: parameters do not match kind ", to_string(kind));
  const std::size_t h = p.w_hh.dim(1);
  detail::check(x.rank() == 2 && p.w_ih.dim(0) == gates * h && p.w_ih.dim(1) == x.dim(1), Errc::shape,
                "recurrent_encode: input ", to_string(x.dims()), " vs w_ih ", to_string(p.w_ih.dims()));
  const std::size_t n = x.dim(0);
  Var<T> w_hh = tape.param(p.w_hh), b_hh = tape.param(p.b_hh);
  Var<T> xproj = affine(x, tape.param(p.w_ih), tape.param(p.b_ih));
  Var<T> state = tape.constant({h}, std::vector<T>(h, T{0}));
  Var<T> cell = state;
  std::vector<Var<T>> outputs;
  outputs.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Var<T> gx = row(xproj, t);
    Var<T> gh = affine(state, w_hh, b_hh);
    if (kind == EncoderKind::lstm) {
      Var<T> g = add(gx, gh);
      Var<T> in = sigmoid(slice_cols(g, 0, h));
      Var<T> forget = sigmoid(slice_cols(g, h, h));
      Var<T> cand = tanh(slice_cols(g, 2 * h, h));
      Var<T> out = sigmoid(slice_cols(g, 3 * h, h));
      cell = add(mul(forget, cell), mul(in, cand));
      state = mul(out, tanh(cell));
    } else {
      Var<T> r = sigmoid(add(slice_cols(gx, 0, h), slice_cols(gh, 0, h)));
      Var<T> z = sigmoid(add(slice_cols(gx, h, h), slice_cols(gh, h, h)));
      Var<T> cand = tanh(add(slice_cols(gx, 2 * h, h), mul(r, slice_cols(gh, 2 * h, h))));
      state = add(mul(one_minus(z), cand), mul(z, state));
    }
    outputs.push_back(state);
  }
  return stack_rows<T>(outputs);
}

/// Hidden states for one example. Train mode applies dropout (inside the
/// transformer and on the final output); eval mode is deterministic.
template <typename T>
EncoderOutput<T> encode(Tape<T>& tape, std::span<const int> token_ids, const EncoderConfig& cfg,
                        EncoderParams<T>& params, Mode mode, Rng* rng) {
  detail::check(token_ids.size() == cfg.seq_len, Errc::shape, "encode: ", token_ids.size(),
                " token ids for max_seq_len ", cfg.seq_len);
  Var<T> table = tape.param(params.embedding);
  Var<T> h;
  switch (cfg.kind) {
    case EncoderKind::transformer: {
      detail::check(params.layers.size() == cfg.stacks, Errc::shape, "encode: ", params.layers.size(),
                    " layers for ", cfg.stacks, " stacks");
      h = embed(token_ids, table, tape.param(params.position));
      Var<T> mask = key_padding_mask(tape, token_ids);
      for (auto& layer : params.layers) h = transformer_layer(h, layer, mask, cfg, mode, rng);
      break;
    }
    case EncoderKind::lstm:
    case EncoderKind::gru:
      h = recurrent_encode(embed(token_ids, table), cfg.kind, params.rnn);
      break;
    default:
      detail::fail(Errc::config, "unknown encoder kind");
  }
  return {dropout(h, cfg.dropout, mode, rng)};
}

/// Overwrites embedding rows from a text file of `token v_1 .. v_D` lines
/// (an optional word2vec-style "count dim" header line is skipped). Rows of
/// tokens absent from the file keep their values. Returns the fraction of
/// non-reserved vocabulary entries that were found.
template <typename T>
double load_pretrained_embeddings(const std::filesystem::path& file, const Vocabulary& vocab, Tensor<T>& table) {
  detail::check(table.rank() == 2 && table.dim(0) == vocab.size(), Errc::shape, "embedding table ",
                to_string(table.dims()), " does not match vocabulary of ", vocab.size());
  std::ifstream in(file);
  detail::check(in.good(), Errc::io, "cannot read embedding file ", file.string());
  const std::size_t d = table.dim(1);
  std::vector<bool> covered(vocab.size(), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (lineno == 1 && fields.size() == 2 && d != 1 &&
        fields[0].find_first_not_of("0123456789") == std::string::npos &&
        fields[1].find_first_not_of("0123456789") == std::string::npos)
      continue;
    detail::check(fields.size() == d + 1, Errc::data, file.string(), ":", lineno, ": expected ", d,
                  " values after the token, got ", fields.size() - 1);
    std::vector<T> values(d);
    for (std::size_t i = 0; i < d; ++i) {
      const std::string& f = fields[i + 1];
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      detail::check(res.ec == std::errc() && res.ptr == f.data() + f.size(), Errc::data, file.string(), ":", lineno,
                    ": '", f, "' is not a number");
      values[i] = static_cast<T>(v);
    }
    auto id = vocab.find(fields[0]);
    if (!id || static_cast<std::size_t>(*id) < vocab.reserved()) continue;
    std::copy(values.begin(), values.end(), table.data().begin() + static_cast<long>(static_cast<std::size_t>(*id) * d));
    covered[static_cast<std::size_t>(*id)] = true;
  }
  const std::size_t words = vocab.size() - vocab.reserved();
  if (words == 0) return 0.0;
  return static_cast<double>(std::count(covered.begin(), covered.end(), true)) / static_cast<double>(words);
}

}  // namespace bnlu
