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


#include <fstream>

#include "test_util.hpp"

namespace bnlu {
namespace {

using testing::check_op;
using testing::error_code_of;
using testing::random_tensor;
using testing::tiny_model_config;
using Vars = std::vector<Var<double>>;

std::vector<int> padded_ids(std::initializer_list<int> words, std::size_t n) {
  std::vector<int> ids(n, Vocabulary::kPad);
  ids[0] = Vocabulary::kCls;
  std::size_t i = 1;
  for (int w : words) ids[i++] = w;
  ids[i] = Vocabulary::kSep;
  return ids;
}

std::vector<double> hidden_of(EncoderParams<double>& p, const EncoderConfig& cfg, std::span<const int> ids,
                              Mode mode = Mode::eval, Rng* rng = nullptr) {
  Tape<double> t(false);
  auto out = encode(t, ids, cfg, p, mode, rng);
  return {out.hidden.value().begin(), out.hidden.value().end()};
}

TEST(Embed, LookupPlusPosition) {
  Tensor<double> table({5, 2}, {0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
  Tensor<double> pos({3, 2}, {10, 20, 30, 40, 50, 60});
  const int ids[] = {4, 1, 4};
  Tape<double> t;
  Var<double> plain = embed<double>(ids, t.param(table));
  EXPECT_EQ(std::vector<double>(plain.value().begin(), plain.value().end()),
            (std::vector<double>{4, 4, 1, 1, 4, 4}));
  Var<double> e = embed<double>(ids, t.param(table), t.param(pos));
  EXPECT_EQ(std::vector<double>(e.value().begin(), e.value().end()),
            (std::vector<double>{14, 24, 31, 41, 54, 64}));
  // Equal ids at different positions differ by exactly the position rows.
  EXPECT_EQ(e.value()[4] - e.value()[0], pos[4] - pos[0]);
  const int bad[] = {5, 0, 0};
  EXPECT_EQ(error_code_of([&] { embed<double>(bad, t.param(table)); }), Errc::data);
}

TEST(Embed, RepeatedIdGradientAccumulates) {
  Rng rng(1);
  auto table = random_tensor({6, 3}, rng), pos = random_tensor({4, 3}, rng);
  const int ids[] = {2, 5, 2, 2};
  auto r = check_op({&table, &pos}, [&](Tape<double>&, Vars& v) { return embed<double>(ids, v[0], v[1]); });
  EXPECT_LT(r.max_rel_error, 1e-4);
}

class EncoderKinds : public ::testing::TestWithParam<EncoderKind> {};

TEST_P(EncoderKinds, ShapeIsStable) {
  for (std::size_t stacks : {1u, 2u, 3u}) {
    ModelConfig mc = tiny_model_config(GetParam());
    mc.encoder.stacks = stacks;
    Rng rng(2);
    auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, rng);
    const auto ids = padded_ids({5, 6, 7}, mc.encoder.seq_len);
    Tape<double> t;
    auto out = encode(t, ids, mc.encoder, p, Mode::train, &rng);
    EXPECT_EQ(out.hidden.dims(), (Shape{mc.encoder.seq_len, mc.encoder.hidden}));
  }
}

TEST_P(EncoderKinds, EvalIsDeterministicAndSeedFree) {
  ModelConfig mc = tiny_model_config(GetParam());
  Rng init(3);
  auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, init);
  const auto ids = padded_ids({4, 9, 4, 11}, mc.encoder.seq_len);
  Rng a(10), b(20);
  const auto h1 = hidden_of(p, mc.encoder, ids, Mode::eval, &a);
  EXPECT_EQ(h1, hidden_of(p, mc.encoder, ids, Mode::eval, &b));
  EXPECT_EQ(h1, hidden_of(p, mc.encoder, ids));
}

TEST_P(EncoderKinds, TrainModeAppliesDropout) {
  ModelConfig mc = tiny_model_config(GetParam());
  mc.encoder.dropout = 0.5;
  Rng init(4);
  auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, init);
  const auto ids = padded_ids({4, 9}, mc.encoder.seq_len);
  Rng a(1), b(1), c(2);
  const auto ta = hidden_of(p, mc.encoder, ids, Mode::train, &a);
  EXPECT_EQ(ta, hidden_of(p, mc.encoder, ids, Mode::train, &b));
  EXPECT_NE(ta, hidden_of(p, mc.encoder, ids, Mode::train, &c));
  EXPECT_NE(ta, hidden_of(p, mc.encoder, ids));
  EXPECT_EQ(error_code_of([&] { hidden_of(p, mc.encoder, ids, Mode::train, nullptr); }), Errc::usage);
}

TEST_P(EncoderKinds, WrongLengthRejected) {
  ModelConfig mc = tiny_model_config(GetParam());
  Rng init(5);
  auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, init);
  const auto ids = padded_ids({4}, mc.encoder.seq_len + 1);
  EXPECT_EQ(error_code_of([&] { hidden_of(p, mc.encoder, ids); }), Errc::shape);
}

INSTANTIATE_TEST_SUITE_P(All, EncoderKinds,
                         ::testing::Values(EncoderKind::transformer, EncoderKind::lstm, EncoderKind::gru),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Encoder, KindsHaveDistinctParameters) {
  ModelConfig lstm = tiny_model_config(EncoderKind::lstm), gru = tiny_model_config(EncoderKind::gru);
  Rng a(6), b(6);
  auto pl = EncoderParams<double>::init(lstm.encoder, lstm.vocab_size, 0.1, a);
  auto pg = EncoderParams<double>::init(gru.encoder, gru.vocab_size, 0.1, b);
  EXPECT_EQ(pl.rnn.w_ih.dim(0), 4 * lstm.encoder.hidden);
  EXPECT_EQ(pg.rnn.w_ih.dim(0), 3 * gru.encoder.hidden);
  const auto ids = padded_ids({5, 6}, lstm.encoder.seq_len);
  EXPECT_NE(hidden_of(pl, lstm.encoder, ids), hidden_of(pg, gru.encoder, ids));
}

TEST(Transformer, PadEmbeddingDoesNotReachRealRows) {
  for (bool standard : {false, true}) {
    ModelConfig mc = tiny_model_config();
    mc.encoder.standard_pre_norm = standard;
    Rng init(7);
    auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.3, init);
    const auto ids = padded_ids({5, 8, 9}, mc.encoder.seq_len);
    const auto before = hidden_of(p, mc.encoder, ids);
    const std::size_t d = mc.encoder.hidden;
    for (std::size_t j = 0; j < d; ++j) p.embedding[Vocabulary::kPad * d + j] += 3.0 * (j % 2 ? 1 : -1);
    const auto after = hidden_of(p, mc.encoder, ids);
    const std::size_t real_rows = 5;  // [CLS] w w w [SEP]
    for (std::size_t i = 0; i < real_rows * d; ++i) EXPECT_EQ(before[i], after[i]) << "standard=" << standard;
    bool pad_rows_changed = false;
    for (std::size_t i = real_rows * d; i < before.size(); ++i) pad_rows_changed |= before[i] != after[i];
    EXPECT_TRUE(pad_rows_changed);
  }
}

TEST(Transformer, StandardWiringHasSecondNorm) {
  ModelConfig mc = tiny_model_config();
  Rng a(8), b(8);
  auto single_residual = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, a);
  mc.encoder.standard_pre_norm = true;
  auto standard = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, b);
  std::vector<NamedParam<double>> np, ns;
  single_residual.collect(np);
  standard.collect(ns);
  EXPECT_EQ(ns.size(), np.size() + 2 * mc.encoder.stacks);
  const auto ids = padded_ids({5, 6}, mc.encoder.seq_len);
  EXPECT_NE(hidden_of(single_residual, tiny_model_config().encoder, ids), hidden_of(standard, mc.encoder, ids));
}

TEST(Transformer, LayerGradients) {
  for (bool standard : {false, true}) {
    EncoderConfig cfg = tiny_model_config().encoder;
    cfg.standard_pre_norm = standard;
    cfg.seq_len = 5;
    cfg.hidden = 4;
    cfg.ffn_dim = 6;
    Rng rng(9);
    auto p = EncoderParams<double>::init(cfg, 8, 0.5, rng);
    auto x = random_tensor({5, 4}, rng);
    auto& L = p.layers[0];
    std::vector<Tensor<double>*> inputs = {&x, &L.wq, &L.bq, &L.wk, &L.wv, &L.bv, &L.wo, &L.bo,
                                           &L.w1, &L.b1, &L.w2, &L.b2, &L.ln1_g, &L.ln1_b};
    if (standard) {
      inputs.push_back(&L.ln2_g);
      inputs.push_back(&L.ln2_b);
    }
    const auto ids = padded_ids({5, 6}, cfg.seq_len);
    auto r = check_op(inputs, [&](Tape<double>& t, Vars& v) {
      return transformer_layer(v[0], L, key_padding_mask<double>(t, ids), cfg, Mode::eval, nullptr);
    });
    EXPECT_LT(r.max_rel_error, 1e-4) << "standard=" << standard;
  }
}

TEST(Recurrent, ZeroWeightsGiveZeroStates) {
  for (EncoderKind kind : {EncoderKind::lstm, EncoderKind::gru}) {
    ModelConfig mc = tiny_model_config(kind);
    Rng rng(10);
    auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.02, rng);
    for (auto* t : {&p.rnn.w_ih, &p.rnn.b_ih, &p.rnn.w_hh, &p.rnn.b_hh}) std::fill(t->data().begin(), t->data().end(), 0.0);
    for (double v : hidden_of(p, mc.encoder, padded_ids({5, 6, 7}, mc.encoder.seq_len)))
      EXPECT_EQ(v, 0.0) << to_string(kind);
  }
}

TEST(Recurrent, FirstStateSeesOnlyFirstInput) {
  for (EncoderKind kind : {EncoderKind::lstm, EncoderKind::gru}) {
    ModelConfig mc = tiny_model_config(kind);
    Rng rng(11);
    auto p = EncoderParams<double>::init(mc.encoder, mc.vocab_size, 0.3, rng);
    const auto a = hidden_of(p, mc.encoder, padded_ids({5, 6}, mc.encoder.seq_len));
    const auto b = hidden_of(p, mc.encoder, padded_ids({9, 10, 11}, mc.encoder.seq_len));
    const std::size_t d = mc.encoder.hidden;
    EXPECT_TRUE(std::equal(a.begin(), a.begin() + static_cast<long>(d), b.begin()));
    EXPECT_FALSE(std::equal(a.begin() + static_cast<long>(d), a.begin() + static_cast<long>(2 * d),
                            b.begin() + static_cast<long>(d)));
  }
}

TEST(Recurrent, CellGradients) {
  for (EncoderKind kind : {EncoderKind::lstm, EncoderKind::gru}) {
    EncoderConfig cfg = tiny_model_config(kind).encoder;
    cfg.hidden = 3;
    Rng rng(12);
    auto p = EncoderParams<double>::init(cfg, 8, 0.5, rng);
    auto x = random_tensor({4, 3}, rng);
    for (auto* b : {&p.rnn.b_ih, &p.rnn.b_hh}) b->fill_normal(rng, 0.5);
    auto r = check_op({&x, &p.rnn.w_ih, &p.rnn.b_ih, &p.rnn.w_hh, &p.rnn.b_hh},
                      [&](Tape<double>&, Vars& v) { return recurrent_encode(v[0], kind, p.rnn); });
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(kind);
  }
}

TEST(Recurrent, KindMismatchRejected) {
  EncoderConfig cfg = tiny_model_config(EncoderKind::lstm).encoder;
  Rng rng(13);
  auto p = EncoderParams<double>::init(cfg, 8, 0.1, rng);
  Tape<double> t;
  Var<double> x = t.constant(random_tensor({3, cfg.hidden}, rng));
  EXPECT_EQ(error_code_of([&] { recurrent_encode(x, EncoderKind::gru, p.rnn); }), Errc::shape);
  EXPECT_EQ(error_code_of([&] { recurrent_encode(x, EncoderKind::transformer, p.rnn); }), Errc::usage);
}

class EmbeddingFile : public ::testing::Test {
 protected:
  void SetUp() override {
    vocab = build_vocabs(std::vector<Utterance>{{{"play", "westbam", "now"}, {"O", "B-a", "O"}, "X"}}).tokens;
    table = Tensor<double>({vocab.size(), 3});
    Rng rng(14);
    table.fill_normal(rng, 0.02);
    original = table;
  }
  std::filesystem::path write(const std::string& text) {
    auto p = dir.path() / "vectors.txt";
    std::ofstream(p) << text;
    return p;
  }
  testing::TempDir dir;
  Vocabulary vocab;
  Tensor<double> table, original;
};

TEST_F(EmbeddingFile, SingleRowReplaced) {
  const double coverage = load_pretrained_embeddings(write("play 0.1 0.2 0.3\nabsent 1 2 3\n"), vocab, table);
  EXPECT_DOUBLE_EQ(coverage, 1.0 / 3.0);
  const std::size_t play = static_cast<std::size_t>(vocab.id("play"));
  for (std::size_t r = 0; r < vocab.size(); ++r)
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = r == play ? 0.1 * static_cast<double>(j + 1) : original[r * 3 + j];
      EXPECT_DOUBLE_EQ(table[r * 3 + j], expect);
    }
}

TEST_F(EmbeddingFile, EmptyFileChangesNothing) {
  EXPECT_EQ(load_pretrained_embeddings(write(""), vocab, table), 0.0);
  EXPECT_EQ(std::vector<double>(table.data().begin(), table.data().end()),
            std::vector<double>(original.data().begin(), original.data().end()));
}

TEST_F(EmbeddingFile, HeaderLineSkipped) {
  EXPECT_DOUBLE_EQ(load_pretrained_embeddings(write("2 3\nplay 1 1 1\nnow 2 2 2\n"), vocab, table), 2.0 / 3.0);
}

TEST_F(EmbeddingFile, DimensionMismatchNamesLine) {
  try {
    load_pretrained_embeddings(write("play 1 1 1\nnow 2 2\n"), vocab, table);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::data);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code_of([&] { load_pretrained_embeddings(dir.path() / "missing.txt", vocab, table); }), Errc::io);
}

}  // namespace
}  // namespace bnlu
