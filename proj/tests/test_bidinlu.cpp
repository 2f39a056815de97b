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


#include <cmath>

#include "test_util.hpp"

namespace bnlu {
namespace {

using testing::check_op;
using testing::error_code_of;
using testing::random_tensor;
using testing::tiny_model_config;
using Vars = std::vector<Var<double>>;

constexpr HeadDims kDims{6, 3, 4, 5};  // D_E, D_IP, D_SP, N

std::vector<double> vec(Var<double> v) { return {v.value().begin(), v.value().end()}; }

// Independent softmax(W x + b) over plain vectors.
std::vector<double> affine_softmax(const double* w, const double* b, const std::vector<double>& x, std::size_t out) {
  std::vector<double> z(out);
  for (std::size_t o = 0; o < out; ++o) {
    z[o] = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) z[o] += w[o * x.size() + i] * x[i];
  }
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (auto& v : z) s += (v = std::exp(v - m));
  for (auto& v : z) v /= s;
  return z;
}

struct Fixture {
  Rng rng{21};
  HeadParams<double> p = HeadParams<double>::init(kDims, 0.5, rng);
  Tensor<double> hidden = random_tensor({kDims.seq_len, kDims.hidden}, rng, 1.0, false);

  std::vector<double> hidden_row(std::size_t r) const {
    return {hidden.data().begin() + static_cast<long>(r * kDims.hidden),
            hidden.data().begin() + static_cast<long>((r + 1) * kDims.hidden)};
  }
};

ModelConfig head_model_config() {
  ModelConfig mc;
  mc.encoder.hidden = kDims.hidden;
  mc.encoder.seq_len = kDims.seq_len;
  mc.encoder.heads = 1;
  mc.num_intents = kDims.intents;
  mc.num_slot_labels = kDims.slot_labels;
  mc.vocab_size = 10;
  return mc;
}

TEST(IntentProbe, ZeroWeightsGiveUniform) {
  Fixture f;
  std::fill(f.p.w_i.data().begin(), f.p.w_i.data().end(), 0.0);
  std::fill(f.p.b_i.data().begin(), f.p.b_i.data().end(), 0.0);
  Tape<double> t;
  for (double v : vec(intent_probe(row(t.constant(f.hidden), 0), f.p))) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(IntentProbe, MatchesOracle) {
  Fixture f;
  Tape<double> t;
  const auto got = vec(intent_probe(row(t.constant(f.hidden), 0), f.p));
  const auto want = affine_softmax(f.p.w_i.data().data(), f.p.b_i.data().data(), f.hidden_row(0), kDims.intents);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(BroadcastIntent, Rows) {
  Tape<double> t;
  Var<double> p = t.constant({3}, {0.2, 0.3, 0.5});
  EXPECT_EQ(vec(broadcast_intent(p, 2)), vec(p));
  Var<double> b = broadcast_intent(p, 5);
  EXPECT_EQ(b.dims(), (Shape{4, 3}));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(b.value()[r * 3 + j], p.value()[j]);
  EXPECT_EQ(error_code_of([&] { broadcast_intent(p, 1); }), Errc::usage);
  Rng rng(22);
  auto x = random_tensor({3}, rng);
  EXPECT_LT(check_op({&x}, [](Tape<double>&, Vars& v) { return broadcast_intent(v[0], 6); }).max_rel_error, 1e-4);
}

TEST(Intent2Slot, OracleAndShape) {
  Fixture f;
  Tape<double> t;
  Var<double> h = t.constant(f.hidden);
  Var<double> states = slice_rows(h, 1, kDims.seq_len - 1);
  Var<double> pi = intent_probe(row(h, 0), f.p);
  Var<double> s = intent2slot_logits(states, broadcast_intent(pi, kDims.seq_len), f.p);
  ASSERT_EQ(s.dims(), (Shape{kDims.seq_len - 1, kDims.slot_labels}));
  const std::size_t in = kDims.hidden + kDims.intents;
  for (std::size_t n = 0; n < kDims.seq_len - 1; ++n) {
    auto x = f.hidden_row(n + 1);
    x.insert(x.end(), pi.value().begin(), pi.value().end());
    for (std::size_t o = 0; o < kDims.slot_labels; ++o) {
      double acc = f.p.m_s[n * kDims.slot_labels + o];
      for (std::size_t i = 0; i < in; ++i) acc += f.p.v_s[(n * kDims.slot_labels + o) * in + i] * x[i];
      EXPECT_NEAR(s.value()[n * kDims.slot_labels + o], acc, 1e-13);
    }
  }
}

TEST(Intent2Slot, ZeroCouplingColumnsIgnoreIntent) {
  Fixture f;
  const std::size_t in = kDims.hidden + kDims.intents;
  for (std::size_t r = 0; r < f.p.v_s.numel() / in; ++r)
    for (std::size_t c = kDims.hidden; c < in; ++c) f.p.v_s[r * in + c] = 0.0;
  Tape<double> t;
  Var<double> states = slice_rows(t.constant(f.hidden), 1, kDims.seq_len - 1);
  const auto a = vec(intent2slot_logits(states, broadcast_intent(t.constant({3}, {1.0, 0.0, 0.0}), 5), f.p));
  const auto b = vec(intent2slot_logits(states, broadcast_intent(t.constant({3}, {0.1, 0.1, 0.8}), 5), f.p));
  EXPECT_EQ(a, b);
}

TEST(Intent2Slot, PositionsAreUntied) {
  Fixture f;
  Tensor<double> same({kDims.seq_len, kDims.hidden});
  for (std::size_t r = 0; r < kDims.seq_len; ++r)
    for (std::size_t j = 0; j < kDims.hidden; ++j) same[r * kDims.hidden + j] = f.hidden[j];
  Tape<double> t;
  Var<double> states = slice_rows(t.constant(same), 1, kDims.seq_len - 1);
  Var<double> s = intent2slot_logits(states, broadcast_intent(t.constant({3}, {0.2, 0.3, 0.5}), 5), f.p);
  const auto v = vec(s);
  EXPECT_FALSE(std::equal(v.begin(), v.begin() + 4, v.begin() + 4));

  HeadDims tied = kDims;
  tied.tie_positions = true;
  Rng rng(23);
  auto pt = HeadParams<double>::init(tied, 0.5, rng);
  EXPECT_EQ(pt.v_s.dim(0), 1u);
  const auto w = vec(intent2slot_logits(states, broadcast_intent(t.constant({3}, {0.2, 0.3, 0.5}), 5), pt));
  for (std::size_t n = 1; n < 4; ++n) EXPECT_TRUE(std::equal(w.begin(), w.begin() + 4, w.begin() + 4 * n));
}

TEST(PredictSlots, UniformAndOracle) {
  Tape<double> t;
  auto [probs, pred] = predict_slots(t.constant({2, 3}, std::vector<double>(6, 0.7)));
  EXPECT_EQ(pred, (std::vector<int>{0, 0}));
  Rng rng(24);
  auto logits = random_tensor({7, 5}, rng, 2.0, false);
  auto [p2, pred2] = predict_slots(t.constant(logits));
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0;
    std::size_t best = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      s += p2.value()[r * 5 + j];
      if (logits[r * 5 + j] > logits[r * 5 + best]) best = j;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(pred2[r], static_cast<int>(best));
  }
}

TEST(SlotProbe, ZeroWeightsUniformAndOracle) {
  Fixture f;
  Tape<double> t;
  Var<double> states = slice_rows(t.constant(f.hidden), 1, kDims.seq_len - 1);
  Var<double> ps = slot_probe(states, f.p);
  ASSERT_EQ(ps.dims(), (Shape{4, 4}));
  for (std::size_t n = 0; n < 4; ++n) {
    const auto want = affine_softmax(f.p.w_s.data().data() + n * kDims.slot_labels * kDims.hidden,
                                     f.p.b_s.data().data() + n * kDims.slot_labels, f.hidden_row(n + 1), 4);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(ps.value()[n * 4 + j], want[j], 1e-14);
  }
  std::fill(f.p.w_s.data().begin(), f.p.w_s.data().end(), 0.0);
  std::fill(f.p.b_s.data().begin(), f.p.b_s.data().end(), 0.0);
  for (double v : vec(slot_probe(states, f.p))) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Slot2Intent, OracleAndFlattenedLength) {
  Fixture f;
  Tape<double> t;
  Var<double> h = t.constant(f.hidden);
  Var<double> flat = flatten(slot_probe(slice_rows(h, 1, kDims.seq_len - 1), f.p));
  EXPECT_EQ(flat.numel(), kDims.slot_labels * (kDims.seq_len - 1));
  EXPECT_EQ(f.p.v_i.dim(1), kDims.hidden + kDims.slot_labels * (kDims.seq_len - 1));
  auto [probs, pred] = slot2intent_predict(row(h, 0), flat, f.p);
  auto x = f.hidden_row(0);
  x.insert(x.end(), flat.value().begin(), flat.value().end());
  const auto want = affine_softmax(f.p.v_i.data().data(), f.p.m_i.data().data(), x, kDims.intents);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(probs.value()[i], want[i], 1e-14);
  EXPECT_EQ(static_cast<std::size_t>(pred), argmax(std::span<const double>(want)));
}

TEST(Slot2Intent, ZeroCouplingColumnsGiveClassifierOnH1) {
  Fixture f;
  const std::size_t in = f.p.v_i.dim(1);
  for (std::size_t r = 0; r < kDims.intents; ++r)
    for (std::size_t c = kDims.hidden; c < in; ++c) f.p.v_i[r * in + c] = 0.0;
  Tape<double> t;
  Var<double> h1 = row(t.constant(f.hidden), 0);
  const std::size_t flat_len = in - kDims.hidden;
  Rng rng(25);
  auto a = slot2intent_predict(h1, t.constant(random_tensor({flat_len}, rng, 1.0, false)), f.p).first;
  auto b = slot2intent_predict(h1, t.constant(random_tensor({flat_len}, rng, 1.0, false)), f.p).first;
  EXPECT_EQ(vec(a), vec(b));
  std::vector<double> w_h1(kDims.intents * kDims.hidden);
  for (std::size_t r = 0; r < kDims.intents; ++r)
    for (std::size_t c = 0; c < kDims.hidden; ++c) w_h1[r * kDims.hidden + c] = f.p.v_i[r * in + c];
  const auto want = affine_softmax(w_h1.data(), f.p.m_i.data().data(), f.hidden_row(0), kDims.intents);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(a.value()[i], want[i], 1e-14);
}

// ---------------------------------------------------------------- full heads

ForwardOutput<double> run_heads(Fixture& f, const ModelConfig& mc, Tape<double>& t) {
  return heads_forward(t.constant(f.hidden), f.p, mc);
}

TEST(Heads, NormalizedAndConsistent) {
  const ModelConfig mc = head_model_config();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Fixture f;
    f.rng = Rng(seed);
    f.p = HeadParams<double>::init(kDims, 1.0, f.rng);
    f.hidden.fill_normal(f.rng, 3.0);
    Tape<double> t;
    auto fo = run_heads(f, mc, t);
    auto row_sums_ok = [](Var<double> p) {
      const std::size_t k = p.dims().back(), rows = p.numel() / k;
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < k; ++j) s += p.value()[r * k + j];
        if (std::abs(s - 1.0) > 1e-6) return false;
      }
      return true;
    };
    EXPECT_TRUE(row_sums_ok(fo.initial_intent_probs));
    EXPECT_TRUE(row_sums_ok(fo.slot_probs));
    EXPECT_TRUE(row_sums_ok(fo.probe_probs));
    EXPECT_TRUE(row_sums_ok(fo.intent_probs));
    EXPECT_EQ(fo.slot_pred, row_argmax(fo.slot_probs));
    EXPECT_EQ(static_cast<std::size_t>(fo.intent_pred), argmax(fo.intent_probs.value()));
  }
}

TEST(Heads, CouplingIsLive) {
  const ModelConfig mc = head_model_config();
  Fixture f;
  Tape<double> t0;
  auto base = run_heads(f, mc, t0);
  Fixture g;
  g.p.w_i[0] += 0.5;
  Tape<double> t1;
  auto pert_wi = run_heads(g, mc, t1);
  EXPECT_NE(vec(base.slot_probs), vec(pert_wi.slot_probs));
  for (std::size_t n = 0; n < kDims.seq_len - 1; ++n) {
    Fixture h;
    h.p.w_s[n * kDims.slot_labels * kDims.hidden] += 0.5;
    Tape<double> t2;
    EXPECT_NE(vec(base.intent_probs), vec(run_heads(h, mc, t2).intent_probs)) << "W_S[" << n << "]";
  }
}

TEST(Heads, DecoupledWhenColumnsZeroed) {
  const ModelConfig mc = head_model_config();
  auto zero_coupling = [](Fixture& f) {
    const std::size_t in_s = kDims.hidden + kDims.intents;
    for (std::size_t r = 0; r < f.p.v_s.numel() / in_s; ++r)
      for (std::size_t c = kDims.hidden; c < in_s; ++c) f.p.v_s[r * in_s + c] = 0.0;
    const std::size_t in_i = f.p.v_i.dim(1);
    for (std::size_t r = 0; r < kDims.intents; ++r)
      for (std::size_t c = kDims.hidden; c < in_i; ++c) f.p.v_i[r * in_i + c] = 0.0;
  };
  Fixture f;
  zero_coupling(f);
  Tape<double> t0;
  auto base = run_heads(f, mc, t0);
  Fixture g;
  zero_coupling(g);
  for (std::size_t i = 0; i < g.p.w_i.numel(); ++i) g.p.w_i[i] += 0.1 * static_cast<double>(i % 5);
  for (std::size_t i = 0; i < g.p.w_s.numel(); ++i) g.p.w_s[i] -= 0.1 * static_cast<double>(i % 7);
  Tape<double> t1;
  auto pert = run_heads(g, mc, t1);
  EXPECT_EQ(vec(base.slot_probs), vec(pert.slot_probs));
  EXPECT_EQ(vec(base.intent_probs), vec(pert.intent_probs));
  EXPECT_NE(vec(base.probe_probs), vec(pert.probe_probs));
}

TEST(Heads, BidirectionalOffIgnoresProbes) {
  ModelConfig mc = head_model_config();
  mc.bidirectional = false;
  Fixture f;
  Tape<double> t0;
  auto base = run_heads(f, mc, t0);
  Fixture g;
  for (std::size_t i = 0; i < g.p.w_i.numel(); ++i) g.p.w_i[i] += 0.1 * static_cast<double>(i % 5);
  for (std::size_t i = 0; i < g.p.w_s.numel(); ++i) g.p.w_s[i] -= 0.1 * static_cast<double>(i % 7);
  Tape<double> t1;
  auto pert = run_heads(g, mc, t1);
  EXPECT_EQ(vec(base.slot_probs), vec(pert.slot_probs));
  EXPECT_EQ(vec(base.intent_probs), vec(pert.intent_probs));
}

TEST(Heads, GradientsReachBothProbesThroughLinks) {
  for (bool detach : {false, true}) {
    ModelConfig mc = head_model_config();
    mc.detach_links = detach;
    Fixture f;
    Tape<double> t;
    auto fo = run_heads(f, mc, t);
    // Loss reads only the final outputs, so W_I and W_S learn through the links alone.
    t.backward(add(cross_entropy(fo.intent_probs, 1), cross_entropy(row(fo.slot_probs, 2), 3)));
    double wi = 0, ws = 0;
    for (double g : f.p.w_i.grad()) wi += std::abs(g);
    for (double g : f.p.w_s.grad()) ws += std::abs(g);
    if (detach) {
      EXPECT_EQ(wi, 0.0);
      EXPECT_EQ(ws, 0.0);
    } else {
      EXPECT_GT(wi, 0.0);
      EXPECT_GT(ws, 0.0);
    }
  }
}

TEST(Heads, GradientsMatchFiniteDifferences) {
  const ModelConfig mc = head_model_config();
  Fixture f;
  auto h = f.hidden;
  h.set_requires_grad(true);
  std::vector<NamedParam<double>> params = {{"hidden", &h}};
  f.p.collect(params);
  auto build = [&](Tape<double>& t) {
    auto fo = heads_forward(t.param(h), f.p, mc);
    const int gold[] = {1, 2, 0, 3};
    const double w[] = {1, 1, 1, 0};
    return add(cross_entropy(fo.intent_probs, 2),
               nll_rows(fo.slot_probs, std::span<const int>(gold), std::span<const double>(w)));
  };
  auto r = finite_diff_check<double>(build, std::span<const NamedParam<double>>(params));
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Heads, WrongHiddenRows) {
  const ModelConfig mc = head_model_config();
  Fixture f;
  Tape<double> t;
  Rng rng(26);
  EXPECT_EQ(error_code_of([&] { heads_forward(t.constant(random_tensor({4, 6}, rng)), f.p, mc); }), Errc::shape);
}

}  // namespace
}  // namespace bnlu
