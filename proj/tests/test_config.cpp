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
#include <sstream>

#include "test_util.hpp"

namespace bnlu {
namespace {

using testing::error_code_of;

TEST(RunConfig, DefaultsFollowTheTrainingProtocol) {
  const RunConfig c;
  EXPECT_EQ(c.train.lr, 5e-5);
  EXPECT_EQ(c.train.epochs, 10u);
  EXPECT_EQ(c.train.beta1, 0.9);
  EXPECT_EQ(c.train.beta2, 0.999);
  EXPECT_EQ(c.train.adam_eps, 1e-8);
  EXPECT_EQ(c.model.encoder.dropout, 0.1);
  EXPECT_EQ(c.model.init_std, 0.02);
  EXPECT_EQ(c.model.encoder.seq_len, 50u);
  EXPECT_EQ(c.model.encoder.kind, EncoderKind::transformer);
  EXPECT_FALSE(c.model.encoder.standard_pre_norm);
  EXPECT_FALSE(c.model.detach_links);
  EXPECT_FALSE(c.model.tie_positions);
  EXPECT_TRUE(c.model.bidirectional);
  EXPECT_FALSE(c.train.loss_include_pad);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, TextRoundTrip) {
  RunConfig c;
  c.apply_overrides("encoder=gru hidden_size=24 heads=3 dropout=0.25 lr=0.0013 seed=99 tie_positions=true");
  c.embedding_file = "/tmp/vectors.txt";
  c.model.init_std = 0.1 + 0.2;  // not exactly representable as a short decimal
  const RunConfig back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.model.encoder.kind, EncoderKind::gru);
  EXPECT_EQ(back.get("hidden_size"), "24");
}

TEST(RunConfig, EveryKeyIsWritten) {
  const std::string text = RunConfig{}.to_text();
  for (const auto& k : RunConfig::keys()) EXPECT_NE(text.find(k + "="), std::string::npos) << k;
}

TEST(RunConfig, CommentsAndBlankLines) {
  const RunConfig c = RunConfig::parse("# header\n\n  epochs = 3   # trailing\nencoder=lstm\n");
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.model.encoder.kind, EncoderKind::lstm);
}

TEST(RunConfig, ErrorsNameTheLine) {
  try {
    RunConfig::parse("epochs=3\nlr=fast\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code_of([] { RunConfig::parse("nonsense_key=1\n"); }), Errc::config);
  EXPECT_EQ(error_code_of([] { RunConfig::parse("epochs\n"); }), Errc::config);
  EXPECT_EQ(error_code_of([] { RunConfig::parse("epochs=-1\n"); }), Errc::config);
  EXPECT_EQ(error_code_of([] { RunConfig::parse("bidirectional=maybe\n"); }), Errc::config);
  EXPECT_EQ(error_code_of([] { RunConfig::parse("encoder=cnn\n"); }), Errc::config);
  EXPECT_EQ(error_code_of([] { RunConfig().apply_overrides("epochs"); }), Errc::config);
}

TEST(RunConfig, Validation) {
  auto invalid = [](const std::string& overrides) {
    RunConfig c;
    c.apply_overrides(overrides);
    return error_code_of([&] { c.validate(); });
  };
  EXPECT_EQ(invalid("epochs=0"), Errc::config);
  EXPECT_EQ(invalid("lr=0"), Errc::config);
  EXPECT_EQ(invalid("max_seq_len=2"), Errc::config);
  EXPECT_EQ(invalid("hidden_size=10 heads=4"), Errc::config);
  EXPECT_EQ(invalid("dropout=1"), Errc::config);
  EXPECT_EQ(invalid("batch_size=0"), Errc::config);
  EXPECT_EQ(invalid("init_std=0"), Errc::config);
  RunConfig rnn;
  rnn.apply_overrides("encoder=lstm hidden_size=10 heads=4");
  EXPECT_NO_THROW(rnn.validate());
}

TEST(RunConfig, LoadFromFile) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "a.cfg") << "epochs=7\n";
  EXPECT_EQ(RunConfig::load(dir.path() / "a.cfg").train.epochs, 7u);
  EXPECT_EQ(error_code_of([&] { RunConfig::load(dir.path() / "missing.cfg"); }), Errc::io);
}

}  // namespace
}  // namespace bnlu
