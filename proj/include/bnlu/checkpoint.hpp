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

// Binary checkpoint. All integers are little-endian u32, strings are
// length-prefixed, values are IEEE float32:
//
//   "BNLU" | version | config text | token, slot, intent vocabularies
//   | record count | records (name, rank, dims..., values...)
//
// Records follow Model::parameters() order.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/model.hpp"
#include "bnlu/training.hpp"

namespace bnlu {

inline constexpr char kCheckpointMagic[4] = {'B', 'N', 'L', 'U'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  Vocabularies vocabs;
  Model<float> model;
};

namespace detail {

static_assert(std::numeric_limits<float>::is_iec559 && sizeof(float) == 4);

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string source) : in_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    check(in_.size() - pos_ >= n, Errc::checkpoint, source_, ": checkpoint is truncated or corrupt (needed ", n,
          " bytes at offset ", pos_, ")");
  }

  std::string in_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(Model<float>& model, const Vocabularies& vocabs, const RunConfig& config) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(config.to_text());
  for (const Vocabulary* v : {&vocabs.tokens, &vocabs.slots, &vocabs.intents}) {
    w.u32(static_cast<std::uint32_t>(v->size()));
    for (const auto& item : v->items()) w.str(item);
  }
  auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor->rank()));
    for (std::size_t d : p.tensor->dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float x : p.tensor->data()) w.f32(x);
  }
  return w.bytes();
}

/// Writes to `path`; on failure nothing is left behind.
inline void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const Vocabularies& vocabs,
                            const RunConfig& config) {
  const std::string bytes = serialize_checkpoint(model, vocabs, config);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    detail::check(out.good(), Errc::io, "cannot write checkpoint ", path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (out.good()) return;
  }
  std::error_code ec;
  std::filesystem::remove(path, ec);
  detail::fail(Errc::io, "failed writing checkpoint ", path.string());
}

inline Checkpoint deserialize_checkpoint(std::string bytes, const std::string& source = "<checkpoint>") {
  detail::ByteReader r(std::move(bytes), source);
  detail::check(r.raw(4) == std::string(kCheckpointMagic, 4), Errc::checkpoint, source,
                ": not a bnlu checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  detail::check(version == kCheckpointVersion, Errc::checkpoint, source, ": unsupported checkpoint version ", version);

  Checkpoint ck;
  try {
    ck.config = RunConfig::parse(r.str());
  } catch (const Error& e) {
    detail::fail(Errc::checkpoint, source, ": embedded config is invalid: ", e.what());
  }
  auto read_vocab = [&](VocabKind kind) {
    const std::uint32_t n = r.u32();
    std::vector<std::string> items;
    for (std::uint32_t i = 0; i < n; ++i) items.push_back(r.str());
    try {
      return Vocabulary::from_items(kind, items);
    } catch (const Error& e) {
      detail::fail(Errc::checkpoint, source, ": corrupt vocabulary: ", e.what());
    }
  };
  ck.vocabs.tokens = read_vocab(VocabKind::token);
  ck.vocabs.slots = read_vocab(VocabKind::slot);
  ck.vocabs.intents = read_vocab(VocabKind::intent);

  const ModelConfig mc = model_config_for(ck.config, ck.vocabs);
  try {
    mc.validate();
  } catch (const Error& e) {
    detail::fail(Errc::checkpoint, source, ": embedded config is invalid: ", e.what());
  }
  ck.model = Model<float>::skeleton(mc);
  auto params = ck.model.parameters();
  const std::uint32_t count = r.u32();
  detail::check(count == params.size(), Errc::checkpoint, source, ": dimension mismatch: checkpoint has ", count,
                " parameter arrays, model expects ", params.size());
  for (const auto& p : params) {
    const std::string name = r.str();
    detail::check(name == p.name, Errc::checkpoint, source, ": dimension mismatch: found parameter '", name,
                  "' where '", p.name, "' was expected");
    const std::uint32_t rank = r.u32();
    Shape dims;
    for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(r.u32());
    detail::check(dims == p.tensor->dims(), Errc::checkpoint, source, ": dimension mismatch for ", name, ": stored ",
                  to_string(dims), ", model expects ", to_string(p.tensor->dims()));
    for (float& x : p.tensor->data()) x = r.f32();
  }
  detail::check(r.done(), Errc::checkpoint, source, ": checkpoint is corrupt (trailing bytes)");
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::check(in.good(), Errc::io, "cannot read checkpoint ", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(std::move(ss).str(), path.string());
}

/// Loads and checks that the architecture matches `expected` (vocabulary
/// sizes come from the checkpoint itself).
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const RunConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const ModelConfig want = model_config_for(expected, ck.vocabs);
  Model<float> shape = Model<float>::skeleton(want);
  auto a = ck.model.parameters();
  auto b = shape.parameters();
  detail::check(a.size() == b.size(), Errc::checkpoint, path.string(), ": dimension mismatch: checkpoint has ",
                a.size(), " parameter arrays, config expects ", b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    detail::check(a[i].name == b[i].name && a[i].tensor->dims() == b[i].tensor->dims(), Errc::checkpoint,
                  path.string(), ": dimension mismatch for ", b[i].name, ": stored ", to_string(a[i].tensor->dims()),
                  ", config expects ", to_string(b[i].tensor->dims()));
  return ck;
}

}  // namespace bnlu
