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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bnlu/error.hpp"

namespace bnlu {

enum class EncoderKind { transformer, lstm, gru };

inline std::string_view to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::transformer: return "transformer";
    case EncoderKind::lstm: return "lstm";
    case EncoderKind::gru: return "gru";
  }
  return "?";
}

inline EncoderKind parse_encoder_kind(std::string_view s) {
  if (s == "transformer") return EncoderKind::transformer;
  if (s == "lstm") return EncoderKind::lstm;
  if (s == "gru") return EncoderKind::gru;
  detail::fail(Errc::config, "unknown encoder kind '", s, "' (expected transformer, lstm or gru)");
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::transformer;
  std::size_t hidden = 64;  // D_E
  std::size_t stacks = 2;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  double dropout = 0.1;
  std::size_t seq_len = 50;  // N, including [CLS] and [SEP]
  // false: one residual (attention output + FFN output) and one layer norm
  // per stack. true: two residual + layer-norm sublayers as in BERT.
  bool standard_pre_norm = false;

  void validate() const {
    detail::check(hidden >= 1 && stacks >= 1 && heads >= 1 && ffn_dim >= 1, Errc::config,
                  "encoder sizes must be >= 1");
    detail::check(kind != EncoderKind::transformer || hidden % heads == 0, Errc::config, "hidden_size ", hidden,
                  " is not divisible by heads ", heads);
    detail::check(dropout >= 0.0 && dropout < 1.0, Errc::config, "dropout must be in [0,1), got ", dropout);
    detail::check(seq_len >= 3, Errc::config, "max_seq_len must be >= 3, got ", seq_len);
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t vocab_size = 0;       // token vocabulary incl. reserved ids
  std::size_t num_intents = 0;      // D_IP
  std::size_t num_slot_labels = 0;  // D_SP incl. the padding label
  double init_std = 0.02;
  bool tie_positions = false;  // share one slot classifier across positions
  bool detach_links = false;   // stop gradients through P_I and flattened P_S
  bool bidirectional = true;   // false: heads read hidden states only

  void validate() const {
    encoder.validate();
    detail::check(vocab_size >= 5 && num_intents >= 1 && num_slot_labels >= 2, Errc::config,
                  "model needs a vocabulary (got vocab=", vocab_size, " intents=", num_intents,
                  " slot labels=", num_slot_labels, ")");
    detail::check(init_std > 0.0, Errc::config, "init_std must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  double lr = 5e-5;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool loss_include_pad = false;  // true: sum the slot loss over all N-1 positions

  void validate() const {
    detail::check(lr > 0.0, Errc::config, "lr must be positive");
    detail::check(epochs >= 1, Errc::config, "epochs must be >= 1");
    detail::check(batch_size >= 1, Errc::config, "batch_size must be >= 1");
    detail::check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, Errc::config,
                  "adam betas must be in [0,1)");
    detail::check(adam_eps > 0.0, Errc::config, "adam_eps must be positive");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view key, std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  check(res.ec == std::errc() && res.ptr == s.data() + s.size(), Errc::config, key, ": '", s, "' is not a number");
  return v;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  check(res.ec == std::errc() && res.ptr == s.data() + s.size(), Errc::config, key, ": '", s,
        "' is not a non-negative integer");
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(Errc::config, key, ": '", s, "' is not a boolean (true/false)");
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Everything a run needs, as a flat key=value file. Unknown keys are
/// rejected; keys left out keep their defaults. to_text() writes every key
/// and its output parses back to an equal RunConfig.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string embedding_file;  // empty: randomly initialized embeddings
  bool strict_bio = false;     // metrics: drop I- tags with no open span
  // Label inventory sizes for gradcheck, which runs without a dataset.
  std::size_t gradcheck_vocab = 12;
  std::size_t gradcheck_intents = 3;
  std::size_t gradcheck_slots = 5;

  void set(std::string_view key, std::string_view value) {
    for (const auto& e : entries())
      if (e.key == key) {
        e.set(*this, value);
        return;
      }
    detail::fail(Errc::config, "unknown config key '", key, "'");
  }

  std::string get(std::string_view key) const {
    for (const auto& e : entries())
      if (e.key == key) return e.get(*this);
    detail::fail(Errc::config, "unknown config key '", key, "'");
  }

  static std::vector<std::string> keys() {
    std::vector<std::string> out;
    for (const auto& e : entries()) out.emplace_back(e.key);
    return out;
  }

  /// Applies `key=value` lines; '#' starts a comment.
  void apply(std::istream& in, std::string_view source = "<config>") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view s = line;
      if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
      s = detail::trim(s);
      if (s.empty()) continue;
      const auto eq = s.find('=');
      detail::check(eq != std::string_view::npos, Errc::config, source, ":", lineno, ": expected key=value");
      try {
        set(detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
      } catch (const Error& e) {
        std::string_view msg = e.what();
        if (auto colon = msg.find(": "); colon != std::string_view::npos) msg = msg.substr(colon + 2);
        detail::fail(Errc::config, source, ":", lineno, ": ", msg);
      }
    }
  }

  /// Applies whitespace-separated `key=value` overrides from one line.
  void apply_overrides(std::string_view line) {
    std::istringstream is{std::string(line)};
    std::string item;
    while (is >> item) {
      const auto eq = item.find('=');
      detail::check(eq != std::string::npos, Errc::config, "override '", item, "' is not key=value");
      set(std::string_view(item).substr(0, eq), std::string_view(item).substr(eq + 1));
    }
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::check(in.good(), Errc::io, "cannot read config ", path.string());
    RunConfig c;
    c.apply(in, path.string());
    return c;
  }

  static RunConfig parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    RunConfig c;
    c.apply(in);
    return c;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& e : entries()) out += std::string(e.key) + "=" + e.get(*this) + "\n";
    return out;
  }

  void validate() const {
    model.encoder.validate();
    train.validate();
    detail::check(model.init_std > 0.0, Errc::config, "init_std must be positive");
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  struct Entry {
    std::string_view key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
  };

  static const std::vector<Entry>& entries() {
    using detail::format_double;
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_uint;
    auto size_entry = [](std::string_view key, auto member) {
      return Entry{key, [=](RunConfig& c, std::string_view v) { member(c) = parse_uint(key, v); },
                   [=](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
    };
    auto double_entry = [](std::string_view key, auto member) {
      return Entry{key, [=](RunConfig& c, std::string_view v) { member(c) = parse_double(key, v); },
                   [=](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
    };
    auto bool_entry = [](std::string_view key, auto member) {
      return Entry{key, [=](RunConfig& c, std::string_view v) { member(c) = parse_bool(key, v); },
                   [=](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
    };
    static const std::vector<Entry> table = {
        Entry{"encoder", [](RunConfig& c, std::string_view v) { c.model.encoder.kind = parse_encoder_kind(v); },
              [](const RunConfig& c) { return std::string(to_string(c.model.encoder.kind)); }},
        size_entry("hidden_size", [](RunConfig& c) -> std::size_t& { return c.model.encoder.hidden; }),
        size_entry("stacks", [](RunConfig& c) -> std::size_t& { return c.model.encoder.stacks; }),
        size_entry("heads", [](RunConfig& c) -> std::size_t& { return c.model.encoder.heads; }),
        size_entry("ffn_dim", [](RunConfig& c) -> std::size_t& { return c.model.encoder.ffn_dim; }),
        double_entry("dropout", [](RunConfig& c) -> double& { return c.model.encoder.dropout; }),
        size_entry("max_seq_len", [](RunConfig& c) -> std::size_t& { return c.model.encoder.seq_len; }),
        bool_entry("standard_pre_norm", [](RunConfig& c) -> bool& { return c.model.encoder.standard_pre_norm; }),
        double_entry("init_std", [](RunConfig& c) -> double& { return c.model.init_std; }),
        bool_entry("tie_positions", [](RunConfig& c) -> bool& { return c.model.tie_positions; }),
        bool_entry("detach_links", [](RunConfig& c) -> bool& { return c.model.detach_links; }),
        bool_entry("bidirectional", [](RunConfig& c) -> bool& { return c.model.bidirectional; }),
        Entry{"embedding_file", [](RunConfig& c, std::string_view v) { c.embedding_file = std::string(v); },
              [](const RunConfig& c) { return c.embedding_file; }},
        double_entry("lr", [](RunConfig& c) -> double& { return c.train.lr; }),
        size_entry("epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }),
        size_entry("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }),
        size_entry("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
        double_entry("adam_beta1", [](RunConfig& c) -> double& { return c.train.beta1; }),
        double_entry("adam_beta2", [](RunConfig& c) -> double& { return c.train.beta2; }),
        double_entry("adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; }),
        bool_entry("loss_include_pad", [](RunConfig& c) -> bool& { return c.train.loss_include_pad; }),
        bool_entry("strict_bio", [](RunConfig& c) -> bool& { return c.strict_bio; }),
        size_entry("gradcheck_vocab", [](RunConfig& c) -> std::size_t& { return c.gradcheck_vocab; }),
        size_entry("gradcheck_intents", [](RunConfig& c) -> std::size_t& { return c.gradcheck_intents; }),
        size_entry("gradcheck_slots", [](RunConfig& c) -> std::size_t& { return c.gradcheck_slots; }),
    };
    return table;
  }
};

}  // namespace bnlu
