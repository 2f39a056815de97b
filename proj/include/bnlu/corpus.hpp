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

// Dataset loading and id encoding.
//
// A dataset root holds one directory per split, each with three parallel
// line files: seq.in (whitespace-separated words), seq.out (one BIO tag per
// word) and label (one intent per line).
//
// Encoded layout for max length N:
//   token_ids  [CLS] w_1 .. w_n [SEP] [PAD] ..        (length N)
//   slot_ids         y_1 .. y_n pad   pad   ..        (length N-1)
//   loss_mask        1   .. 1   0     0     ..        (length N-1)

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bnlu/error.hpp"
#include "bnlu/rng.hpp"

namespace bnlu {

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slot_labels;
  std::string intent;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class VocabKind { token, slot, intent };

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kPadLabel = "[PAD]";

/// Bijective string <-> id map. Ids are assigned in insertion order after
/// the reserved entries of the kind: [PAD] [UNK] [CLS] [SEP] for tokens,
/// the padding label for slots, nothing for intents.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kPadLabel = 0;

  explicit Vocabulary(VocabKind kind = VocabKind::token) : kind_(kind) {
    switch (kind) {
      case VocabKind::token:
        for (auto s : {kPadToken, kUnkToken, kClsToken, kSepToken}) add(std::string(s));
        break;
      case VocabKind::slot:
        add(std::string(bnlu::kPadLabel));
        break;
      case VocabKind::intent:
        break;
    }
  }

  /// Rebuilds a vocabulary from its full item list (reserved entries included).
  static Vocabulary from_items(VocabKind kind, const std::vector<std::string>& items) {
    Vocabulary v(kind);
    const std::size_t reserved = v.size();
    detail::check(items.size() >= reserved, Errc::data, "vocabulary is missing its reserved entries");
    for (std::size_t i = 0; i < reserved; ++i)
      detail::check(items[i] == v.items_[i], Errc::data, "vocabulary entry ", i, " is '", items[i], "', expected '",
                    v.items_[i], "'");
    for (std::size_t i = reserved; i < items.size(); ++i) {
      detail::check(!v.contains(items[i]), Errc::data, "duplicate vocabulary entry '", items[i], "'");
      v.add(items[i]);
    }
    return v;
  }

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return items_.size(); }
  std::size_t reserved() const {
    return kind_ == VocabKind::token ? 4 : kind_ == VocabKind::slot ? 1 : 0;
  }
  const std::vector<std::string>& items() const { return items_; }

  int add(const std::string& s) {
    auto [it, inserted] = index_.try_emplace(s, static_cast<int>(items_.size()));
    if (inserted) items_.push_back(s);
    return it->second;
  }

  bool contains(const std::string& s) const { return index_.count(s) != 0; }

  std::optional<int> find(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int id(const std::string& s) const {
    auto found = find(s);
    detail::check(found.has_value(), Errc::data, "'", s, "' is not in the vocabulary");
    return *found;
  }

  int id_or(const std::string& s, int fallback) const { return find(s).value_or(fallback); }

  const std::string& item(int id) const {
    detail::check(id >= 0 && static_cast<std::size_t>(id) < items_.size(), Errc::data, "vocabulary id ", id,
                  " out of range");
    return items_[static_cast<std::size_t>(id)];
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.kind_ == b.kind_ && a.items_ == b.items_;
  }

 private:
  VocabKind kind_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
  Vocabulary tokens{VocabKind::token};
  Vocabulary slots{VocabKind::slot};
  Vocabulary intents{VocabKind::intent};

  friend bool operator==(const Vocabularies&, const Vocabularies&) = default;
};

struct EncodedExample {
  std::vector<int> token_ids;  // N
  std::vector<int> slot_ids;   // N-1, aligned with token positions 2..N
  std::vector<int> loss_mask;  // N-1
  int intent_id = -1;          // -1 when the intent is not in the vocabulary
  std::size_t length = 0;      // number of real words
};

struct DatasetSplit {
  std::string name;
  std::size_t seq_len = 0;
  std::vector<EncodedExample> examples;
};

struct Batch {
  std::vector<std::size_t> indices;  // into DatasetSplit::examples
};

inline std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(std::move(tok));
  return out;
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  check(in.good(), Errc::io, "cannot read ", file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // A trailing newline at end of file is not an extra empty utterance.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

/// Reads parallel seq.in / seq.out / label files.
inline std::vector<Utterance> load_files(const std::filesystem::path& seq_in, const std::filesystem::path& seq_out,
                                         const std::filesystem::path& label) {
  for (const auto& f : {seq_in, seq_out, label})
    detail::check(std::filesystem::is_regular_file(f), Errc::io, "missing file ", f.string());
  const auto words = detail::read_lines(seq_in);
  const auto tags = detail::read_lines(seq_out);
  const auto intents = detail::read_lines(label);
  detail::check(words.size() == tags.size() && words.size() == intents.size(), Errc::data,
                "line-count mismatch: ", seq_in.filename().string(), "=", words.size(), " ",
                seq_out.filename().string(), "=", tags.size(), " ", label.filename().string(), "=", intents.size(),
                " in ", seq_in.parent_path().string());
  std::vector<Utterance> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    Utterance u;
    u.tokens = split_whitespace(words[i]);
    u.slot_labels = split_whitespace(tags[i]);
    auto intent = split_whitespace(intents[i]);
    detail::check(!u.tokens.empty() && !u.slot_labels.empty() && !intent.empty(), Errc::data, "empty line ", i + 1,
                  " in ", seq_in.parent_path().string());
    detail::check(u.tokens.size() == u.slot_labels.size(), Errc::data, "line ", i + 1, ": ", u.tokens.size(),
                  " tokens but ", u.slot_labels.size(), " slot labels in ", seq_in.parent_path().string());
    detail::check(intent.size() == 1, Errc::data, "line ", i + 1, " of ", label.string(),
                  " must hold exactly one intent");
    u.intent = std::move(intent[0]);
    out.push_back(std::move(u));
  }
  return out;
}

/// Loads `<root>/<split>/{seq.in,seq.out,label}`.
inline std::vector<Utterance> load_split(const std::filesystem::path& root, std::string_view split) {
  const auto dir = root / split;
  return load_files(dir / "seq.in", dir / "seq.out", dir / "label");
}

inline void write_split(const std::filesystem::path& root, std::string_view split,
                        std::span<const Utterance> utterances) {
  const auto dir = root / split;
  std::filesystem::create_directories(dir);
  std::ofstream in(dir / "seq.in"), out(dir / "seq.out"), label(dir / "label");
  detail::check(in.good() && out.good() && label.good(), Errc::io, "cannot write split to ", dir.string());
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
    return s;
  };
  for (const auto& u : utterances) {
    in << join(u.tokens) << '\n';
    out << join(u.slot_labels) << '\n';
    label << u.intent << '\n';
  }
}

/// Vocabularies from the training split only, in first-occurrence order.
inline Vocabularies build_vocabs(std::span<const Utterance> train) {
  detail::check(!train.empty(), Errc::data, "cannot build vocabularies from an empty split");
  Vocabularies v;
  for (const auto& u : train) {
    for (const auto& t : u.tokens) v.tokens.add(t);
    for (const auto& s : u.slot_labels) v.slots.add(s);
    v.intents.add(u.intent);
  }
  return v;
}

/// Token ids for a raw word sequence: [CLS] words [SEP] [PAD]...
/// `index` is the 1-based line number quoted in errors.
inline std::vector<int> encode_tokens(std::span<const std::string> words, const Vocabulary& tokens, std::size_t seq_len,
                                      std::size_t index = 0) {
  detail::check(seq_len >= 3, Errc::config, "max_seq_len must be >= 3");
  detail::check(words.size() + 2 <= seq_len, Errc::too_long, "line ", index, " has ", words.size(),
                " tokens; at most ", seq_len - 2, " fit in max_seq_len ", seq_len);
  std::vector<int> ids(seq_len, Vocabulary::kPad);
  ids[0] = Vocabulary::kCls;
  for (std::size_t i = 0; i < words.size(); ++i) ids[i + 1] = tokens.id_or(words[i], Vocabulary::kUnk);
  ids[words.size() + 1] = Vocabulary::kSep;
  return ids;
}

/// Over-length utterances are rejected with Errc::too_long, never truncated.
/// Slot labels unseen in training map to "O" (or the padding label when the
/// vocabulary has no "O").
inline EncodedExample encode_example(const Utterance& u, const Vocabularies& vocabs, std::size_t seq_len,
                                     std::size_t index = 0) {
  detail::check(u.tokens.size() == u.slot_labels.size(), Errc::data, "line ", index,
                ": token/label count mismatch");
  EncodedExample e;
  e.token_ids = encode_tokens(u.tokens, vocabs.tokens, seq_len, index);
  e.length = u.tokens.size();
  e.slot_ids.assign(seq_len - 1, Vocabulary::kPadLabel);
  e.loss_mask.assign(seq_len - 1, 0);
  const int fallback = vocabs.slots.id_or("O", Vocabulary::kPadLabel);
  for (std::size_t i = 0; i < u.slot_labels.size(); ++i) {
    e.slot_ids[i] = vocabs.slots.id_or(u.slot_labels[i], fallback);
    e.loss_mask[i] = 1;
  }
  e.intent_id = vocabs.intents.id_or(u.intent, -1);
  return e;
}

inline DatasetSplit encode_split(std::string name, std::span<const Utterance> utterances, const Vocabularies& vocabs,
                                 std::size_t seq_len) {
  DatasetSplit split{std::move(name), seq_len, {}};
  split.examples.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i)
    split.examples.push_back(encode_example(utterances[i], vocabs, seq_len, i + 1));
  return split;
}

inline std::vector<std::string> decode_tokens(std::span<const int> ids, const Vocabulary& tokens) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(tokens.item(id));
  return out;
}

/// Fixed-size batches. The train split is shuffled deterministically under
/// `seed`; other splits keep their order. The last batch may be short.
inline std::vector<Batch> make_batches(const DatasetSplit& split, std::size_t size, std::uint64_t seed) {
  detail::check(size >= 1, Errc::config, "batch size must be >= 1");
  std::vector<std::size_t> order(split.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (split.name == "train" && order.size() > 1) {
    Rng rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += size) {
    const std::size_t end = std::min(order.size(), start + size);
    batches.push_back(Batch{{order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end)}});
  }
  return batches;
}

}  // namespace bnlu
