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


// Reference chunker for test use. It follows conlleval's own formulation
// (chunk boundaries decided from the previous and current tag pair), which
// is independent of the library's single-pass span builder.

#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "bnlu/rng.hpp"

namespace bnlu::oracle {

using Chunk = std::tuple<std::string, std::size_t, std::size_t>;  // label, start, end

inline void split_tag(const std::string& tag, char& prefix, std::string& type) {
  if (tag == "O") {
    prefix = 'O';
    type.clear();
  } else {
    prefix = tag[0];
    type = tag.substr(2);
  }
}

inline bool end_of_chunk(char prev, char cur, const std::string& prev_type, const std::string& type) {
  if (prev == 'B' && (cur == 'B' || cur == 'O')) return true;
  if (prev == 'I' && (cur == 'B' || cur == 'O')) return true;
  return prev != 'O' && prev_type != type;
}

inline bool start_of_chunk(char prev, char cur, const std::string& prev_type, const std::string& type) {
  if (cur == 'B') return true;
  if (prev == 'O' && cur == 'I') return true;
  return cur != 'O' && prev_type != type;
}

inline std::vector<Chunk> chunks(const std::vector<std::string>& tags) {
  std::vector<Chunk> out;
  char prev = 'O';
  std::string prev_type;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= tags.size(); ++i) {
    char cur = 'O';
    std::string type;
    if (i < tags.size()) split_tag(tags[i], cur, type);
    if (end_of_chunk(prev, cur, prev_type, type)) out.emplace_back(prev_type, start, i - 1);
    if (start_of_chunk(prev, cur, prev_type, type)) start = i;
    prev = cur;
    prev_type = type;
  }
  return out;
}

struct Counts {
  std::size_t pred = 0, gold = 0, correct = 0;
};

// Exact-match counting by enumerating every (label, start, end) triple.
inline Counts count_matches(const std::vector<std::vector<std::string>>& pred,
                            const std::vector<std::vector<std::string>>& gold) {
  Counts c;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto p = chunks(pred[s]), g = chunks(gold[s]);
    c.pred += p.size();
    c.gold += g.size();
    std::map<Chunk, int> remaining;
    for (const auto& x : g) ++remaining[x];
    for (const auto& x : p)
      if (remaining[x] > 0) {
        --remaining[x];
        ++c.correct;
      }
  }
  return c;
}

inline std::vector<std::string> random_bio(Rng& rng, std::size_t max_len = 20, std::size_t max_types = 5) {
  const std::size_t len = 1 + rng.below(max_len);
  const std::size_t types = 1 + rng.below(max_types);
  std::vector<std::string> tags(len);
  for (auto& t : tags) {
    const auto k = rng.below(3);
    t = k == 0 ? std::string("O") : std::string(k == 1 ? "B-" : "I-") + static_cast<char>('a' + rng.below(types));
  }
  return tags;
}

}  // namespace bnlu::oracle
