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

// Small template grammar producing labelled utterances for smoke runs and
// the ablation grid. Three intents with two slot types each; several values
// span multiple words and a few values are shared between slot types, so
// their label depends on the intent of the sentence.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bnlu/corpus.hpp"
#include "bnlu/rng.hpp"

namespace bnlu {

namespace detail {

struct SlotValues {
  std::string_view slot;
  std::vector<std::string_view> values;
};

struct IntentGrammar {
  std::string_view intent;
  std::vector<SlotValues> slots;
  std::vector<std::string_view> templates;  // "{slot}" marks a slot value
};

inline const std::vector<IntentGrammar>& synthetic_grammar() {
  static const std::vector<IntentGrammar> g = {
      {"play_music",
       {{"artist", {"adele", "the beatles", "blue moon", "miles davis", "daft punk", "nina simone", "the golden lion"}},
        {"album", {"abbey road", "kind of blue", "random access memories", "the wall", "twenty one", "night train"}}},
       {"play {artist}", "play {album} by {artist}", "i want to hear {artist}", "put on {album} please",
        "can you play something from {album}", "i would like some {artist} now", "play the album {album}"}},
      {"book_restaurant",
       {{"restaurant", {"blue moon", "the golden lion", "olive garden", "luigi s", "the red door", "sushi palace"}},
        {"party_size", {"two", "four people", "six", "a party of eight", "three guests"}}},
       {"book a table at {restaurant}", "reserve {restaurant} for {party_size}",
        "i need a table for {party_size} at {restaurant}", "i would like {restaurant} for {party_size} please",
        "get me a table at {restaurant} now", "book {party_size} at {restaurant}"}},
      {"get_weather",
       {{"city", {"paris", "new york", "boston", "san francisco", "london", "tokyo"}},
        {"date", {"tomorrow", "today", "this weekend", "on friday", "next monday"}}},
       {"what is the weather in {city}", "weather for {city} {date}", "will it rain in {city} {date}",
        "i would like the forecast for {city} please", "how cold is it {date} in {city}", "forecast {date} please"}},
  };
  return g;
}

}  // namespace detail

/// `count` utterances drawn uniformly over intents, then templates, then
/// slot values. Same seed, same corpus.
inline std::vector<Utterance> synthetic_corpus(std::size_t count, std::uint64_t seed) {
  const auto& grammar = detail::synthetic_grammar();
  Rng rng(seed);
  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto& g = grammar[rng.below(grammar.size())];
    const std::string_view tmpl = g.templates[rng.below(g.templates.size())];
    Utterance u;
    u.intent = std::string(g.intent);
    for (const auto& piece : split_whitespace(tmpl)) {
      if (piece.size() < 3 || piece.front() != '{' || piece.back() != '}') {
        u.tokens.push_back(piece);
        u.slot_labels.emplace_back("O");
        continue;
      }
      const std::string_view slot = std::string_view(piece).substr(1, piece.size() - 2);
      const detail::SlotValues* sv = nullptr;
      for (const auto& s : g.slots)
        if (s.slot == slot) sv = &s;
      detail::check(sv != nullptr, Errc::usage, "synthetic grammar: unknown slot ", slot);
      const auto words = split_whitespace(sv->values[rng.below(sv->values.size())]);
      for (std::size_t i = 0; i < words.size(); ++i) {
        u.tokens.push_back(words[i]);
        u.slot_labels.push_back((i == 0 ? "B-" : "I-") + std::string(slot));
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

struct SyntheticSizes {
  std::size_t train = 400;
  std::size_t valid = 100;
  std::size_t test = 200;
};

/// Writes train/, valid/ and test/ under `root`, each drawn from its own
/// seed stream.
inline void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSizes& sizes,
                                    std::uint64_t seed) {
  write_split(root, "train", synthetic_corpus(sizes.train, seed * 3 + 0));
  write_split(root, "valid", synthetic_corpus(sizes.valid, seed * 3 + 1));
  write_split(root, "test", synthetic_corpus(sizes.test, seed * 3 + 2));
}

}  // namespace bnlu
