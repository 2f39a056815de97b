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

// Evaluation metrics: intent accuracy, span F1 with conlleval chunking,
// sentence-level semantic accuracy and a one-vs-rest per-intent breakdown.
// All functions are pure. Inputs are tag strings for real words only; pad
// and [SEP] positions must already be stripped.

#pragma once

#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bnlu/error.hpp"

namespace bnlu {

struct Span {
  std::string label;
  std::size_t start = 0;  // inclusive word index
  std::size_t end = 0;    // inclusive word index

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class BioMode {
  lenient,  // conlleval: I-t with no open t-span starts a new span
  strict,   // I-t with no open t-span is ignored
};

struct ParsedTag {
  char prefix;  // 'B', 'I' or 'O'
  std::string_view type;
};

inline ParsedTag parse_tag(std::string_view tag) {
  if (tag == "O") return {'O', {}};
  detail::check(tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-', Errc::data,
                "malformed BIO tag '", tag, "'");
  return {tag[0], tag.substr(2)};
}

/// Chunks a BIO sequence. B-t always opens a span; I-t continues an open
/// span of type t; O, B- or a type change closes the open span.
inline std::vector<Span> extract_spans(std::span<const std::string> tags, BioMode mode = BioMode::lenient) {
  std::vector<Span> spans;
  bool open = false;
  Span cur;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const ParsedTag t = parse_tag(tags[i]);
    const bool continues = open && t.prefix == 'I' && t.type == cur.label;
    if (continues) {
      cur.end = i;
      continue;
    }
    if (open) spans.push_back(cur);
    open = false;
    if (t.prefix == 'B' || (t.prefix == 'I' && mode == BioMode::lenient)) {
      cur = Span{std::string(t.type), i, i};
      open = true;
    }
  }
  if (open) spans.push_back(cur);
  return spans;
}

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double f1_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

using TagSequences = std::vector<std::vector<std::string>>;

/// Micro-averaged span precision / recall / F1; a predicted span is correct
/// only if its label, start and end all match a gold span.
inline PrecisionRecallF1 slot_f1(const TagSequences& pred, const TagSequences& gold,
                                 BioMode mode = BioMode::lenient) {
  detail::check(pred.size() == gold.size(), Errc::shape, "slot_f1: ", pred.size(), " predicted vs ", gold.size(),
                " gold sentences");
  std::size_t n_pred = 0, n_gold = 0, correct = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    detail::check(pred[s].size() == gold[s].size(), Errc::shape, "slot_f1: sentence ", s, " has ", pred[s].size(),
                  " predicted vs ", gold[s].size(), " gold tags");
    auto ps = extract_spans(pred[s], mode);
    auto gs = extract_spans(gold[s], mode);
    n_pred += ps.size();
    n_gold += gs.size();
    // Spans in one sentence are disjoint and ordered, so each matches at most once.
    for (const auto& p : ps)
      for (const auto& g : gs)
        if (p == g) {
          ++correct;
          break;
        }
  }
  PrecisionRecallF1 out;
  out.precision = n_pred == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_pred);
  out.recall = n_gold == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_gold);
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

inline double intent_accuracy(std::span<const std::string> pred, std::span<const std::string> gold) {
  detail::check(pred.size() == gold.size(), Errc::shape, "intent_accuracy: length mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += pred[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

/// Fraction of sentences whose intent and every slot tag are both right.
inline double semantic_accuracy(std::span<const std::string> pred_intents, const TagSequences& pred_tags,
                                std::span<const std::string> gold_intents, const TagSequences& gold_tags) {
  detail::check(pred_intents.size() == gold_intents.size() && pred_tags.size() == gold_tags.size() &&
                    pred_intents.size() == pred_tags.size(),
                Errc::shape, "semantic_accuracy: corpora are not aligned");
  if (gold_intents.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold_intents.size(); ++i) {
    detail::check(pred_tags[i].size() == gold_tags[i].size(), Errc::shape, "semantic_accuracy: sentence ", i,
                  " tag count mismatch");
    hit += pred_intents[i] == gold_intents[i] && pred_tags[i] == gold_tags[i];
  }
  return static_cast<double>(hit) / static_cast<double>(gold_intents.size());
}

struct IntentRow {
  std::string intent;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold occurrences
};

/// One-vs-rest scores per intent, ordered by first appearance in gold, then
/// intents that were only predicted.
inline std::vector<IntentRow> per_intent_report(std::span<const std::string> pred, std::span<const std::string> gold) {
  detail::check(pred.size() == gold.size(), Errc::shape, "per_intent_report: length mismatch");
  std::vector<std::string> order;
  std::map<std::string, std::size_t> tp, n_pred, n_gold;
  auto note = [&](const std::string& s) {
    if (!n_gold.count(s) && !n_pred.count(s)) order.push_back(s);
  };
  for (const auto& g : gold) {
    note(g);
    ++n_gold[g];
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    note(pred[i]);
    ++n_pred[pred[i]];
    if (pred[i] == gold[i]) ++tp[pred[i]];
  }
  std::vector<IntentRow> rows;
  for (const auto& name : order) {
    IntentRow r{name};
    const double t = static_cast<double>(tp[name]);
    r.support = n_gold[name];
    r.precision = n_pred[name] ? t / static_cast<double>(n_pred[name]) : 0.0;
    r.recall = r.support ? t / static_cast<double>(r.support) : 0.0;
    r.f1 = f1_score(r.precision, r.recall);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct EvalReport {
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double semantic_acc = 0.0;
  std::vector<IntentRow> per_intent;
};

inline EvalReport evaluate_predictions(std::span<const std::string> pred_intents, const TagSequences& pred_tags,
                                       std::span<const std::string> gold_intents, const TagSequences& gold_tags,
                                       BioMode mode = BioMode::lenient) {
  EvalReport r;
  r.intent_acc = intent_accuracy(pred_intents, gold_intents);
  const auto prf = slot_f1(pred_tags, gold_tags, mode);
  r.slot_precision = prf.precision;
  r.slot_recall = prf.recall;
  r.slot_f1 = prf.f1;
  r.semantic_acc = semantic_accuracy(pred_intents, pred_tags, gold_intents, gold_tags);
  r.per_intent = per_intent_report(pred_intents, gold_intents);
  return r;
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Scalar block (`metric,value`: intent_acc, slot_f1, semantic_acc) followed
/// by the breakdown block (`intent,precision,recall,f1,support`).
inline void write_report_csv(std::ostream& os, const EvalReport& r) {
  os << "metric,value\n";
  os << "intent_acc," << fixed4(r.intent_acc) << '\n';
  os << "slot_f1," << fixed4(r.slot_f1) << '\n';
  os << "semantic_acc," << fixed4(r.semantic_acc) << '\n';
  os << "intent,precision,recall,f1,support\n";
  for (const auto& row : r.per_intent)
    os << row.intent << ',' << fixed4(row.precision) << ',' << fixed4(row.recall) << ',' << fixed4(row.f1) << ','
       << row.support << '\n';
}

}  // namespace bnlu
