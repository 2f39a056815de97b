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

// Ablation grid: one line of `key=value` overrides per cell, applied on top
// of a base RunConfig. Each cell trains on train/, selects on valid/ and is
// scored on the held-out test/ split (valid/ when test/ is absent).

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bnlu/config.hpp"
#include "bnlu/corpus.hpp"
#include "bnlu/metrics.hpp"
#include "bnlu/training.hpp"

namespace bnlu {

struct AblationCell {
  std::size_t line = 0;  // 1-based line in the grid file
  std::string overrides;
};

struct AblationRow {
  std::string encoder;
  std::string embedding;      // file stem, or "learned"
  std::string bidirectional;  // "on" / "off"
  double slot_f1 = 0.0;
  double intent_acc = 0.0;
  double semantic_acc = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // error message for failed cells
};

inline std::vector<AblationCell> parse_grid(std::istream& in) {
  std::vector<AblationCell> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (!s.empty()) cells.push_back({lineno, std::string(s)});
  }
  return cells;
}

inline std::string embedding_label(const RunConfig& run) {
  return run.embedding_file.empty() ? std::string("learned")
                                    : std::filesystem::path(run.embedding_file).stem().string();
}

struct AblationData {
  TrainData train;
  std::vector<Utterance> heldout;
};

inline AblationData load_ablation_data(const std::filesystem::path& root) {
  AblationData d;
  d.train.train = load_split(root, "train");
  d.train.valid = load_split(root, "valid");
  d.train.vocabs = build_vocabs(d.train.train);
  d.heldout = std::filesystem::exists(root / "test") ? load_split(root, "test") : d.train.valid;
  return d;
}

/// Trains and scores one cell. Errors propagate to the caller.
inline AblationRow run_ablation_cell(const RunConfig& run, const AblationData& data,
                                     std::vector<EpochRecord>* log = nullptr) {
  run.validate();
  AblationRow row;
  row.encoder = to_string(run.model.encoder.kind);
  row.embedding = embedding_label(run);
  row.bidirectional = run.model.bidirectional ? "on" : "off";
  row.seed = run.train.seed;
  TrainResult result = train(data.train, initial_model(run, data.train.vocabs), run.train);
  const EvalReport r = evaluate(result.best_model, data.train.vocabs, data.heldout,
                                run.strict_bio ? BioMode::strict : BioMode::lenient);
  row.slot_f1 = r.slot_f1;
  row.intent_acc = r.intent_acc;
  row.semantic_acc = r.semantic_acc;
  if (log != nullptr) *log = std::move(result.log);
  return row;
}

/// Runs every cell in order. A failing cell is recorded with its error and
/// the grid continues.
inline std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationData& data,
                                             const std::vector<AblationCell>& cells,
                                             const std::function<void(const AblationRow&)>& on_row = {}) {
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    AblationRow row;
    RunConfig run = base;
    try {
      run.apply_overrides(cell.overrides);
      row = run_ablation_cell(run, data);
    } catch (const std::exception& e) {
      row = AblationRow{};
      row.encoder = to_string(run.model.encoder.kind);
      row.embedding = embedding_label(run);
      row.bidirectional = run.model.bidirectional ? "on" : "off";
      row.seed = run.train.seed;
      row.status = "line " + std::to_string(cell.line) + ": " + e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Table-shaped CSV; failed cells carry empty metric fields.
inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "encoder,embedding,bidirectional,slot_f1,intent_acc,semantic_acc,seed,status\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    os << r.encoder << ',' << r.embedding << ',' << r.bidirectional << ',' << (ok ? fixed4(r.slot_f1) : "") << ','
       << (ok ? fixed4(r.intent_acc) : "") << ',' << (ok ? fixed4(r.semantic_acc) : "") << ',' << r.seed << ','
       << status << '\n';
  }
}

}  // namespace bnlu
