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

// bnlu command-line tool: train, eval, predict, gradcheck, ablate, synth.
// Every failure prints one line "bnlu: E_<CODE>: message" and exits nonzero.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bnlu/bnlu.hpp"

namespace fs = std::filesystem;
using namespace bnlu;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  detail::check(out.good(), Errc::io, "cannot write ", path.string());
  out << text;
  out.flush();
  detail::check(out.good(), Errc::io, "failed writing ", path.string());
}

// Removes the files it tracks unless release() was called.
class OutputGuard {
 public:
  void track(fs::path p) { files_.push_back(std::move(p)); }
  void release() { files_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
  }

 private:
  std::vector<fs::path> files_;
};

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  RunConfig run = RunConfig::load(a.config);
  if (a.seed) run.train.seed = *a.seed;
  run.validate();

  TrainData data;
  data.train = load_split(a.data, "train");
  data.valid = load_split(a.data, "valid");
  data.vocabs = build_vocabs(data.train);

  fs::create_directories(a.out);
  const fs::path out = a.out;
  OutputGuard guard;
  for (const char* f : {"best.bnlu", "final.bnlu", "metrics.csv", "config.txt"}) guard.track(out / f);

  std::printf("train: %zu examples, valid: %zu, vocab %zu tokens / %zu slot labels / %zu intents\n",
              data.train.size(), data.valid.size(), data.vocabs.tokens.size(), data.vocabs.slots.size(),
              data.vocabs.intents.size());
  TrainResult result = train(data, initial_model(run, data.vocabs), run.train, [](const EpochRecord& r) {
    std::printf("epoch %zu  loss %.6f  val intent %.4f  slot f1 %.4f  semantic %.4f\n", r.epoch, r.train_loss,
                r.val_intent_acc, r.val_slot_f1, r.val_semantic_acc);
    std::fflush(stdout);
    return true;
  });

  std::ostringstream log;
  write_metrics_log(log, result.log);
  write_text(out / "metrics.csv", log.str());
  write_text(out / "config.txt", run.to_text());
  save_checkpoint(out / "best.bnlu", result.best_model, data.vocabs, run);
  save_checkpoint(out / "final.bnlu", result.final_model, data.vocabs, run);
  guard.release();
  std::printf("best epoch %zu; wrote %s\n", result.best_epoch, out.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string model, data, split, report;
};

int cmd_eval(const EvalArgs& a) {
  Checkpoint ck = load_checkpoint(a.model);
  const auto utts = load_split(a.data, a.split);
  std::size_t known = 0;
  for (const auto& u : utts) known += ck.vocabs.intents.contains(u.intent);
  detail::check(utts.empty() || known > 0, Errc::data, "vocabulary mismatch: none of the ", utts.size(),
                " intents in ", a.split, " occur in the checkpoint vocabulary");
  const EvalReport r =
      evaluate(ck.model, ck.vocabs, utts, ck.config.strict_bio ? BioMode::strict : BioMode::lenient);
  std::printf("intent_acc %s\nslot_f1 %s\nsemantic_acc %s\n", fixed4(r.intent_acc).c_str(),
              fixed4(r.slot_f1).c_str(), fixed4(r.semantic_acc).c_str());
  std::ostringstream csv;
  write_report_csv(csv, r);
  write_text(a.report, csv.str());
  return 0;
}

struct PredictArgs {
  std::string model, input, output;
};

int cmd_predict(const PredictArgs& a) {
  Checkpoint ck = load_checkpoint(a.model);
  const auto lines = detail::read_lines(a.input);
  std::string text;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto words = split_whitespace(lines[i]);
    detail::check(!words.empty(), Errc::data, a.input, ": line ", i + 1, " is empty");
    const Prediction p = predict(ck.model, ck.vocabs, words, i + 1);
    text += p.intent;
    text += '\t';
    for (std::size_t k = 0; k < p.tags.size(); ++k) text += (k ? " " : "") + p.tags[k];
    text += '\n';
  }
  write_text(a.output, text);
  return 0;
}

struct GradcheckArgs {
  std::string config;
  double eps = 1e-5;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  RunConfig run = RunConfig::load(a.config);
  const ModelGradCheck r = model_gradcheck(run, a.eps);
  constexpr double kTolerance = 1e-4;
  std::printf("%-28s %12s %12s %12s %7s\n", "group", "rel_err", "rel_err_fd64", "max|grad|", "coords");
  bool ok = true;
  for (std::size_t i = 0; i < r.report.groups.size(); ++i) {
    const auto& g = r.report.groups[i];
    const bool pass = g.max_rel_error < kTolerance;
    ok = ok && pass;
    std::printf("%-28s %12.3e %12.3e %12.3e %7zu%s\n", g.name.c_str(), g.max_rel_error,
                r.report_fd64.groups[i].max_rel_error, g.max_abs_grad, g.coords_checked, pass ? "" : "  FAIL");
  }
  std::printf("max relative error %.3e (tolerance %.0e): %s\n", r.report.max_rel_error, kTolerance,
              ok ? "ok" : "FAILED");
  return ok ? 0 : 1;
}

struct AblateArgs {
  std::string data, grid, out, config;
};

int cmd_ablate(const AblateArgs& a) {
  RunConfig base = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  std::ifstream grid(a.grid);
  detail::check(grid.good(), Errc::io, "cannot read grid ", a.grid);
  const auto cells = parse_grid(grid);
  const AblationData data = load_ablation_data(a.data);
  fs::create_directories(a.out);
  const auto rows = run_ablation(base, data, cells, [](const AblationRow& r) {
    if (r.status == "ok")
      std::printf("%s %s bidirectional=%s seed=%llu: slot f1 %.4f intent %.4f semantic %.4f\n", r.encoder.c_str(),
                  r.embedding.c_str(), r.bidirectional.c_str(), static_cast<unsigned long long>(r.seed), r.slot_f1,
                  r.intent_acc, r.semantic_acc);
    else
      std::printf("%s %s bidirectional=%s: failed: %s\n", r.encoder.c_str(), r.embedding.c_str(),
                  r.bidirectional.c_str(), r.status.c_str());
    std::fflush(stdout);
  });
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  write_text(fs::path(a.out) / "ablation.csv", csv.str());
  return 0;
}

struct SynthArgs {
  std::string out;
  SyntheticSizes sizes;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a) {
  write_synthetic_dataset(a.out, a.sizes, a.seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint intent detection and slot filling with bi-directional heads"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints and a metrics log");
  train_cmd->add_option("--data", train_args.data, "Dataset root with train/ and valid/")->required();
  train_cmd->add_option("--config", train_args.config, "key=value config file")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--seed", train_args.seed, "Override the config seed");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  eval_cmd->add_option("--model", eval_args.model, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_args.data, "Dataset root")->required();
  eval_cmd->add_option("--split", eval_args.split, "Split name")->required()->check(CLI::IsMember({"valid", "test"}));
  eval_cmd->add_option("--report", eval_args.report, "Report CSV to write")->required();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Tag one whitespace-tokenized utterance per line");
  predict_cmd->add_option("--model", predict_args.model, "Checkpoint file")->required();
  predict_cmd->add_option("--input", predict_args.input, "Input text file")->required();
  predict_cmd->add_option("--output", predict_args.output, "Output TSV file")->required();

  GradcheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare model gradients with finite differences");
  gc_cmd->add_option("--config", gc_args.config, "key=value config file (tiny dimensions)")->required();
  gc_cmd->add_option("--eps", gc_args.eps, "Central-difference step")->capture_default_str();

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and score every cell of an override grid");
  ablate_cmd->add_option("--data", ablate_args.data, "Dataset root")->required();
  ablate_cmd->add_option("--grid", ablate_args.grid, "One line of key=value overrides per cell")->required();
  ablate_cmd->add_option("--out", ablate_args.out, "Output directory")->required();
  ablate_cmd->add_option("--config", ablate_args.config, "Base config the overrides apply to");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic template corpus");
  synth_cmd->add_option("--out", synth_args.out, "Dataset root to create")->required();
  synth_cmd->add_option("--train", synth_args.sizes.train, "Training utterances")->capture_default_str();
  synth_cmd->add_option("--valid", synth_args.sizes.valid, "Validation utterances")->capture_default_str();
  synth_cmd->add_option("--test", synth_args.sizes.test, "Test utterances")->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "bnlu: E_USAGE: %s\n", e.what());
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*predict_cmd) return cmd_predict(predict_args);
    if (*gc_cmd) return cmd_gradcheck(gc_args);
    if (*ablate_cmd) return cmd_ablate(ablate_args);
    if (*synth_cmd) return cmd_synth(synth_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "bnlu: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bnlu: E_IO: %s\n", e.what());
    return 1;
  }
  return 0;
}
