/* Copyright 2026 The kwseq authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// kwseq — keyword classification as sequence transduction.
//
// Subcommands cover the whole workflow: prepare a corpus, train the base
// 12-way classifier, evaluate checkpoints, extend the vocabulary from a few
// examples, sweep hyperparameters, dump attention alignments, and merge
// result tables. Every run writes only inside <out>/<command>/<tag>/ and is
// reproducible from the config.json echoed there.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kws/cli/commands.hpp"
#include "kws/cli/run_config.hpp"

namespace {

constexpr const char* kDescription =
    "keyword classification as sequence transduction\n"
    "\n"
    "Typical flow:\n"
    "  kwseq prepare --corpus <dir> --out runs\n"
    "  kwseq train   --corpus <dir> --out runs\n"
    "  kwseq eval    --corpus <dir> --out runs --checkpoint "
    "runs/train/seed0/model.kws\n"
    "  kwseq fewshot --corpus <dir> --out runs --strategy adapt --f 10 "
    "--lr 3 --checkpoint runs/train/seed0/model.kws\n"
    "\n"
    "Exit codes: 0 success, 1 usage error, 2 data error, 3 training "
    "diverged.";

const char* flag_help(const std::string& key) {
  static const std::map<std::string, const char*> help = {
      {"corpus", "corpus root directory (default: $KWSEQ_CORPUS)"},
      {"out", "output root; runs land in <out>/<command>/<tag>/"},
      {"scheme", "output unit scheme: phoneme, grapheme, or word"},
      {"lexicon", "pronunciation lexicon (phoneme scheme)"},
      {"seed", "global random seed"},
      {"f", "few-shot examples per new keyword"},
      {"k", "oversampling factor for retraining"},
      {"lr", "adaptation step size"},
      {"epochs", "training / adaptation epoch budget"},
      {"beam", "decoder beam width"},
      {"repeats", "runs per sweep grid point"},
      {"workers", "parallel sweep workers"},
      {"strategy", "retrain, retrain_replace, or adapt"},
      {"checkpoint", "trained base model to adapt"},
      {"fillers", "1 to adapt on silence/unknown examples too"},
  };
  return help.at(key);
}

// Per-subcommand flag set. Only flags the user actually passed become
// overrides, so config-file values survive unless explicitly overridden.
struct CommandFlags {
  std::string config_path;
  std::string tag;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* cmd, const std::vector<std::string>& keys) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--tag", tag,
                    "output subdirectory name (default: seed<seed>)");
    for (const auto& key : keys) {
      raw[key];  // stable slot to bind
      opts[key] = cmd->add_option("--" + key, raw[key], flag_help(key));
    }
  }

  std::map<std::string, std::string> overrides() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, opt] : opts) {
      if (opt->count() > 0) out[key] = raw.at(key);
    }
    return out;
  }

  kws::RunConfig config() const {
    return kws::parse_config(config_path, overrides());
  }
};

std::string resolve_prepared(const kws::RunConfig& cfg,
                             const std::string& prepared) {
  return prepared.empty() ? kws::cli::command_dir(cfg, "prepare", "")
                          : prepared;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{kDescription, "kwseq"};
  app.require_subcommand(1);

  const std::vector<std::string> common = {"corpus", "out", "scheme",
                                           "lexicon", "seed"};
  auto with = [&common](std::initializer_list<const char*> extra) {
    std::vector<std::string> keys = common;
    for (const char* k : extra) keys.emplace_back(k);
    return keys;
  };

  CLI::App* prepare = app.add_subcommand(
      "prepare",
      "scan the corpus, synthesize silence, freeze manifests and stats");
  CommandFlags prepare_flags;
  prepare_flags.attach(prepare, common);

  CLI::App* train = app.add_subcommand(
      "train", "train the base 12-way classifier from scratch");
  CommandFlags train_flags;
  train_flags.attach(train, with({"epochs", "beam", "workers"}));
  std::string train_prepared;
  train->add_option("--prepared", train_prepared,
                    "prepare run directory (default: <out>/prepare/<tag>)");

  CLI::App* eval = app.add_subcommand(
      "eval", "score a checkpoint on the validation and test splits");
  CommandFlags eval_flags;
  eval_flags.attach(eval, with({"beam"}));
  std::string eval_prepared, eval_checkpoint;
  bool eval_extended = false;
  eval->add_option("--prepared", eval_prepared,
                   "prepare run directory (default: <out>/prepare/<tag>)");
  eval->add_option("--checkpoint", eval_checkpoint, "model to score")
      ->required();
  eval->add_flag("--extended", eval_extended,
                 "evaluate against the extended (new-keyword) task");

  CLI::App* fewshot = app.add_subcommand(
      "fewshot",
      "extend the vocabulary with the new keywords from f examples each");
  CommandFlags fewshot_flags;
  fewshot_flags.attach(fewshot, with({"strategy", "f", "k", "lr", "epochs",
                                      "beam", "checkpoint", "fillers"}));
  std::string fewshot_prepared;
  fewshot->add_option("--prepared", fewshot_prepared,
                      "prepare run directory (default: <out>/prepare/<tag>)");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "repeat a few-shot strategy across its hyperparameter grid");
  CommandFlags sweep_flags;
  sweep_flags.attach(sweep, with({"strategy", "f", "repeats", "workers",
                                  "beam", "checkpoint"}));
  std::string sweep_prepared;
  sweep->add_option("--prepared", sweep_prepared,
                    "prepare run directory (default: <out>/prepare/<tag>)");

  CLI::App* attn = app.add_subcommand(
      "attn", "dump attention alignments for a handful of test clips");
  CommandFlags attn_flags;
  attn_flags.attach(attn, with({"beam"}));
  std::string attn_prepared, attn_checkpoint;
  bool attn_extended = false;
  int attn_count = 4;
  attn->add_option("--prepared", attn_prepared,
                   "prepare run directory (default: <out>/prepare/<tag>)");
  attn->add_option("--checkpoint", attn_checkpoint, "model to decode with")
      ->required();
  attn->add_flag("--extended", attn_extended,
                 "draw clips from the extended task's test split");
  attn->add_option("--n", attn_count, "number of clips to dump");

  CLI::App* report = app.add_subcommand(
      "report", "merge report CSVs from earlier runs into one table");
  CommandFlags report_flags;
  report_flags.attach(report, {"out", "seed"});
  std::vector<std::string> report_inputs;
  report->add_option("inputs", report_inputs, "report.csv files to merge")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed()) {
      const kws::RunConfig cfg = prepare_flags.config();
      return kws::cli::cmd_prepare(cfg, prepare_flags.tag);
    }
    if (train->parsed()) {
      const kws::RunConfig cfg = train_flags.config();
      return kws::cli::cmd_train(cfg, resolve_prepared(cfg, train_prepared),
                                 train_flags.tag);
    }
    if (eval->parsed()) {
      const kws::RunConfig cfg = eval_flags.config();
      return kws::cli::cmd_eval(cfg, resolve_prepared(cfg, eval_prepared),
                                eval_checkpoint, eval_extended,
                                eval_flags.tag);
    }
    if (fewshot->parsed()) {
      const kws::RunConfig cfg = fewshot_flags.config();
      return kws::cli::cmd_fewshot(
          cfg, resolve_prepared(cfg, fewshot_prepared), fewshot_flags.tag);
    }
    if (sweep->parsed()) {
      const kws::RunConfig cfg = sweep_flags.config();
      return kws::cli::cmd_sweep(cfg, resolve_prepared(cfg, sweep_prepared),
                                 sweep_flags.tag);
    }
    if (attn->parsed()) {
      const kws::RunConfig cfg = attn_flags.config();
      return kws::cli::cmd_attn(cfg, resolve_prepared(cfg, attn_prepared),
                                attn_checkpoint, attn_extended, attn_count,
                                attn_flags.tag);
    }
    if (report->parsed()) {
      const kws::RunConfig cfg = report_flags.config();
      return kws::cli::cmd_report(cfg, report_inputs, report_flags.tag);
    }
  } catch (const kws::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const kws::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
