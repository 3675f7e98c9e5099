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

// End-to-end exercise of the kwseq binary: prepare -> train -> eval ->
// fewshot -> sweep -> attn -> report on a synthesized toy corpus, checking
// exit codes, artifact layout, reproducibility, and corpus immutability.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kws/cli/run_config.hpp"
#include "support/toy_corpus.hpp"

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define CHECK(cond)                                                     \
  do {                                                                  \
    if (!(cond)) {                                                      \
      ++failures;                                                       \
      std::cerr << "FAIL " << __FILE__ << ":" << __LINE__ << "  " #cond \
                << "\n";                                                \
    }                                                                   \
  } while (0)

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args, const std::string& log) {
  const std::string cmd =
      std::string(KWSEQ_BIN) + " " + args + " > " + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

// Runs a command and reports the log when the exit code is unexpected.
bool expect_rc(const std::string& args, const std::string& log, int want) {
  const int got = run(args, log);
  if (got == want) return true;
  ++failures;
  std::cerr << "FAIL: kwseq " << args << "\n  expected exit " << want
            << ", got " << got << "\n--- log ---\n"
            << slurp(log) << "-----------\n";
  return false;
}

int count_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) return 0;
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  }
  return n;
}

std::map<std::string, uintmax_t> snapshot(const std::string& dir) {
  std::map<std::string, uintmax_t> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[e.path().string()] = e.file_size();
  }
  return files;
}

}  // namespace

int main() {
  const std::string base = kws::testing::fresh_temp_dir("cli_pipeline");
  const std::string corpus = base + "/corpus";
  const std::string runs = base + "/runs";
  const std::string logs = base + "/logs";
  fs::create_directories(logs);

  kws::testing::ToyCorpusSpec spec;
  spec.words = {"go", "no", "yes", "stop", "bed", "wow", "up", "down",
                "five"};
  spec.train_speakers = 4;
  spec.val_speakers = 2;
  spec.test_speakers = 2;
  spec.takes = 2;
  spec.seed = 99;
  kws::testing::generate_toy_corpus(corpus, spec);

  // Small model + coarse frames keep the run fast while leaving every code
  // path intact.
  kws::RunConfig cfg;
  cfg.out_dir = runs;
  cfg.scheme = "grapheme";
  cfg.lexicon = "";
  cfg.seed = 7;
  cfg.words.org_kwd = {"go", "no", "yes", "stop"};
  cfg.words.org_unk = {"bed", "wow"};
  cfg.words.new_kwd = {"up", "down"};
  cfg.words.new_unk = {"five"};
  cfg.features.frame_length_ms = 50.0;
  cfg.features.frame_shift_ms = 40.0;
  cfg.model.feature_dim = 20;
  cfg.model.conv_channels = {2, 2, 3, 3};
  cfg.model.enc_layers = 1;
  cfg.model.enc_units = 6;
  cfg.model.dec_units = 8;
  cfg.model.embed_dim = 6;
  cfg.model.att_dim = 8;
  cfg.model.att_channels = 2;
  cfg.model.att_width = 5;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 8;
  cfg.decode.beam_size = 2;
  cfg.fewshot.f = 2;
  cfg.fewshot.k = 2;
  cfg.fewshot.lr = 0.5;
  cfg.fewshot.adapt_epochs = 2;
  cfg.sweep.k = {1, 2};
  cfg.sweep.lr = {0.5};
  cfg.sweep.epochs = {1};
  cfg.sweep.repeats = 2;

  const std::string config_path = base + "/config.json";
  std::ofstream(config_path) << cfg.to_json().dump(2) << "\n";

  // The corpus root is not in the config: every command resolves it from
  // the environment unless --corpus overrides it.
  setenv(kws::kCorpusEnvVar, corpus.c_str(), 1);
  const auto corpus_before = snapshot(corpus);

  const std::string cfg_flag = " --config " + config_path;

  // ---- prepare -------------------------------------------------------
  const std::string prep = runs + "/prepare/seed7";
  if (!expect_rc("prepare" + cfg_flag, logs + "/prepare.log", 0)) return 1;
  for (const char* f :
       {"config.json", "manifest_base12.tsv", "manifest_extended.tsv",
        "reserved.tsv", "stats.tsv", "vocab_base12.txt",
        "vocab_extended.txt"}) {
    CHECK(fs::exists(prep + "/" + f));
  }
  CHECK(count_files(prep + "/silence", ".wav") > 0);
  {
    // The echoed config carries the env-resolved corpus root.
    const kws::RunConfig echoed = kws::parse_config(prep + "/config.json", {});
    CHECK(echoed.corpus_root == corpus);
    CHECK(echoed.seed == 7);
    // Extended vocabulary strictly extends the base one.
    const std::string vb = slurp(prep + "/vocab_base12.txt");
    const std::string ve = slurp(prep + "/vocab_extended.txt");
    CHECK(ve.size() > vb.size());
    CHECK(ve.find("SIL") != std::string::npos);
  }

  // ---- train (twice: byte-identical reruns) ---------------------------
  const std::string train1 = runs + "/train/t1";
  const std::string train2 = runs + "/train/t2";
  const std::string train_args =
      cfg_flag + " --prepared " + prep + " --corpus " + corpus;
  if (!expect_rc("train" + train_args + " --tag t1", logs + "/train1.log", 0))
    return 1;
  expect_rc("train" + train_args + " --tag t2", logs + "/train2.log", 0);
  CHECK(fs::exists(train1 + "/model.kws"));
  const std::string metrics1 = slurp(train1 + "/metrics.csv");
  CHECK(metrics1 == slurp(train2 + "/metrics.csv"));
  CHECK(metrics1.rfind("epoch,train_loss,val_error", 0) == 0);
  // header + one row per epoch
  CHECK(std::count(metrics1.begin(), metrics1.end(), '\n') ==
        cfg.train.epochs + 1);
  const std::string ckpt = train1 + "/model.kws";

  // ---- eval ------------------------------------------------------------
  const std::string eval_dir = runs + "/eval/seed7";
  expect_rc("eval" + cfg_flag + " --prepared " + prep + " --checkpoint " +
                ckpt,
            logs + "/eval.log", 0);
  const std::string report1 = slurp(eval_dir + "/report.csv");
  CHECK(report1.rfind("model,strategy,f,set,split,error_pct,n,std", 0) == 0);
  for (const char* set : {"org_kwd", "unk", "silence", "overall"}) {
    CHECK(report1.find("," + std::string(set) + ",test,") !=
          std::string::npos);
    CHECK(report1.find("," + std::string(set) + ",val,") !=
          std::string::npos);
  }
  CHECK(report1.find("new_kwd") == std::string::npos);  // base task only
  CHECK(fs::exists(eval_dir + "/confusion.csv"));
  CHECK(fs::exists(eval_dir + "/table.txt"));

  // The same checkpoint scored against the extended task sees the new
  // keywords (whose transcriptions it cannot emit yet).
  expect_rc("eval" + cfg_flag + " --prepared " + prep + " --checkpoint " +
                ckpt + " --extended --tag ext",
            logs + "/eval_ext.log", 0);
  const std::string report_ext = slurp(runs + "/eval/ext/report.csv");
  CHECK(report_ext.find(",new_kwd,test,") != std::string::npos);

  // ---- fewshot: retrain (twice), then adapt ----------------------------
  const std::string fs_args = cfg_flag + " --prepared " + prep;
  expect_rc("fewshot" + fs_args + " --strategy retrain --tag fs1",
            logs + "/fewshot1.log", 0);
  expect_rc("fewshot" + fs_args + " --strategy retrain --tag fs2",
            logs + "/fewshot2.log", 0);
  const std::string fs1 = runs + "/fewshot/fs1";
  const std::string results1 = slurp(fs1 + "/results.csv");
  CHECK(results1 == slurp(runs + "/fewshot/fs2/results.csv"));
  CHECK(results1.rfind("strategy,f,k,lr,epochs,seed,set,error", 0) == 0);
  CHECK(results1.find("retrain,2,2,") != std::string::npos);
  CHECK(results1.find("test_new_kwd") != std::string::npos);
  const std::string fs_report = slurp(fs1 + "/report.csv");
  CHECK(fs_report.find(",new_kwd,test,") != std::string::npos);
  CHECK(fs_report.find("retrain") != std::string::npos);
  CHECK(fs::exists(fs1 + "/model.kws"));

  expect_rc("fewshot" + fs_args +
                " --strategy adapt --f 2 --lr 0.5 --epochs 2 --checkpoint " +
                ckpt + " --tag ad1",
            logs + "/adapt.log", 0);
  const std::string ad_results = slurp(runs + "/fewshot/ad1/results.csv");
  CHECK(ad_results.find("adapt,2,") != std::string::npos);
  CHECK(ad_results.find("val_new_kwd") != std::string::npos);

  // ---- sweep -----------------------------------------------------------
  expect_rc("sweep" + fs_args +
                " --strategy retrain --repeats 2 --workers 2 --tag sw1",
            logs + "/sweep.log", 0);
  const std::string sw = runs + "/sweep/sw1";
  const std::string raw = slurp(sw + "/raw.csv");
  CHECK(raw.rfind("strategy,f,k,lr,epochs,seed,set,error", 0) == 0);
  const std::string agg = slurp(sw + "/aggregates.csv");
  CHECK(agg.rfind("strategy,f,k,lr,epochs,set,mean_error,std,n,failed", 0) ==
        0);
  // two grid points (k=1, k=2), each aggregated over 2 runs
  CHECK(agg.find("retrain,2,1,") != std::string::npos);
  CHECK(agg.find("retrain,2,2,") != std::string::npos);
  CHECK(agg.find(",2,0\n") != std::string::npos);  // n=2, no failures

  // ---- attn ------------------------------------------------------------
  expect_rc("attn" + cfg_flag + " --prepared " + prep + " --checkpoint " +
                ckpt + " --n 3",
            logs + "/attn.log", 0);
  const std::string attn_dir = runs + "/attn/seed7";
  CHECK(count_files(attn_dir, ".tsv") == 3);
  CHECK(count_files(attn_dir, ".bmp") == 3);

  // ---- report ----------------------------------------------------------
  expect_rc("report --out " + runs + " " + eval_dir + "/report.csv " + fs1 +
                "/report.csv",
            logs + "/report.log", 0);
  const std::string merged = slurp(runs + "/report/seed0/report.csv");
  CHECK(merged.find("base") != std::string::npos);
  CHECK(merged.find("retrain") != std::string::npos);
  const std::string table = slurp(runs + "/report/seed0/table.txt");
  CHECK(table.find("org_kwd") != std::string::npos);
  CHECK(table.find("new_kwd") != std::string::npos);

  // ---- failure modes ---------------------------------------------------
  // A step size this large overflows the network within an epoch or two:
  // the run must report divergence (exit 3) and keep the metrics trail.
  {
    kws::RunConfig bad = cfg;
    bad.train.lr = 1e160;
    bad.train.epochs = 2;
    const std::string bad_path = base + "/config_diverge.json";
    std::ofstream(bad_path) << bad.to_json().dump(2) << "\n";
    expect_rc("train --config " + bad_path + " --prepared " + prep +
                  " --tag boom",
              logs + "/diverge.log", 3);
    CHECK(fs::exists(runs + "/train/boom/metrics.csv"));
    CHECK(!fs::exists(runs + "/train/boom/model.kws"));
  }
  // Missing inputs are data errors, not crashes.
  expect_rc("eval" + cfg_flag + " --prepared " + prep +
                " --checkpoint /nonexistent.kws --tag gone",
            logs + "/bad_ckpt.log", 2);
  // Unknown config keys are usage errors.
  {
    const std::string typo_path = base + "/config_typo.json";
    std::ofstream(typo_path) << "{\"shceme\": \"grapheme\"}\n";
    expect_rc("prepare --config " + typo_path, logs + "/typo.log", 1);
  }

  // ---- the corpus itself is never touched ------------------------------
  CHECK(snapshot(corpus) == corpus_before);

  if (failures == 0) {
    std::cout << "cli pipeline: all checks passed\n";
    return 0;
  }
  std::cerr << failures << " check(s) failed\n";
  return 1;
}
