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

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kws/audio/fbank.hpp"
#include "kws/cli/run_config.hpp"
#include "kws/dataset/corpus.hpp"
#include "kws/dataset/task.hpp"
#include "kws/eval/attention_dump.hpp"
#include "kws/eval/category.hpp"
#include "kws/eval/report.hpp"
#include "kws/fewshot/pipeline.hpp"
#include "kws/fewshot/strategies.hpp"
#include "kws/fewshot/sweep.hpp"
#include "kws/io/wav.hpp"
#include "kws/labels/lexicon.hpp"
#include "kws/model/checkpoint.hpp"
#include "kws/model/trainer.hpp"

namespace kws::cli {

// Artifact names inside a prepare/train run directory. Later commands find
// what they need through these.
inline constexpr const char* kManifestBase = "manifest_base12.tsv";
inline constexpr const char* kManifestExtended = "manifest_extended.tsv";
inline constexpr const char* kReservedFile = "reserved.tsv";
inline constexpr const char* kStatsFile = "stats.tsv";
inline constexpr const char* kVocabBase = "vocab_base12.txt";
inline constexpr const char* kVocabExtended = "vocab_extended.txt";
inline constexpr const char* kCheckpointFile = "model.kws";

// <out_dir>/<command>/<tag>. The default tag is derived from the seed, not
// from the clock, so a rerun with the same config lands on (and replaces)
// the same directory with byte-identical results.
inline std::string command_dir(const RunConfig& cfg, const std::string& command,
                               const std::string& tag) {
  const std::string leaf = tag.empty() ? str_cat("seed", cfg.seed) : tag;
  return (std::filesystem::path(cfg.out_dir) / command / leaf).string();
}

inline std::unique_ptr<Lexicon> load_scheme_lexicon(const RunConfig& cfg) {
  if (parse_label_scheme(cfg.scheme) != LabelScheme::phoneme) return nullptr;
  return std::make_unique<Lexicon>(load_lexicon(cfg.lexicon));
}

// Wraps wav reading + filterbank extraction + normalization into the
// feature hook the training/decoding pipeline consumes. With caching on,
// each clip is read and featurized once and then served from memory (the
// cache is shared across sweep workers, hence the lock).
inline FeatureProvider make_feature_provider(const RunConfig& cfg,
                                             FeatureStats stats) {
  FbankConfig fb = cfg.features;
  fb.num_bins = cfg.model.feature_dim;
  struct Cache {
    std::mutex mu;
    std::map<std::string, FeatureMatrix> by_path;
  };
  auto cache = cfg.cache_features ? std::make_shared<Cache>() : nullptr;
  return [fb, st = std::move(stats), cache](const CorpusEntry& e)
             -> FeatureMatrix {
    if (cache) {
      std::lock_guard<std::mutex> lock(cache->mu);
      const auto it = cache->by_path.find(e.path);
      if (it != cache->by_path.end()) return it->second;
    }
    FeatureMatrix m = compute_fbank(wavio::read_wav(e.path), fb);
    apply_normalization(m, st);
    if (cache) {
      std::lock_guard<std::mutex> lock(cache->mu);
      cache->by_path.emplace(e.path, m);
    }
    return m;
  };
}

// Normalization statistics over the training split, accumulated one
// utterance at a time so the full feature tensor set is never resident.
// Matches the batch computation exactly: population variance, clamped at 0.
inline FeatureStats streaming_train_stats(
    const std::vector<LabeledEntry>& train, const FbankConfig& fb) {
  if (train.empty()) throw DataError("no training clips to compute stats on");
  Vector sum, sum_sq;
  double n = 0.0;
  for (const auto& le : train) {
    const FeatureMatrix m = compute_fbank(wavio::read_wav(le.entry.path), fb);
    if (n == 0.0) {
      sum = Vector::Zero(m.dim());
      sum_sq = Vector::Zero(m.dim());
    }
    sum += m.frames.colwise().sum().transpose();
    sum_sq += m.frames.array().square().colwise().sum().matrix().transpose();
    n += static_cast<double>(m.num_frames());
  }
  FeatureStats stats;
  stats.mean = sum / n;
  stats.variance =
      (sum_sq / n - stats.mean.array().square().matrix()).cwiseMax(0.0);
  return stats;
}

// Silence is synthesized once (by prepare) and referenced by path from then
// on; the manifest's split column is authoritative for which split each
// synthesized clip belongs to.
inline SilenceEntries read_silence_entries(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw UsageError(str_cat("cannot open manifest ", manifest_path,
                             " (run the prepare command first)"));
  }
  std::string line;
  std::getline(in, line);  // header
  SilenceEntries out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 6) {
      throw DataError(str_cat("malformed manifest row: ", line));
    }
    if (fields[4] != kSilenceCategory) continue;
    CorpusEntry e;
    e.path = fields[0];
    e.word = fields[1];
    e.speaker_id = fields[2];
    if (fields[3] == "train") {
      out.train.push_back(std::move(e));
    } else if (fields[3] == "validation") {
      out.validation.push_back(std::move(e));
    } else if (fields[3] == "test") {
      out.test.push_back(std::move(e));
    } else {
      throw DataError(str_cat("unknown split in manifest: ", fields[3]));
    }
  }
  return out;
}

// Everything a post-prepare command needs, rebuilt deterministically from
// the corpus + the prepare artifacts (synthesized silence, normalization
// stats) under the configured seed.
struct Session {
  LabelScheme scheme = LabelScheme::phoneme;
  std::unique_ptr<Lexicon> lexicon;  // null unless the scheme needs one
  FeatureStats stats;
  FewShotContext ctx;
  TaskDataset data;
};

inline Session load_session(const RunConfig& cfg, const std::string& prepared,
                            Phase phase) {
  Session s;
  s.scheme = parse_label_scheme(cfg.scheme);
  s.lexicon = load_scheme_lexicon(cfg);
  if (cfg.corpus_root.empty()) {
    throw UsageError(str_cat("no corpus root configured (pass --corpus, set "
                             "corpus_root in the config, or export ",
                             kCorpusEnvVar, ")"));
  }

  const std::string manifest =
      (std::filesystem::path(prepared) / kManifestBase).string();
  const SilenceEntries silence = read_silence_entries(manifest);
  const ScanResult scan = scan_corpus(cfg.corpus_root, /*read_durations=*/false);
  const Transcriber transcriber{s.scheme, s.lexicon.get()};
  s.data = build_task_dataset(scan.entries, silence, cfg.words, cfg.val_pct,
                              cfg.test_pct, phase, transcriber, cfg.seed);

  s.stats = load_feature_stats(
      (std::filesystem::path(prepared) / kStatsFile).string());
  s.ctx.scheme = s.scheme;
  s.ctx.lexicon = s.lexicon.get();
  s.ctx.word_sets = cfg.words;
  s.ctx.model = cfg.model;
  s.ctx.train = cfg.train;
  s.ctx.decode = cfg.decode;
  s.ctx.features = make_feature_provider(cfg, s.stats);
  s.ctx.adapt_include_fillers = cfg.fewshot.include_fillers;
  return s;
}

inline std::string model_name(const RunConfig& cfg) {
  return cfg.scheme + "-s2s";
}

// Flattens a pair of evaluated splits into report rows (one per set).
inline std::vector<ReportRow> report_rows(const std::string& model,
                                          const std::string& strategy, int f,
                                          const EvalReport& validation,
                                          const EvalReport& test) {
  std::vector<ReportRow> rows;
  const auto add = [&rows, &model, &strategy, f](const EvalReport& rep,
                                                 const char* split) {
    for (const auto& [name, s] : rep.sets) {
      rows.push_back({model, strategy, f, name, split, s.error, s.n, 0.0});
    }
  };
  add(validation, "val");
  add(test, "test");
  return rows;
}

inline std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "model,strategy,f,set,split,error_pct,n,std") {
    throw DataError(str_cat("not a report CSV (bad header): ", path));
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw DataError(str_cat("malformed report row: ", line));
    }
    ReportRow r;
    r.model = fields[0];
    r.strategy = fields[1];
    r.f = std::stoi(fields[2]);
    r.set = fields[3];
    r.split = fields[4];
    r.error_pct = std::stod(fields[5]);
    r.n = std::stoi(fields[6]);
    r.std_dev = std::stod(fields[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Full reference x predicted grid over the task categories, in long form.
inline void write_confusion_csv(const std::string& path,
                                const EvalReport& report,
                                const std::vector<std::string>& categories) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write confusion matrix: " + path);
  out << "reference,predicted,count\n";
  for (const auto& ref : categories) {
    const auto row = report.confusion.find(ref);
    for (const auto& pred : categories) {
      int count = 0;
      if (row != report.confusion.end()) {
        const auto cell = row->second.find(pred);
        if (cell != row->second.end()) count = cell->second;
      }
      out << ref << "," << pred << "," << count << "\n";
    }
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// prepare: scan the corpus, synthesize silence, freeze manifests, compute
// normalization stats, and save the vocabularies.
// ---------------------------------------------------------------------------

inline int cmd_prepare(const RunConfig& cfg, const std::string& tag) {
  const std::string dir = command_dir(cfg, "prepare", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const LabelScheme scheme = parse_label_scheme(cfg.scheme);
  const auto lexicon = load_scheme_lexicon(cfg);
  const Transcriber transcriber{scheme, lexicon.get()};
  if (cfg.corpus_root.empty()) {
    throw UsageError(str_cat("no corpus root configured (pass --corpus, set "
                             "corpus_root in the config, or export ",
                             kCorpusEnvVar, ")"));
  }

  const ScanResult scan = scan_corpus(cfg.corpus_root);
  std::cout << "scanned " << scan.entries.size() << " clips ("
            << scan.background_files.size() << " background recordings, "
            << scan.skipped << " skipped)\n";

  const SilencePlan plan =
      plan_silence(scan.entries, cfg.words, cfg.val_pct, cfg.test_pct);
  const std::string silence_dir =
      (std::filesystem::path(dir) / "silence").string();
  SilenceEntries silence;
  const auto synth = [&](int count, const char* split_tag) {
    return materialize_silence(
        synthesize_silence(scan.background_files, count,
                           cfg.silence_duration_s,
                           Rng::derive(cfg.seed, str_cat("silence_",
                                                         split_tag))),
        silence_dir, split_tag);
  };
  silence.train = synth(plan.train, "train");
  silence.validation = synth(plan.validation, "validation");
  silence.test = synth(plan.test, "test");
  std::cout << "synthesized silence: " << plan.train << " train, "
            << plan.validation << " validation, " << plan.test << " test\n";

  const TaskDataset base =
      build_task_dataset(scan.entries, silence, cfg.words, cfg.val_pct,
                         cfg.test_pct, Phase::base12, transcriber, cfg.seed);
  const TaskDataset extended =
      build_task_dataset(scan.entries, silence, cfg.words, cfg.val_pct,
                         cfg.test_pct, Phase::extended, transcriber,
                         cfg.seed);
  namespace fs = std::filesystem;
  write_manifest(base, (fs::path(dir) / kManifestBase).string());
  write_manifest(extended, (fs::path(dir) / kManifestExtended).string());

  {
    std::ofstream out((fs::path(dir) / kReservedFile).string());
    if (!out) throw DataError("cannot write reserved pool listing");
    out << "path\tword\tspeaker\n";
    for (const auto& e : base.reserved_new_kwd) {
      out << e.path << "\t" << e.word << "\t" << e.speaker_id << "\n";
    }
  }

  save_vocabulary(
      build_vocabulary(scheme, cfg.words, lexicon.get(), Phase::base12),
      (fs::path(dir) / kVocabBase).string());
  save_vocabulary(
      build_vocabulary(scheme, cfg.words, lexicon.get(), Phase::extended),
      (fs::path(dir) / kVocabExtended).string());

  FbankConfig fb = cfg.features;
  fb.num_bins = cfg.model.feature_dim;
  save_feature_stats(streaming_train_stats(base.train, fb),
                     (fs::path(dir) / kStatsFile).string());

  std::cout << "base task: " << base.train.size() << " train / "
            << base.validation.size() << " validation / " << base.test.size()
            << " test clips, " << base.reserved_new_kwd.size()
            << " reserved new-keyword clips\n"
            << "prepared " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train: base 12-way model from scratch; best validation epoch is kept.
// ---------------------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg, const std::string& prepared,
                     const std::string& tag) {
  const std::string dir = command_dir(cfg, "train", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const Session s = load_session(cfg, prepared, Phase::base12);
  const Vocabulary vocab =
      build_vocabulary(s.scheme, cfg.words, s.lexicon.get(), Phase::base12);
  std::cout << "training on " << s.data.train.size() << " clips ("
            << vocab.size() << " output tokens)\n";

  const TrainedModel tm = train_on_dataset(s.data, vocab, s.ctx, cfg.seed);
  write_metrics_csv((std::filesystem::path(dir) / "metrics.csv").string(),
                    tm.result.metrics);
  if (tm.result.diverged) {
    std::cout << "training diverged; no checkpoint written (metrics.csv has "
                 "the per-epoch record)\n";
    return 3;
  }

  CheckpointMeta meta;
  meta.epoch = tm.result.best_epoch;
  meta.seed = cfg.seed;
  meta.val_error = std::isfinite(tm.result.best_val_error)
                       ? tm.result.best_val_error
                       : -1.0;
  const std::string ckpt =
      (std::filesystem::path(dir) / kCheckpointFile).string();
  save_checkpoint(ckpt, *tm.net, vocab, meta);

  std::cout << "kept epoch " << tm.result.best_epoch;
  if (meta.val_error >= 0.0) {
    std::cout << " (validation error " << meta.val_error << "%)";
  }
  if (tm.result.skipped > 0) {
    std::cout << ", skipped " << tm.result.skipped
              << " unalignable utterances";
  }
  std::cout << "\nsaved " << ckpt << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval: score a checkpoint on the validation and test splits.
// ---------------------------------------------------------------------------

inline int cmd_eval(const RunConfig& cfg, const std::string& prepared,
                    const std::string& checkpoint, bool extended,
                    const std::string& tag) {
  const std::string dir = command_dir(cfg, "eval", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const Session s = load_session(
      cfg, prepared, extended ? Phase::extended : Phase::base12);
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.vocab.scheme != s.scheme) {
    throw DataError(str_cat("checkpoint uses the ",
                            label_scheme_name(ckpt.vocab.scheme),
                            " scheme but the config says ", cfg.scheme));
  }

  const CategoryMapper mapper(s.data.categories, s.scheme, s.lexicon.get(),
                              &ckpt.vocab);
  const auto val_items =
      evaluate_entries(*ckpt.net, ckpt.vocab, s.data.validation,
                       Split::validation, mapper, s.ctx.features, cfg.decode);
  const auto test_items =
      evaluate_entries(*ckpt.net, ckpt.vocab, s.data.test, Split::test,
                       mapper, s.ctx.features, cfg.decode);
  const EvalReport val = build_report(val_items);
  const EvalReport test = build_report(test_items);

  const auto rows = report_rows(model_name(cfg),
                                extended ? "extended" : "base", 0, val, test);
  namespace fs = std::filesystem;
  write_report_csv((fs::path(dir) / "report.csv").string(), rows);
  write_confusion_csv((fs::path(dir) / "confusion.csv").string(), test,
                      s.data.categories);
  const std::string table = render_report_table(rows);
  write_text((fs::path(dir) / "table.txt").string(), table);
  std::cout << table;
  if (const auto overall = test.set("overall")) {
    std::cout << "test overall error " << overall->error << "% over "
              << overall->n << " clips\n";
  }
  std::cout << "wrote " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fewshot: extend the vocabulary with the new keywords from f examples each,
// by retraining (plain or with label replacement) or by adapting a trained
// checkpoint.
// ---------------------------------------------------------------------------

inline int cmd_fewshot(const RunConfig& cfg, const std::string& prepared,
                       const std::string& tag) {
  const std::string dir = command_dir(cfg, "fewshot", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const Session s = load_session(cfg, prepared, Phase::extended);
  const Strategy strategy = parse_strategy(cfg.fewshot.strategy);
  const FewShotSample sample = sample_fewshot(
      s.data.reserved_new_kwd, cfg.words.new_kwd, cfg.fewshot.f, cfg.seed);
  std::cout << "sampled " << sample.total() << " few-shot examples ("
            << cfg.fewshot.f << " per new keyword)\n";

  FewShotRun run;
  SweepPoint point;
  point.strategy = strategy;
  point.f = cfg.fewshot.f;
  if (strategy == Strategy::adapt) {
    if (cfg.fewshot.checkpoint.empty()) {
      throw UsageError("adaptation needs --checkpoint (a trained base model)");
    }
    point.lr = cfg.fewshot.lr;
    point.epochs = cfg.fewshot.adapt_epochs;
    run = run_adapt(cfg.fewshot.checkpoint, s.data, sample, cfg.fewshot.lr,
                    cfg.fewshot.adapt_epochs, s.ctx, cfg.seed);
  } else {
    point.k = cfg.fewshot.k;
    run = run_retrain(s.data, sample, cfg.fewshot.k,
                      strategy == Strategy::retrain_replace, s.ctx, cfg.seed);
  }

  std::vector<SweepRawRow> raw;
  detail::append_raw_rows(point, cfg.seed, run, &raw);
  namespace fs = std::filesystem;
  write_sweep_raw_csv((fs::path(dir) / "results.csv").string(), raw);

  if (run.failed) {
    std::cout << "run failed: " << run.failure << "\n";
    return 3;
  }

  const auto rows = report_rows(model_name(cfg), strategy_name(strategy),
                                run.f, run.validation, run.test);
  write_report_csv((fs::path(dir) / "report.csv").string(), rows);
  write_confusion_csv((fs::path(dir) / "confusion.csv").string(), run.test,
                      s.data.categories);
  const std::string table = render_report_table(rows);
  write_text((fs::path(dir) / "table.txt").string(), table);

  CheckpointMeta meta;
  meta.epoch = strategy == Strategy::adapt ? run.adapt_epochs
                                           : run.train_result.best_epoch;
  meta.seed = cfg.seed;
  meta.val_error = std::isfinite(run.train_result.best_val_error)
                       ? run.train_result.best_val_error
                       : -1.0;
  meta.extra = {{"strategy", strategy_name(strategy)}, {"f", run.f}};
  const std::string ckpt = (fs::path(dir) / kCheckpointFile).string();
  save_checkpoint(ckpt, *run.net, run.vocab, meta);

  std::cout << table;
  if (strategy == Strategy::adapt) {
    std::cout << "adapted for " << run.adapt_epochs << " epoch(s)\n";
  }
  if (const auto nk = run.test.set("new_kwd")) {
    std::cout << "test new-keyword error " << nk->error << "% over " << nk->n
              << " clips\n";
  }
  std::cout << "saved " << ckpt << "\nwrote " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep: repeat the configured strategy over its hyperparameter grid with
// fresh example draws and seeds, then aggregate.
// ---------------------------------------------------------------------------

inline int cmd_sweep(const RunConfig& cfg, const std::string& prepared,
                     const std::string& tag) {
  const std::string dir = command_dir(cfg, "sweep", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const Session s = load_session(cfg, prepared, Phase::extended);
  const Strategy strategy = parse_strategy(cfg.fewshot.strategy);

  SweepGrid grid;
  grid.strategy = strategy;
  grid.f = cfg.fewshot.f;
  if (strategy == Strategy::adapt) {
    if (cfg.fewshot.checkpoint.empty()) {
      throw UsageError("an adapt sweep needs --checkpoint");
    }
    grid.lr_values = cfg.sweep.lr;
    grid.epoch_values = cfg.sweep.epochs;
  } else {
    grid.k_values = cfg.sweep.k;
  }
  grid.repeats = cfg.sweep.repeats;
  grid.seeds = cfg.sweep.seeds;
  if (grid.seeds.empty()) {
    for (int i = 0; i < grid.repeats; ++i) {
      grid.seeds.push_back(Rng::derive(cfg.seed, str_cat("sweep_run_", i)));
    }
  }
  grid.validate();
  const size_t total_runs = grid.points().size() * grid.seeds.size();
  std::cout << "sweeping " << grid.points().size() << " grid point(s) x "
            << grid.seeds.size() << " run(s) on " << cfg.workers
            << " worker(s)\n";

  const SweepRunner runner = [&s, &cfg, strategy](const SweepPoint& p,
                                                  uint64_t seed) {
    const FewShotSample sample = sample_fewshot(
        s.data.reserved_new_kwd, cfg.words.new_kwd, p.f, seed);
    if (strategy == Strategy::adapt) {
      return run_adapt(cfg.fewshot.checkpoint, s.data, sample, p.lr, p.epochs,
                       s.ctx, seed);
    }
    return run_retrain(s.data, sample, p.k,
                       strategy == Strategy::retrain_replace, s.ctx, seed);
  };
  const SweepResult result = run_sweep(grid, runner, cfg.workers);

  namespace fs = std::filesystem;
  write_sweep_raw_csv((fs::path(dir) / "raw.csv").string(), result.raw);
  write_sweep_aggregate_csv((fs::path(dir) / "aggregates.csv").string(),
                            result.aggregates);

  for (const auto& agg : result.aggregates) {
    if (agg.set != "test_overall" && agg.set != "failed") continue;
    std::cout << agg.point.key() << "  " << agg.set << "  mean "
              << agg.mean << "%  std " << agg.std_dev << "  n " << agg.n;
    if (agg.failed > 0) std::cout << "  failed " << agg.failed;
    std::cout << "\n";
  }
  if (result.failed_runs > 0) {
    std::cout << result.failed_runs << " of " << total_runs
              << " runs failed\n";
  }
  std::cout << "wrote " << dir << "\n";
  return result.failed_runs == static_cast<int>(total_runs) ? 3 : 0;
}

// ---------------------------------------------------------------------------
// attn: decode a handful of test clips and dump their attention alignments
// as TSV + heatmap.
// ---------------------------------------------------------------------------

inline int cmd_attn(const RunConfig& cfg, const std::string& prepared,
                    const std::string& checkpoint, bool extended, int count,
                    const std::string& tag) {
  if (count < 1) throw UsageError("--n must be >= 1");
  const std::string dir = command_dir(cfg, "attn", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  const Session s = load_session(
      cfg, prepared, extended ? Phase::extended : Phase::base12);
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint);

  // One clip per category, round-robin, until `count` clips are selected.
  std::map<std::string, std::vector<const LabeledEntry*>> by_category;
  for (const auto& le : s.data.test) by_category[le.category].push_back(&le);
  std::vector<AttentionUtterance> utts;
  for (size_t pass = 0; static_cast<int>(utts.size()) < count; ++pass) {
    bool any = false;
    for (const auto& cat : s.data.categories) {
      if (static_cast<int>(utts.size()) >= count) break;
      const auto it = by_category.find(cat);
      if (it == by_category.end() || pass >= it->second.size()) continue;
      const LabeledEntry& le = *it->second[pass];
      AttentionUtterance u;
      u.name = str_cat("utt", utts.size(), "_",
                       le.entry.word.empty() ? le.category : le.entry.word);
      u.features = s.ctx.features(le.entry);
      utts.push_back(std::move(u));
      any = true;
    }
    if (!any) break;  // every category pool exhausted
  }

  const int written =
      dump_attention(*ckpt.net, ckpt.vocab, utts, dir, cfg.decode);
  std::cout << "wrote " << written << " attention map(s) to " << dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report: merge result CSVs from earlier runs into one table.
// ---------------------------------------------------------------------------

inline int cmd_report(const RunConfig& cfg,
                      const std::vector<std::string>& inputs,
                      const std::string& tag) {
  if (inputs.empty()) throw UsageError("report needs at least one report CSV");
  const std::string dir = command_dir(cfg, "report", tag);
  std::filesystem::create_directories(dir);
  echo_config(cfg, dir);

  std::vector<ReportRow> rows;
  for (const auto& path : inputs) {
    auto part = read_report_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  namespace fs = std::filesystem;
  write_report_csv((fs::path(dir) / "report.csv").string(), rows);
  const std::string table = render_report_table(rows);
  write_text((fs::path(dir) / "table.txt").string(), table);
  std::cout << table << "merged " << inputs.size() << " report(s), "
            << rows.size() << " rows\nwrote " << dir << "\n";
  return 0;
}

}  // namespace kws::cli
