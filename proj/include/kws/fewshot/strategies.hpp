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

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kws/fewshot/pipeline.hpp"
#include "kws/model/checkpoint.hpp"

namespace kws {

// The three ways of teaching a trained 12-way classifier new keywords:
//   retrain          - train from scratch with the few-shot recordings added
//                      (and oversampled), output layer extended with the new
//                      keywords' tokens;
//   retrain_replace  - same procedure, but the output inventory stays at the
//                      original vocabulary and new-keyword transcriptions
//                      have their missing tokens replaced by UNK;
//   adapt            - continue training all weights of the trained model on
//                      a small balanced set (f examples per class), with the
//                      epoch count picked on validation.
enum class Strategy { retrain, retrain_replace, adapt };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::retrain: return "retrain";
    case Strategy::retrain_replace: return "retrain_replace";
    case Strategy::adapt: return "adapt";
  }
  throw UsageError("unknown strategy");
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "retrain") return Strategy::retrain;
  if (name == "retrain_replace") return Strategy::retrain_replace;
  if (name == "adapt") return Strategy::adapt;
  throw UsageError("unknown strategy '" + name +
                   "' (expected retrain, retrain_replace or adapt)");
}

// One completed vocabulary-extension run: the trained (or adapted) model and
// its per-set error reports on the extended task.
struct FewShotRun {
  Strategy strategy = Strategy::retrain;
  int f = 0;
  int k = 1;             // oversampling factor (retrain family)
  double lr = 0.0;       // learning rate override (adapt)
  int adapt_epochs = 0;  // epoch count actually selected (adapt)
  LabelScheme scheme = LabelScheme::phoneme;
  uint64_t seed = 0;

  bool failed = false;   // diverged; reports below are empty then
  std::string failure;

  EvalReport validation;
  EvalReport test;
  TrainResult train_result;

  std::unique_ptr<Network> net;
  Vocabulary vocab;

  void validate() const {
    if (f < 0) throw UsageError("few-shot example count f must be >= 0");
    switch (strategy) {
      case Strategy::retrain:
      case Strategy::retrain_replace:
        if (k < 1) throw UsageError("oversampling factor k must be >= 1");
        break;
      case Strategy::adapt:
        if (!(lr > 0)) throw UsageError("adaptation learning rate must be > 0");
        if (adapt_epochs < 0) {
          throw UsageError("adaptation epoch budget must be >= 0");
        }
        break;
    }
  }
};

// The training material for one retrain-family run: the extended dataset
// with the few-shot recordings appended and oversampled, plus the matching
// output vocabulary. Exposed separately from run_retrain so the prepared
// targets can be inspected.
struct RetrainSetup {
  TaskDataset dataset;
  Vocabulary vocab;
};

inline RetrainSetup prepare_retrain(const TaskDataset& extended,
                                    const FewShotSample& fewshot, int k,
                                    bool replace, const FewShotContext& ctx) {
  RetrainSetup setup;
  // The output inventory: everything reachable from the dataset's keywords
  // for plain retraining, the original inventory when replacing. With an
  // empty few-shot sample this reduces to the dataset's own vocabulary, so
  // the run is the base training path.
  setup.vocab =
      build_vocabulary(ctx.scheme, ctx.word_sets, ctx.lexicon,
                       replace ? Phase::base12 : extended.phase);
  setup.dataset = add_fewshot_entries(extended, fewshot, ctx.transcriber(),
                                      replace ? &setup.vocab : nullptr);
  setup.dataset = oversample(setup.dataset, fewshot, k);
  return setup;
}

// Trains a fresh model on the original training data plus the few-shot
// recordings, each brought to k occurrences per epoch.
inline FewShotRun run_retrain(const TaskDataset& extended,
                              const FewShotSample& fewshot, int k,
                              bool replace, const FewShotContext& ctx,
                              uint64_t seed) {
  FewShotRun run;
  run.strategy = replace ? Strategy::retrain_replace : Strategy::retrain;
  run.f = fewshot.f;
  run.k = k;
  run.scheme = ctx.scheme;
  run.seed = seed;
  run.validate();

  const RetrainSetup setup = prepare_retrain(extended, fewshot, k, replace,
                                             ctx);
  TrainedModel tm = train_on_dataset(setup.dataset, setup.vocab, ctx, seed);
  run.train_result = tm.result;
  run.vocab = std::move(tm.vocab);
  run.net = std::move(tm.net);
  if (run.train_result.diverged) {
    run.failed = true;
    run.failure = "training diverged";
    return run;
  }

  const CategoryMapper mapper(setup.dataset.categories, ctx.scheme,
                              ctx.lexicon, &run.vocab);
  run.validation = build_report(
      evaluate_entries(*run.net, run.vocab, setup.dataset.validation,
                       Split::validation, mapper, ctx.features, ctx.decode));
  run.test = build_report(
      evaluate_entries(*run.net, run.vocab, setup.dataset.test, Split::test,
                       mapper, ctx.features, ctx.decode));
  return run;
}

// The balanced adaptation set: the few-shot recordings of each new keyword
// (labels reduced to the model's output inventory) plus f training
// recordings of every original keyword, sampled without replacement; with
// ctx.adapt_include_fillers also f each of _silence_ and _unknown_.
inline std::vector<LabeledEntry> prepare_adapt_entries(
    const TaskDataset& extended, const FewShotSample& fewshot,
    const Vocabulary& vocab, const FewShotContext& ctx, uint64_t seed) {
  std::vector<LabeledEntry> out;
  const Transcriber transcriber = ctx.transcriber();
  for (const auto& [word, list] : fewshot.entries) {
    const std::vector<std::string> tokens = replace_missing_tokens(
        transcriber(word, CategoryRole::keyword), vocab);
    for (const auto& e : list) {
      out.push_back({e, word, tokens, "new_kwd"});
    }
  }

  const auto sample_category = [&](const std::string& category,
                                   const std::string& stream) {
    std::vector<const LabeledEntry*> pool;
    for (const auto& le : extended.train) {
      if (le.category == category) pool.push_back(&le);
    }
    std::sort(pool.begin(), pool.end(),
              [](const LabeledEntry* a, const LabeledEntry* b) {
                return a->entry.path < b->entry.path;
              });
    const size_t want = static_cast<size_t>(fewshot.f);
    if (pool.size() < want) {
      throw DataError(str_cat("training list has ", pool.size(), " '",
                              category, "' recordings, need ", want,
                              " for balanced adaptation"));
    }
    Rng rng(Rng::derive(seed, stream));
    for (const size_t idx :
         rng.sample_without_replacement(pool.size(), want)) {
      out.push_back(*pool[idx]);
    }
  };
  for (const auto& w : ctx.word_sets.org_kwd) {
    sample_category(w, "adapt_" + w);
  }
  if (ctx.adapt_include_fillers) {
    sample_category(kSilenceCategory, "adapt_silence");
    sample_category(kUnknownCategory, "adapt_unknown");
  }
  return out;
}

// Continues training all weights of the checkpointed model on the balanced
// adaptation set. The number of epochs actually kept is the one with the
// lowest new-keyword validation error within the given budget.
inline FewShotRun run_adapt(const std::string& checkpoint_path,
                            const TaskDataset& extended,
                            const FewShotSample& fewshot, double lr,
                            int adapt_epochs, const FewShotContext& ctx,
                            uint64_t seed) {
  if (fewshot.f < 1) {
    throw UsageError("adaptation needs at least one example per class");
  }
  FewShotRun run;
  run.strategy = Strategy::adapt;
  run.f = fewshot.f;
  run.lr = lr;
  run.adapt_epochs = adapt_epochs;
  run.scheme = ctx.scheme;
  run.seed = seed;
  run.validate();

  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.vocab.scheme != ctx.scheme) {
    throw DataError("checkpoint was trained with the " +
                    std::string(label_scheme_name(ckpt.vocab.scheme)) +
                    " scheme, run asks for " +
                    std::string(label_scheme_name(ctx.scheme)));
  }
  run.vocab = ckpt.vocab;
  run.net = std::move(ckpt.net);

  const std::vector<LabeledEntry> adapt_train =
      prepare_adapt_entries(extended, fewshot, run.vocab, ctx, seed);
  const std::vector<TrainExample> examples =
      build_train_examples(adapt_train, run.vocab, ctx.features);

  TrainOptions opt = ctx.train;
  opt.seed = seed;
  opt.lr = lr;
  opt.epochs = adapt_epochs;
  if (ctx.adapt_batch_size > 0) opt.batch_size = ctx.adapt_batch_size;

  const CategoryMapper mapper(extended.categories, ctx.scheme, ctx.lexicon,
                              &run.vocab);
  ValidationFn validate;
  if (adapt_epochs > 0) {
    const bool has_new_val = std::any_of(
        extended.validation.begin(), extended.validation.end(),
        [](const LabeledEntry& le) { return le.subset == "new_kwd"; });
    if (!has_new_val) {
      throw DataError(
          "validation split has no new-keyword recordings to select the "
          "epoch count on");
    }
    validate = [&extended, &run, &ctx, &mapper](const Network& net) {
      return evaluation_error_pct(net, run.vocab, extended.validation,
                                  Split::validation, mapper, ctx.features,
                                  ctx.decode, "new_kwd");
    };
  }
  run.train_result = train(run.net.get(), examples, opt, validate);
  run.adapt_epochs = run.train_result.best_epoch;
  if (run.train_result.diverged) {
    run.failed = true;
    run.failure = "training diverged";
    return run;
  }

  run.validation = build_report(
      evaluate_entries(*run.net, run.vocab, extended.validation,
                       Split::validation, mapper, ctx.features, ctx.decode));
  run.test = build_report(
      evaluate_entries(*run.net, run.vocab, extended.test, Split::test,
                       mapper, ctx.features, ctx.decode));
  return run;
}

}  // namespace kws
