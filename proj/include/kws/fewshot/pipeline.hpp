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

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kws/dataset/task.hpp"
#include "kws/eval/category.hpp"
#include "kws/eval/report.hpp"
#include "kws/model/beam.hpp"
#include "kws/model/config.hpp"
#include "kws/model/network.hpp"
#include "kws/model/trainer.hpp"

namespace kws {

// Supplies the (already normalized) feature matrix for a corpus entry. The
// command-line driver wires this to wav decoding + filterbank extraction;
// tests inject synthetic features. Must be pure and thread-safe: sweep
// workers call it concurrently.
using FeatureProvider = std::function<FeatureMatrix(const CorpusEntry&)>;

// Everything the training/evaluation loops need besides the dataset itself.
struct FewShotContext {
  LabelScheme scheme = LabelScheme::phoneme;
  const Lexicon* lexicon = nullptr;  // required for the phoneme scheme
  WordSets word_sets;
  ModelConfig model;     // vocab_size is overwritten per run
  TrainOptions train;    // from-scratch (retrain family) schedule
  DecodeOptions decode;
  FeatureProvider features;
  // Whether adaptation batches also carry f examples each of _silence_ and
  // _unknown_. Off by default: only keyword classes get examples.
  bool adapt_include_fillers = false;
  // Adaptation batch size; 0 falls back to train.batch_size.
  int adapt_batch_size = 0;

  Transcriber transcriber() const { return Transcriber{scheme, lexicon}; }
};

inline std::vector<TrainExample> build_train_examples(
    const std::vector<LabeledEntry>& entries, const Vocabulary& vocab,
    const FeatureProvider& features) {
  if (!features) throw UsageError("no feature provider configured");
  std::vector<TrainExample> out;
  out.reserve(entries.size());
  for (const auto& le : entries) {
    TrainExample ex;
    ex.features = features(le.entry);
    ex.targets = vocab.encode(le.tokens);
    out.push_back(std::move(ex));
  }
  return out;
}

// Decodes every entry and maps the hypothesis onto a category.
inline std::vector<EvalItem> evaluate_entries(
    const Network& net, const Vocabulary& vocab,
    const std::vector<LabeledEntry>& entries, Split split,
    const CategoryMapper& mapper, const FeatureProvider& features,
    const DecodeOptions& decode) {
  if (!features) throw UsageError("no feature provider configured");
  std::vector<EvalItem> items;
  items.reserve(entries.size());
  for (const auto& le : entries) {
    const DecodeResult result = beam_decode(net, features(le.entry), decode);
    const CategoryPrediction pred = mapper.map(vocab.decode(result.tokens));
    items.push_back(
        {le.entry.word, le.category, pred.category, le.subset, split});
  }
  return items;
}

// Overall (or per-subset, when `subset` is non-empty) classification error
// in percent. Throws when the selection is empty: a score over nothing would
// otherwise read as a perfect 0%.
inline double evaluation_error_pct(const Network& net, const Vocabulary& vocab,
                                   const std::vector<LabeledEntry>& entries,
                                   Split split, const CategoryMapper& mapper,
                                   const FeatureProvider& features,
                                   const DecodeOptions& decode,
                                   const std::string& subset = "") {
  const auto items =
      evaluate_entries(net, vocab, entries, split, mapper, features, decode);
  const auto err = classification_error(
      items, subset.empty() ? std::function<bool(const EvalItem&)>()
                            : [&](const EvalItem& e) {
                                return e.subset == subset;
                              });
  if (!err.has_value()) {
    throw DataError("no evaluation utterances selected" +
                    (subset.empty() ? "" : " for subset " + subset));
  }
  return *err;
}

struct TrainedModel {
  std::unique_ptr<Network> net;
  Vocabulary vocab;
  TrainResult result;
};

// Fresh model trained on the dataset's training list. When the validation
// list is non-empty, every epoch is scored by overall classification error
// on it and the best-scoring weights are kept; with an empty validation list
// the final-epoch weights stand.
inline TrainedModel train_on_dataset(const TaskDataset& dataset,
                                     const Vocabulary& vocab,
                                     const FewShotContext& ctx,
                                     uint64_t seed) {
  ModelConfig cfg = ctx.model;
  cfg.vocab_size = vocab.size();
  cfg.validate();

  TrainedModel tm;
  tm.vocab = vocab;
  tm.net = std::make_unique<Network>(cfg, seed);

  const std::vector<TrainExample> examples =
      build_train_examples(dataset.train, vocab, ctx.features);

  TrainOptions opt = ctx.train;
  opt.seed = seed;

  ValidationFn validate;
  if (!dataset.validation.empty()) {
    const CategoryMapper mapper(dataset.categories, ctx.scheme, ctx.lexicon,
                                &vocab);
    validate = [&dataset, &vocab, &ctx, mapper](const Network& net) {
      return evaluation_error_pct(net, vocab, dataset.validation,
                                  Split::validation, mapper, ctx.features,
                                  ctx.decode);
    };
  }
  tm.result = train(tm.net.get(), examples, opt, validate);
  return tm;
}

}  // namespace kws
