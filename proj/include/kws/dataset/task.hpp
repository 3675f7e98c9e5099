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
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kws/common.hpp"
#include "kws/dataset/corpus.hpp"
#include "kws/dataset/split.hpp"
#include "kws/dataset/word_sets.hpp"
#include "kws/io/wav.hpp"
#include "kws/labels/vocabulary.hpp"
#include "kws/rng.hpp"

namespace kws {

// Scheme-aware transcription of a word given its category role.
struct Transcriber {
  LabelScheme scheme = LabelScheme::phoneme;
  const Lexicon* lexicon = nullptr;

  std::vector<std::string> operator()(const std::string& word,
                                      CategoryRole role) const {
    return transcribe(word, role, scheme, lexicon);
  }
};

struct LabeledEntry {
  CorpusEntry entry;
  std::string category;              // keyword, _silence_ or _unknown_
  std::vector<std::string> tokens;   // training target
  std::string subset;  // org_kwd / org_unk / new_kwd / new_unk / silence
};

struct TaskDataset {
  std::vector<LabeledEntry> train;
  std::vector<LabeledEntry> validation;
  std::vector<LabeledEntry> test;
  std::vector<std::string> categories;
  Phase phase = Phase::base12;
  uint64_t seed = 0;
  // Train-split recordings of the new keywords, held aside as the pool the
  // few-shot examples are drawn from.
  std::vector<CorpusEntry> reserved_new_kwd;
};

struct SilencePlan {
  // Per split: how many silence clips to synthesize. Mirrors the unknown
  // balancing rule: round(mean org_kwd count of that split).
  int train = 0;
  int validation = 0;
  int test = 0;

  int of(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::validation: return validation;
      default: return test;
    }
  }
};

namespace detail {

inline long long round_to_int(double x) { return std::llround(x); }

inline double mean_org_kwd_count(
    const std::map<std::string, int>& counts_by_word,
    const std::vector<std::string>& org_kwd) {
  double total = 0.0;
  for (const auto& w : org_kwd) {
    auto it = counts_by_word.find(w);
    total += it == counts_by_word.end() ? 0 : it->second;
  }
  return total / static_cast<double>(org_kwd.size());
}

}  // namespace detail

inline SilencePlan plan_silence(const std::vector<CorpusEntry>& entries,
                                const WordSets& word_sets, double val_pct,
                                double test_pct) {
  std::map<Split, std::map<std::string, int>> counts;
  for (const auto& e : entries) {
    if (word_sets.role_of(e.word) != WordRole::org_kwd) continue;
    counts[assign_split(e.speaker_id, val_pct, test_pct)][e.word]++;
  }
  SilencePlan plan;
  plan.train = static_cast<int>(detail::round_to_int(
      detail::mean_org_kwd_count(counts[Split::train], word_sets.org_kwd)));
  plan.validation = static_cast<int>(detail::round_to_int(
      detail::mean_org_kwd_count(counts[Split::validation],
                                 word_sets.org_kwd)));
  plan.test = static_cast<int>(detail::round_to_int(
      detail::mean_org_kwd_count(counts[Split::test], word_sets.org_kwd)));
  return plan;
}

// Uniformly random fixed-duration crops of the background recordings.
// Only files at least duration_s long are eligible.
inline std::vector<AudioClip> synthesize_silence(
    const std::vector<std::string>& background_files, int count,
    double duration_s, uint64_t seed) {
  if (count < 0) throw UsageError("silence count must be >= 0");
  if (count == 0) return {};
  std::vector<AudioClip> sources;
  std::vector<size_t> usable;
  for (const auto& f : background_files) {
    AudioClip clip = wavio::read_wav(f);
    if (clip.duration_s() >= duration_s) usable.push_back(sources.size());
    sources.push_back(std::move(clip));
  }
  if (usable.empty()) {
    throw DataError(str_cat("no background file is at least ", duration_s,
                            " s long (", background_files.size(),
                            " file(s) checked)"));
  }
  Rng rng(seed);
  std::vector<AudioClip> clips;
  clips.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const AudioClip& src = sources[usable[rng.below(usable.size())]];
    const size_t want =
        static_cast<size_t>(duration_s * src.sample_rate + 0.5);
    const size_t max_offset = src.samples.size() - want;
    const size_t offset =
        max_offset == 0 ? 0 : static_cast<size_t>(rng.below(max_offset + 1));
    AudioClip out;
    out.sample_rate = src.sample_rate;
    out.samples.assign(src.samples.begin() + offset,
                       src.samples.begin() + offset + want);
    clips.push_back(std::move(out));
  }
  return clips;
}

// Writes synthesized silence clips as wav files and returns corpus entries
// for them, so silence flows through the same path-based pipeline as speech.
inline std::vector<CorpusEntry> materialize_silence(
    const std::vector<AudioClip>& clips, const std::string& dir,
    const std::string& tag) {
  std::filesystem::create_directories(dir);
  std::vector<CorpusEntry> entries;
  for (size_t i = 0; i < clips.size(); ++i) {
    CorpusEntry e;
    e.path = str_cat(dir, "/", tag, "_", i, ".wav");
    e.word = kSilenceCategory;
    e.speaker_id = str_cat("synthetic_", tag, "_", i);
    e.take = 0;
    e.duration_s = clips[i].duration_s();
    wavio::write_wav(e.path, clips[i]);
    entries.push_back(std::move(e));
  }
  return entries;
}

struct SilenceEntries {
  std::vector<CorpusEntry> train;
  std::vector<CorpusEntry> validation;
  std::vector<CorpusEntry> test;

  const std::vector<CorpusEntry>& of(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::validation: return validation;
      default: return test;
    }
  }
};

// Assembles the classification task from the raw corpus:
//  * categories are the original keywords plus _silence_ and _unknown_
//    (plus the new keywords in the extended phase),
//  * the training _unknown_ pool is downsampled to round(mean org_kwd
//    training count),
//  * train/validation unknowns come from org_unk only; the test pool also
//    carries new_unk, tagged by subset,
//  * new-keyword training recordings never enter the training lists; they
//    are returned as the reserved few-shot pool. In the extended phase the
//    new keywords appear as categories and their validation/test recordings
//    are included.
inline TaskDataset build_task_dataset(const std::vector<CorpusEntry>& entries,
                                      const SilenceEntries& silence,
                                      const WordSets& word_sets,
                                      double val_pct, double test_pct,
                                      Phase phase,
                                      const Transcriber& transcriber,
                                      uint64_t seed) {
  word_sets.validate();

  std::set<std::string> unassigned;
  for (const auto& e : entries) {
    if (word_sets.role_of(e.word) == WordRole::none) unassigned.insert(e.word);
  }
  if (!unassigned.empty()) {
    std::string words;
    for (const auto& w : unassigned) words += " " + w;
    throw DataError(
        "corpus words not assigned to any set (override the word sets to "
        "place them):" +
        words);
  }

  TaskDataset ds;
  ds.phase = phase;
  ds.seed = seed;
  ds.categories = word_sets.org_kwd;
  if (phase == Phase::extended) {
    ds.categories.insert(ds.categories.end(), word_sets.new_kwd.begin(),
                         word_sets.new_kwd.end());
  }
  ds.categories.push_back(kSilenceCategory);
  ds.categories.push_back(kUnknownCategory);

  std::map<std::string, int> train_kwd_counts;
  std::vector<CorpusEntry> train_unknown_pool;

  auto push = [&](std::vector<LabeledEntry>& list, const CorpusEntry& e,
                  const std::string& category, CategoryRole role,
                  const std::string& subset) {
    LabeledEntry le;
    le.entry = e;
    le.category = category;
    le.tokens = transcriber(e.word, role);
    le.subset = subset;
    list.push_back(std::move(le));
  };

  for (const auto& e : entries) {
    const Split split = assign_split(e.speaker_id, val_pct, test_pct);
    const WordRole role = word_sets.role_of(e.word);
    switch (role) {
      case WordRole::org_kwd:
        if (split == Split::train) train_kwd_counts[e.word]++;
        push(split == Split::train
                 ? ds.train
                 : (split == Split::validation ? ds.validation : ds.test),
             e, e.word, CategoryRole::keyword, "org_kwd");
        break;
      case WordRole::org_unk:
        if (split == Split::train) {
          train_unknown_pool.push_back(e);
        } else {
          push(split == Split::validation ? ds.validation : ds.test, e,
               kUnknownCategory, CategoryRole::unknown, "org_unk");
        }
        break;
      case WordRole::new_unk:
        // Evaluation-time only.
        if (split == Split::test) {
          push(ds.test, e, kUnknownCategory, CategoryRole::unknown, "new_unk");
        }
        break;
      case WordRole::new_kwd:
        if (split == Split::train) {
          ds.reserved_new_kwd.push_back(e);
        } else if (phase == Phase::extended) {
          push(split == Split::validation ? ds.validation : ds.test, e,
               e.word, CategoryRole::keyword, "new_kwd");
        }
        break;
      case WordRole::none:
        break;  // already rejected above
    }
  }

  // Balance the training _unknown_ category to the mean keyword count.
  const double mean = detail::mean_org_kwd_count(
      train_kwd_counts, word_sets.org_kwd);
  const size_t target = static_cast<size_t>(detail::round_to_int(mean));
  if (train_unknown_pool.size() < target) {
    throw DataError(str_cat("training unknown pool has ",
                            train_unknown_pool.size(), " entries, need ",
                            target, " (round of mean keyword count ", mean,
                            ")"));
  }
  std::sort(train_unknown_pool.begin(), train_unknown_pool.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) {
              return a.path < b.path;
            });
  Rng rng(Rng::derive(seed, "unknown_downsample"));
  for (const size_t idx :
       rng.sample_without_replacement(train_unknown_pool.size(), target)) {
    push(ds.train, train_unknown_pool[idx], kUnknownCategory,
         CategoryRole::unknown, "org_unk");
  }

  for (const Split split :
       {Split::train, Split::validation, Split::test}) {
    auto& list = split == Split::train
                     ? ds.train
                     : (split == Split::validation ? ds.validation : ds.test);
    for (const auto& e : silence.of(split)) {
      push(list, e, kSilenceCategory, CategoryRole::silence, "silence");
    }
  }

  std::sort(ds.reserved_new_kwd.begin(), ds.reserved_new_kwd.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) {
              return a.path < b.path;
            });
  return ds;
}

// f recordings per new keyword, sampled without replacement from the
// reserved pool.
struct FewShotSample {
  int f = 0;
  std::map<std::string, std::vector<CorpusEntry>> entries;
  uint64_t seed = 0;

  size_t total() const {
    size_t n = 0;
    for (const auto& [w, v] : entries) n += v.size();
    return n;
  }
};

inline FewShotSample sample_fewshot(
    const std::vector<CorpusEntry>& reserved,
    const std::vector<std::string>& words, int f, uint64_t seed) {
  if (f < 0) throw UsageError("few-shot f must be >= 0");
  std::map<std::string, std::vector<CorpusEntry>> by_word;
  for (const auto& e : reserved) by_word[e.word].push_back(e);
  std::string shortfall;
  for (const auto& w : words) {
    const size_t have = by_word.count(w) ? by_word[w].size() : 0;
    if (have < static_cast<size_t>(f)) {
      shortfall += str_cat(" ", w, "=", have);
    }
  }
  if (!shortfall.empty()) {
    throw DataError(str_cat("not enough reserved entries for f=", f,
                            "; per-word counts:", shortfall));
  }
  FewShotSample sample;
  sample.f = f;
  sample.seed = seed;
  for (const auto& w : words) {
    auto& pool = by_word[w];
    std::sort(pool.begin(), pool.end(),
              [](const CorpusEntry& a, const CorpusEntry& b) {
                return a.path < b.path;
              });
    Rng rng(Rng::derive(seed, "fewshot_" + w));
    std::vector<CorpusEntry> chosen;
    for (const size_t idx : rng.sample_without_replacement(
             pool.size(), static_cast<size_t>(f))) {
      chosen.push_back(pool[idx]);
    }
    sample.entries[w] = std::move(chosen);
  }
  return sample;
}

// Appends each few-shot recording once, labelled with its own category.
// When `replace_vocab` is given (retrain_replace / adapt), the transcription
// first passes through the UNK surgery against that vocabulary.
inline TaskDataset add_fewshot_entries(const TaskDataset& dataset,
                                       const FewShotSample& fewshot,
                                       const Transcriber& transcriber,
                                       const Vocabulary* replace_vocab) {
  TaskDataset out = dataset;
  for (const auto& [word, list] : fewshot.entries) {
    if (list.empty()) continue;
    if (std::find(out.categories.begin(), out.categories.end(), word) ==
        out.categories.end()) {
      throw DataError("few-shot word is not a category of this dataset: " +
                      word);
    }
    std::vector<std::string> tokens =
        transcriber(word, CategoryRole::keyword);
    if (replace_vocab != nullptr) {
      tokens = replace_missing_tokens(tokens, *replace_vocab);
    }
    for (const auto& e : list) {
      LabeledEntry le;
      le.entry = e;
      le.category = word;
      le.tokens = tokens;
      le.subset = "new_kwd";
      out.train.push_back(std::move(le));
    }
  }
  return out;
}

// Brings every few-shot entry to k occurrences per epoch by appending k-1
// extra copies of the row already present in the training list.
inline TaskDataset oversample(const TaskDataset& dataset,
                              const FewShotSample& fewshot, int k) {
  if (k < 1) throw UsageError("oversampling factor k must be >= 1");
  TaskDataset out = dataset;
  for (const auto& [word, list] : fewshot.entries) {
    for (const auto& e : list) {
      const auto it = std::find_if(
          dataset.train.begin(), dataset.train.end(),
          [&](const LabeledEntry& le) {
            return le.entry.path == e.path && le.category == word;
          });
      if (it == dataset.train.end()) {
        throw DataError("few-shot entry not present in training list: " +
                        e.path);
      }
      for (int i = 1; i < k; ++i) out.train.push_back(*it);
    }
  }
  return out;
}

// Manifest: one row per entry over all three splits, tab-separated with a
// header row. Columns: path, word, speaker, split, category, subset.
inline void write_manifest(const TaskDataset& dataset,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << "path\tword\tspeaker\tsplit\tcategory\tsubset\n";
  auto dump = [&](const std::vector<LabeledEntry>& list, const char* split) {
    for (const auto& le : list) {
      out << le.entry.path << "\t" << le.entry.word << "\t"
          << le.entry.speaker_id << "\t" << split << "\t" << le.category
          << "\t" << le.subset << "\n";
    }
  };
  dump(dataset.train, "train");
  dump(dataset.validation, "validation");
  dump(dataset.test, "test");
}

}  // namespace kws
