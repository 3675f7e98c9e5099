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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kws/dataset/split.hpp"
#include "kws/dataset/word_sets.hpp"
#include "kws/labels/lexicon.hpp"
#include "kws/labels/vocabulary.hpp"

namespace kws {

enum class MatchRule { exact_keyword, silence, fallback_unknown };

struct CategoryPrediction {
  std::string category;
  MatchRule rule = MatchRule::fallback_unknown;
};

// Maps decoded token sequences onto task categories: an exact match with a
// keyword's transcription names that keyword, silence (a bare SIL token or
// an empty decode) names _silence_, and everything else falls back to
// _unknown_. Matching is exact-sequence by design: a fuzzy match would
// silently absorb near-miss hypotheses into the keyword classes.
class CategoryMapper {
 public:
  // When `output_vocab` is given, every keyword transcription first passes
  // through replace_missing_tokens against it, so a model whose output layer
  // lacks the new keywords' tokens is matched against the surgered sequences
  // it can actually emit. If two keywords collapse onto the same surgered
  // sequence the first one in `keywords` order keeps it.
  CategoryMapper(const std::vector<std::string>& keywords, LabelScheme scheme,
                 const Lexicon* lexicon,
                 const Vocabulary* output_vocab = nullptr) {
    for (const auto& word : keywords) {
      if (word == kSilenceCategory || word == kUnknownCategory) continue;
      std::vector<std::string> trans =
          transcribe(word, CategoryRole::keyword, scheme, lexicon);
      if (output_vocab != nullptr) {
        trans = replace_missing_tokens(trans, *output_vocab);
      }
      lookup_.emplace(std::move(trans), word);
    }
  }

  CategoryPrediction map(const std::vector<std::string>& decoded) const {
    if (decoded.empty() ||
        (decoded.size() == 1 && decoded[0] == kSilToken)) {
      return {kSilenceCategory, MatchRule::silence};
    }
    const auto it = lookup_.find(decoded);
    if (it != lookup_.end()) {
      return {it->second, MatchRule::exact_keyword};
    }
    return {kUnknownCategory, MatchRule::fallback_unknown};
  }

 private:
  std::map<std::vector<std::string>, std::string> lookup_;
};

inline CategoryPrediction map_to_category(
    const std::vector<std::string>& decoded, LabelScheme scheme,
    const Lexicon* lexicon, const std::vector<std::string>& keywords) {
  return CategoryMapper(keywords, scheme, lexicon).map(decoded);
}

// One scored utterance.
struct EvalItem {
  std::string word;       // true spoken word ("" for synthesized silence)
  std::string reference;  // true category
  std::string predicted;  // mapped decode
  std::string subset;     // org_kwd / org_unk / new_kwd / new_unk / silence
  Split split = Split::test;
};

// 100 * (#misclassified / #selected); absent (nullopt) when fewer than one
// utterance matches the filter, so an empty subset is never reported as a
// perfect score.
inline std::optional<double> classification_error(
    const std::vector<EvalItem>& items,
    const std::function<bool(const EvalItem&)>& filter) {
  int n = 0;
  int wrong = 0;
  for (const auto& item : items) {
    if (filter && !filter(item)) continue;
    ++n;
    if (item.predicted != item.reference) ++wrong;
  }
  if (n == 0) return std::nullopt;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(n);
}

}  // namespace kws
