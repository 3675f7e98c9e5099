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
#include <set>
#include <string>
#include <vector>

#include "kws/common.hpp"

namespace kws {

inline const char* kSilenceCategory = "_silence_";
inline const char* kUnknownCategory = "_unknown_";
inline const char* kBackgroundDir = "_background_noise_";

// The 35 words of the corpus, used to validate directory names at scan time.
inline const std::vector<std::string>& corpus_words() {
  static const std::vector<std::string> words = {
      "backward", "bed",   "bird",  "cat",    "dog",    "down",  "eight",
      "five",     "follow", "forward", "four", "go",    "happy", "house",
      "learn",    "left",  "marvin", "nine",  "no",     "off",   "on",
      "one",      "right", "seven", "sheila", "six",    "stop",  "three",
      "tree",     "two",   "up",    "visual", "wow",    "yes",   "zero"};
  return words;
}

enum class WordRole { org_kwd, org_unk, new_kwd, new_unk, none };

inline const char* word_role_name(WordRole r) {
  switch (r) {
    case WordRole::org_kwd: return "org_kwd";
    case WordRole::org_unk: return "org_unk";
    case WordRole::new_kwd: return "new_kwd";
    case WordRole::new_unk: return "new_unk";
    default: return "none";
  }
}

// Partition of the corpus words into original keywords, training-time
// unknowns, few-shot keywords, and evaluation-only unknowns.
//
// The defaults cover 34 of the 35 corpus words ("backward" is left
// unassigned); a corpus that contains entries for an unassigned word cannot
// be turned into a task dataset unless the sets are overridden to place the
// word somewhere.
struct WordSets {
  std::vector<std::string> org_kwd = {"down", "go",   "left", "no",  "off",
                                      "on",   "right", "stop", "up", "yes"};
  std::vector<std::string> org_unk = {"bed",    "bird",   "cat",  "dog",
                                      "happy",  "house",  "marvin",
                                      "sheila", "tree",   "visual", "wow"};
  std::vector<std::string> new_kwd = {"forward", "four", "one",
                                      "three",   "two",  "zero"};
  std::vector<std::string> new_unk = {"eight", "five",  "follow", "learn",
                                      "nine",  "seven", "six"};

  WordRole role_of(const std::string& word) const {
    auto in = [&](const std::vector<std::string>& v) {
      return std::find(v.begin(), v.end(), word) != v.end();
    };
    if (in(org_kwd)) return WordRole::org_kwd;
    if (in(org_unk)) return WordRole::org_unk;
    if (in(new_kwd)) return WordRole::new_kwd;
    if (in(new_unk)) return WordRole::new_unk;
    return WordRole::none;
  }

  // Pairwise disjointness is required for any configuration; only the
  // defaults are additionally pinned to the published table.
  void validate() const {
    std::set<std::string> seen;
    size_t total = 0;
    for (const auto* set : {&org_kwd, &org_unk, &new_kwd, &new_unk}) {
      total += set->size();
      for (const auto& w : *set) seen.insert(w);
    }
    if (seen.size() != total) {
      throw DataError("word sets are not pairwise disjoint");
    }
    if (org_kwd.empty()) {
      throw DataError("org_kwd must contain at least one word");
    }
  }
};

}  // namespace kws
