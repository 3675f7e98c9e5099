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
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kws/common.hpp"
#include "kws/dataset/word_sets.hpp"
#include "kws/labels/lexicon.hpp"

namespace kws {

enum class LabelScheme { phoneme, grapheme, word };

inline const char* label_scheme_name(LabelScheme s) {
  switch (s) {
    case LabelScheme::phoneme: return "phoneme";
    case LabelScheme::grapheme: return "grapheme";
    default: return "word";
  }
}

inline LabelScheme parse_label_scheme(const std::string& s) {
  if (s == "phoneme") return LabelScheme::phoneme;
  if (s == "grapheme") return LabelScheme::grapheme;
  if (s == "word") return LabelScheme::word;
  throw UsageError("unknown label scheme '" + s +
                   "' (expected phoneme, grapheme or word)");
}

// The unknown-word token: a dedicated UNK phoneme for the phoneme scheme,
// the character '?' for grapheme and word outputs.
inline std::string unk_token_for(LabelScheme scheme) {
  return scheme == LabelScheme::phoneme ? "UNK" : "?";
}

inline const char* kSilToken = "SIL";
inline const char* kBlankToken = "<blank>";
inline const char* kSosToken = "<sos>";
inline const char* kEosToken = "<eos>";

enum class Phase { base12, extended };

enum class CategoryRole { keyword, unknown, silence };

// Token sequence for one training target. Keywords expand per the scheme;
// every unknown-category word collapses to the single UNK token, and silence
// is the single SIL token.
inline std::vector<std::string> transcribe(const std::string& word,
                                           CategoryRole role,
                                           LabelScheme scheme,
                                           const Lexicon* lexicon) {
  switch (role) {
    case CategoryRole::silence:
      return {kSilToken};
    case CategoryRole::unknown:
      return {unk_token_for(scheme)};
    case CategoryRole::keyword:
      break;
  }
  switch (scheme) {
    case LabelScheme::word:
      return {word};
    case LabelScheme::grapheme: {
      std::vector<std::string> letters;
      letters.reserve(word.size());
      for (const char c : word) letters.emplace_back(1, c);
      return letters;
    }
    case LabelScheme::phoneme:
      if (lexicon == nullptr || !lexicon->has(word)) {
        throw DataError("keyword '" + word +
                        "' has no lexicon entry (phoneme scheme)");
      }
      return lexicon->pronunciation(word);
  }
  throw DataError("unreachable");
}

// Ordered token inventory. Indices are stable across save/load: the specials
// occupy the first five slots, content tokens follow in sorted order.
struct Vocabulary {
  std::vector<std::string> tokens;
  LabelScheme scheme = LabelScheme::phoneme;

  int blank_id() const { return 0; }
  int sos_id() const { return 1; }
  int eos_id() const { return 2; }
  int unk_id() const { return 3; }
  int sil_id() const { return 4; }

  int size() const { return static_cast<int>(tokens.size()); }

  bool contains(const std::string& token) const {
    return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
  }

  int id(const std::string& token) const {
    auto it = std::find(tokens.begin(), tokens.end(), token);
    if (it == tokens.end()) {
      throw DataError("token not in vocabulary: '" + token + "'");
    }
    return static_cast<int>(it - tokens.begin());
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) {
      throw DataError(str_cat("token id out of range: ", id));
    }
    return tokens[static_cast<size_t>(id)];
  }

  std::vector<int> encode(const std::vector<std::string>& seq) const {
    std::vector<int> ids;
    ids.reserve(seq.size());
    for (const auto& t : seq) ids.push_back(id(t));
    return ids;
  }

  std::vector<std::string> decode(const std::vector<int>& ids) const {
    std::vector<std::string> seq;
    seq.reserve(ids.size());
    for (const int i : ids) seq.push_back(token(i));
    return seq;
  }

  void validate() const {
    if (size() < 5 || tokens[0] != kBlankToken || tokens[1] != kSosToken ||
        tokens[2] != kEosToken || tokens[3] != unk_token_for(scheme) ||
        tokens[4] != kSilToken) {
      throw DataError("vocabulary specials are malformed");
    }
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    if (uniq.size() != tokens.size()) {
      throw DataError("vocabulary contains duplicate tokens");
    }
  }
};

// Builds the vocabulary reachable from the keyword transcriptions of the
// given phase: org_kwd only for base-12, org_kwd plus new_kwd when extended.
// Unknown/silence reach only their special tokens, which are always present.
inline Vocabulary build_vocabulary(LabelScheme scheme,
                                   const WordSets& word_sets,
                                   const Lexicon* lexicon, Phase phase) {
  std::set<std::string> content;
  auto add_word = [&](const std::string& w) {
    for (const auto& t :
         transcribe(w, CategoryRole::keyword, scheme, lexicon)) {
      content.insert(t);
    }
  };
  for (const auto& w : word_sets.org_kwd) add_word(w);
  if (phase == Phase::extended) {
    for (const auto& w : word_sets.new_kwd) add_word(w);
  }
  Vocabulary vocab;
  vocab.scheme = scheme;
  vocab.tokens = {kBlankToken, kSosToken, kEosToken, unk_token_for(scheme),
                  kSilToken};
  for (const auto& t : content) {
    if (!vocab.contains(t)) vocab.tokens.push_back(t);
  }
  vocab.validate();
  return vocab;
}

// Token-level label surgery: anything outside the vocabulary becomes the
// UNK token. Length-preserving and idempotent.
inline std::vector<std::string> replace_missing_tokens(
    const std::vector<std::string>& trans, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(trans.size());
  const std::string unk = unk_token_for(vocab.scheme);
  for (const auto& t : trans) {
    out.push_back(vocab.contains(t) ? t : unk);
  }
  return out;
}

// One token per line; the line number is the token id.
inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& t : vocab.tokens) out << t << "\n";
}

inline Vocabulary load_vocabulary(const std::string& path,
                                  LabelScheme scheme) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  vocab.scheme = scheme;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.tokens.push_back(line);
  }
  vocab.validate();
  return vocab;
}

inline std::string join_tokens(const std::vector<std::string>& tokens,
                               const std::string& sep = " ") {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace kws
