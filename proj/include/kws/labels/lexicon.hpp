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

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kws/common.hpp"

namespace kws {

// Pronunciation lexicon: one pronunciation per word. The repo ships a frozen
// lexicon for the whole corpus vocabulary in data/lexicon.txt so phoneme
// experiments do not depend on any external dictionary.
struct Lexicon {
  std::map<std::string, std::vector<std::string>> entries;

  bool has(const std::string& word) const { return entries.count(word) > 0; }

  const std::vector<std::string>& pronunciation(const std::string& word) const {
    auto it = entries.find(word);
    if (it == entries.end()) {
      throw DataError("word has no lexicon entry: " + word);
    }
    return it->second;
  }
};

// Parses lines of the form "WORD PH1 PH2 ...". Blank lines and lines starting
// with '#' are ignored. A duplicate word wins with its last entry (warning);
// a word with no phonemes is an error.
inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  Lexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string word;
    iss >> word;
    if (word.empty()) continue;
    std::vector<std::string> phones;
    std::string tok;
    while (iss >> tok) phones.push_back(tok);
    if (phones.empty()) {
      throw DataError(str_cat("lexicon line ", line_no,
                              ": empty pronunciation for word '", word, "'"));
    }
    if (lex.entries.count(word)) {
      warn(str_cat("lexicon line ", line_no, ": duplicate entry for '", word,
                   "', keeping the later one"));
    }
    lex.entries[word] = std::move(phones);
  }
  return lex;
}

}  // namespace kws
