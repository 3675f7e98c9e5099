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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kws/common.hpp"
#include "kws/dataset/word_sets.hpp"
#include "kws/io/wav.hpp"

namespace kws {

// One recording: <root>/<word>/<speaker>_nohash_<take>.wav
struct CorpusEntry {
  std::string path;
  std::string word;
  std::string speaker_id;
  int take = 0;
  double duration_s = 0.0;
};

struct ScanResult {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> background_files;  // _background_noise_/*.wav
  int skipped = 0;
};

namespace detail {

// Parses "<speaker>_nohash_<take>.wav"; nullopt when the name does not fit.
inline std::optional<std::pair<std::string, int>> parse_clip_name(
    const std::string& stem) {
  const std::string marker = "_nohash_";
  const size_t pos = stem.find(marker);
  if (pos == 0 || pos == std::string::npos) return std::nullopt;
  const std::string speaker = stem.substr(0, pos);
  const std::string take_str = stem.substr(pos + marker.size());
  if (take_str.empty() ||
      !std::all_of(take_str.begin(), take_str.end(),
                   [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return std::make_pair(speaker, std::stoi(take_str));
}

}  // namespace detail

// Walks a Speech Commands style corpus. Files under _background_noise_ are
// listed separately for silence synthesis; unparsable filenames and word
// directories outside the corpus inventory are skipped with a warning.
inline ScanResult scan_corpus(const std::string& root,
                              bool read_durations = true) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw DataError("corpus root does not exist: " + root);
  }
  ScanResult result;
  std::vector<std::string> word_dirs;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (dir.is_directory()) word_dirs.push_back(dir.path().filename());
  }
  std::sort(word_dirs.begin(), word_dirs.end());
  const auto& known = corpus_words();
  for (const auto& word : word_dirs) {
    const fs::path dir = fs::path(root) / word;
    if (word == kBackgroundDir) {
      std::vector<std::string> files;
      for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().extension() == ".wav") files.push_back(f.path().string());
      }
      std::sort(files.begin(), files.end());
      result.background_files = std::move(files);
      continue;
    }
    if (std::find(known.begin(), known.end(), word) == known.end()) {
      warn("skipping unrecognized word directory: " + word);
      continue;
    }
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(dir)) {
      if (f.path().extension() == ".wav") files.push_back(f.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string stem = fs::path(file).stem().string();
      const auto parsed = detail::parse_clip_name(stem);
      if (!parsed) {
        warn("skipping unparsable clip name: " + file);
        ++result.skipped;
        continue;
      }
      CorpusEntry entry;
      entry.path = file;
      entry.word = word;
      entry.speaker_id = parsed->first;
      entry.take = parsed->second;
      entry.duration_s =
          read_durations ? wavio::read_wav_duration_s(file) : 1.0;
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

}  // namespace kws
