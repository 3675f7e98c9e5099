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

// Synthetic miniature corpus used by the unit and acceptance suites. Each
// phoneme is rendered as a fixed tone, so a word becomes a recognizable tone
// sequence and the task is learnable from a handful of CPU-trained examples.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kws/audio/fbank.hpp"
#include "kws/common.hpp"
#include "kws/dataset/split.hpp"
#include "kws/io/wav.hpp"
#include "kws/labels/lexicon.hpp"
#include "kws/rng.hpp"

namespace kws::testing {

// Swallows warnings for the current scope, so expected skip/rollback chatter
// from exercising those paths does not pollute test output.
class SilenceWarnings {
 public:
  SilenceWarnings() : saved_(warning_sink()) {
    warning_sink() = [](const std::string&) {};
  }
  ~SilenceWarnings() { warning_sink() = saved_; }
  SilenceWarnings(const SilenceWarnings&) = delete;
  SilenceWarnings& operator=(const SilenceWarnings&) = delete;

 private:
  std::function<void(const std::string&)> saved_;
};

inline const Lexicon& repo_lexicon() {
  static const Lexicon lex =
      load_lexicon(std::string(KWS_SOURCE_DIR) + "/data/lexicon.txt");
  return lex;
}

// Distinct tone per phoneme, spaced in mel so adjacent phonemes land in
// different filterbank bins.
inline double phoneme_tone_hz(const std::string& phoneme) {
  static const std::vector<std::string> inventory = {
      "AA", "AE", "AH", "AO", "AW", "AY", "B",  "D",  "EH", "ER", "EY",
      "F",  "G",  "HH", "IH", "IY", "K",  "L",  "M",  "N",  "OW", "P",
      "R",  "S",  "SH", "T",  "TH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};
  size_t index = 0;
  for (size_t i = 0; i < inventory.size(); ++i) {
    if (inventory[i] == phoneme) {
      index = i;
      break;
    }
  }
  const double mel = 500.0 + 55.0 * static_cast<double>(index);
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

inline AudioClip synth_word_clip(const std::string& word, uint64_t jitter_seed,
                                 double duration_s = 1.0) {
  const auto& phones = repo_lexicon().pronunciation(word);
  Rng rng(jitter_seed);
  const double freq_jitter = 1.0 + 0.02 * (rng.uniform() - 0.5);
  const double amp = 0.22 + 0.05 * rng.uniform();

  AudioClip clip;
  clip.sample_rate = 16000;
  const size_t n = static_cast<size_t>(duration_s * clip.sample_rate + 0.5);
  clip.samples.assign(n, 0.0);

  const double lead = 0.1, tail = 0.1;
  const double speech = duration_s - lead - tail;
  const double seg = speech / static_cast<double>(phones.size());
  for (size_t p = 0; p < phones.size(); ++p) {
    const double f = phoneme_tone_hz(phones[p]) * freq_jitter;
    const double phase = 2.0 * M_PI * rng.uniform();
    const size_t start =
        static_cast<size_t>((lead + seg * static_cast<double>(p)) * 16000);
    const size_t stop =
        static_cast<size_t>((lead + seg * static_cast<double>(p + 1)) * 16000);
    for (size_t i = start; i < stop && i < n; ++i) {
      const double t = static_cast<double>(i) / 16000.0;
      // Short cosine ramp at the segment edges.
      const double into = std::min(static_cast<double>(i - start),
                                   static_cast<double>(stop - i)) /
                          16000.0;
      const double env = std::min(1.0, into / 0.01);
      clip.samples[i] = amp * env *
                        (std::sin(2.0 * M_PI * f * t + phase) +
                         0.3 * std::sin(2.0 * M_PI * 2.0 * f * t + phase));
    }
  }
  for (size_t i = 0; i < n; ++i) {
    clip.samples[i] += 0.002 * (rng.uniform() - 0.5);
  }
  return clip;
}

inline AudioClip synth_background(uint64_t seed, double duration_s = 10.0) {
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = 16000;
  const size_t n = static_cast<size_t>(duration_s * clip.sample_rate + 0.5);
  clip.samples.resize(n);
  double state = 0.0;
  for (size_t i = 0; i < n; ++i) {
    // One-pole lowpass over white noise: quiet rumble.
    state = 0.98 * state + 0.02 * (rng.uniform() - 0.5);
    clip.samples[i] = 2.0 * state;
  }
  return clip;
}

// Speaker names whose hash buckets land in the requested split under the
// default 10/10 percentages.
inline std::vector<std::string> speakers_for_split(Split want, int count,
                                                   int salt = 0) {
  std::vector<std::string> out;
  for (int i = 0; static_cast<int>(out.size()) < count; ++i) {
    const std::string name = str_cat("spk", salt, "x", i);
    if (assign_split(name, 10.0, 10.0) == want) out.push_back(name);
  }
  return out;
}

struct ToyCorpusSpec {
  std::vector<std::string> words;
  int train_speakers = 5;
  int val_speakers = 2;
  int test_speakers = 2;
  int takes = 1;
  uint64_t seed = 1234;
  int background_files = 2;
};

// Writes <dir>/<word>/<speaker>_nohash_<take>.wav for every combination,
// plus background noise recordings. Every speaker records every word.
inline std::string generate_toy_corpus(const std::string& dir,
                                       const ToyCorpusSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> speakers;
  for (const auto& s : speakers_for_split(Split::train, spec.train_speakers))
    speakers.push_back(s);
  for (const auto& s :
       speakers_for_split(Split::validation, spec.val_speakers))
    speakers.push_back(s);
  for (const auto& s : speakers_for_split(Split::test, spec.test_speakers))
    speakers.push_back(s);

  for (const auto& word : spec.words) {
    fs::create_directories(fs::path(dir) / word);
    for (const auto& speaker : speakers) {
      for (int take = 0; take < spec.takes; ++take) {
        const uint64_t jitter =
            Rng::derive(spec.seed, word + "/" + speaker) + take;
        const AudioClip clip = synth_word_clip(word, jitter);
        wavio::write_wav(
            (fs::path(dir) / word /
             str_cat(speaker, "_nohash_", take, ".wav")).string(),
            clip);
      }
    }
  }
  fs::create_directories(fs::path(dir) / "_background_noise_");
  for (int i = 0; i < spec.background_files; ++i) {
    wavio::write_wav((fs::path(dir) / "_background_noise_" /
                      str_cat("noise_", i, ".wav")).string(),
                     synth_background(spec.seed + 77 + i));
  }
  return dir;
}

inline std::string fresh_temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / ("kwseq_" + tag);
  fs::remove_all(base);
  fs::create_directories(base);
  return base.string();
}

}  // namespace kws::testing
