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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kws/audio/fbank.hpp"
#include "kws/common.hpp"
#include "kws/dataset/word_sets.hpp"
#include "kws/fewshot/strategies.hpp"
#include "kws/fewshot/sweep.hpp"
#include "kws/labels/vocabulary.hpp"
#include "kws/model/beam.hpp"
#include "kws/model/config.hpp"
#include "kws/model/trainer.hpp"

namespace kws {

// Environment variable consulted when no corpus root is given in the config
// file or on the command line.
inline constexpr const char* kCorpusEnvVar = "KWSEQ_CORPUS";

// Few-shot settings shared by the fewshot and sweep commands. `strategy` is
// kept as a string so an invalid value surfaces as a usage error with the
// valid spellings, not as a parse crash.
struct FewShotOptions {
  std::string strategy = "retrain";
  int f = 10;             // examples per new keyword
  int k = 10;             // oversampling factor (retrain family)
  double lr = 3.0;        // adaptation step size (adapt only)
  int adapt_epochs = 10;  // adaptation budget; best epoch picked on val
  bool include_fillers = false;  // adapt on silence/unknown too
  std::string checkpoint;        // base model to adapt
};

// Grid axes for the sweep command. The swept strategy and f come from
// FewShotOptions; retrain-family grids use `k`, adapt grids use `lr` x
// `epochs`. Empty `seeds` means: derive `repeats` run seeds from the global
// seed.
struct SweepOptions {
  std::vector<int> k = {1, 3, 10, 30, 100, 300};
  std::vector<double> lr = {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
  std::vector<int> epochs = {10};
  int repeats = 10;
  std::vector<uint64_t> seeds;
};

// Everything a command run depends on, resolvable from (in order of
// precedence) command-line flags, a JSON config file, and built-in defaults.
// The resolved config is echoed into the run's output directory so any
// result can be reproduced from the artifacts alone.
struct RunConfig {
  std::string corpus_root;       // falls back to $KWSEQ_CORPUS
  std::string out_dir = "runs";  // results land in <out_dir>/<command>/<tag>
  std::string scheme = "phoneme";
  std::string lexicon = "data/lexicon.txt";  // phoneme scheme only
  uint64_t seed = 0;
  double val_pct = 10.0;
  double test_pct = 10.0;
  double silence_duration_s = 1.0;
  int workers = 1;             // sweep parallelism
  bool cache_features = true;  // keep computed filterbanks in memory
  WordSets words;
  FbankConfig features;  // num_bins is bound to model.feature_dim
  ModelConfig model;
  TrainOptions train;
  DecodeOptions decode;
  FewShotOptions fewshot;
  SweepOptions sweep;

  LabelScheme label_scheme() const { return parse_label_scheme(scheme); }

  void validate() const;
  nlohmann::json to_json() const;

  bool operator==(const RunConfig& other) const {
    return to_json() == other.to_json();
  }
};

namespace detail {

inline void require_known_keys(const nlohmann::json& given,
                               const nlohmann::json& reference,
                               const std::string& scope) {
  for (const auto& [key, value] : given.items()) {
    (void)value;
    if (reference.contains(key)) continue;
    std::string valid;
    for (const auto& [known, unused] : reference.items()) {
      (void)unused;
      if (!valid.empty()) valid += ", ";
      valid += known;
    }
    throw UsageError(str_cat("unknown config key \"", scope, key,
                             "\" (valid keys: ", valid, ")"));
  }
}

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

inline long long parse_integer_flag(const std::string& key,
                                    const std::string& value) {
  try {
    size_t used = 0;
    const long long parsed = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw UsageError(
        str_cat("flag ", key, " expects an integer, got \"", value, "\""));
  }
}

inline double parse_number_flag(const std::string& key,
                                const std::string& value) {
  try {
    size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw UsageError(
        str_cat("flag ", key, " expects a number, got \"", value, "\""));
  }
}

}  // namespace detail

inline nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["corpus_root"] = corpus_root;
  j["out_dir"] = out_dir;
  j["scheme"] = scheme;
  j["lexicon"] = lexicon;
  j["seed"] = seed;
  j["val_pct"] = val_pct;
  j["test_pct"] = test_pct;
  j["silence_duration_s"] = silence_duration_s;
  j["workers"] = workers;
  j["cache_features"] = cache_features;
  j["words"] = nlohmann::json{{"org_kwd", words.org_kwd},
                              {"org_unk", words.org_unk},
                              {"new_kwd", words.new_kwd},
                              {"new_unk", words.new_unk}};
  j["features"] = nlohmann::json{{"frame_length_ms", features.frame_length_ms},
                                 {"frame_shift_ms", features.frame_shift_ms},
                                 {"fmin_hz", features.fmin_hz},
                                 {"fmax_hz", features.fmax_hz},
                                 {"log_floor", features.log_floor},
                                 {"sample_rate", features.sample_rate}};
  j["model"] = model.to_json();
  j["train"] = nlohmann::json{{"epochs", train.epochs},
                              {"batch_size", train.batch_size},
                              {"grad_clip", train.grad_clip},
                              {"lr", train.lr},
                              {"rho", train.rho},
                              {"eps", train.eps}};
  j["decode"] = nlohmann::json{{"beam_size", decode.beam_size},
                               {"ctc_weight", decode.ctc_weight},
                               {"max_len_ratio", decode.max_len_ratio}};
  j["fewshot"] = nlohmann::json{{"strategy", fewshot.strategy},
                                {"f", fewshot.f},
                                {"k", fewshot.k},
                                {"lr", fewshot.lr},
                                {"adapt_epochs", fewshot.adapt_epochs},
                                {"include_fillers", fewshot.include_fillers},
                                {"checkpoint", fewshot.checkpoint}};
  j["sweep"] = nlohmann::json{{"k", sweep.k},
                              {"lr", sweep.lr},
                              {"epochs", sweep.epochs},
                              {"repeats", sweep.repeats},
                              {"seeds", sweep.seeds}};
  return j;
}

inline void RunConfig::validate() const {
  const LabelScheme parsed_scheme = parse_label_scheme(scheme);
  if (parsed_scheme == LabelScheme::phoneme && lexicon.empty()) {
    throw UsageError(
        "scheme \"phoneme\" needs a pronunciation lexicon; set \"lexicon\" "
        "in the config or pass --lexicon");
  }
  if (val_pct <= 0.0 || test_pct <= 0.0 || val_pct + test_pct >= 100.0) {
    throw UsageError(str_cat("val_pct/test_pct must be positive and sum to "
                             "less than 100, got ",
                             val_pct, "/", test_pct));
  }
  if (silence_duration_s <= 0.0) {
    throw UsageError("silence_duration_s must be positive");
  }
  if (workers < 1) throw UsageError("workers must be >= 1");
  if (features.frame_length_ms <= 0.0 || features.frame_shift_ms <= 0.0 ||
      features.sample_rate < 1) {
    throw UsageError("feature frame parameters must be positive");
  }
  if (train.epochs < 0 || train.batch_size < 1 || train.lr <= 0.0) {
    throw UsageError(
        "train.epochs must be >= 0, train.batch_size >= 1, train.lr > 0");
  }
  if (decode.beam_size < 1 || decode.ctc_weight < 0.0 ||
      decode.ctc_weight > 1.0 || decode.max_len_ratio <= 0.0) {
    throw UsageError("decode options out of range");
  }
  parse_strategy(fewshot.strategy);  // throws on unknown spellings
  if (fewshot.f < 0) throw UsageError("fewshot.f must be >= 0");
  if (fewshot.k < 1) throw UsageError("fewshot.k must be >= 1");
  if (fewshot.lr <= 0.0) throw UsageError("fewshot.lr must be > 0");
  if (fewshot.adapt_epochs < 0) {
    throw UsageError("fewshot.adapt_epochs must be >= 0");
  }
  if (sweep.repeats < 1) throw UsageError("sweep.repeats must be >= 1");
  if (!sweep.seeds.empty() &&
      sweep.seeds.size() != static_cast<size_t>(sweep.repeats)) {
    throw UsageError(str_cat("sweep.seeds lists ", sweep.seeds.size(),
                             " seeds but sweep.repeats is ", sweep.repeats));
  }
  words.validate();
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  const nlohmann::json reference = RunConfig{}.to_json();
  detail::require_known_keys(j, reference, "");

  RunConfig cfg;
  detail::maybe_get(j, "corpus_root", &cfg.corpus_root);
  detail::maybe_get(j, "out_dir", &cfg.out_dir);
  detail::maybe_get(j, "scheme", &cfg.scheme);
  detail::maybe_get(j, "lexicon", &cfg.lexicon);
  detail::maybe_get(j, "seed", &cfg.seed);
  detail::maybe_get(j, "val_pct", &cfg.val_pct);
  detail::maybe_get(j, "test_pct", &cfg.test_pct);
  detail::maybe_get(j, "silence_duration_s", &cfg.silence_duration_s);
  detail::maybe_get(j, "workers", &cfg.workers);
  detail::maybe_get(j, "cache_features", &cfg.cache_features);

  if (j.contains("words")) {
    const auto& w = j.at("words");
    detail::require_known_keys(w, reference.at("words"), "words.");
    detail::maybe_get(w, "org_kwd", &cfg.words.org_kwd);
    detail::maybe_get(w, "org_unk", &cfg.words.org_unk);
    detail::maybe_get(w, "new_kwd", &cfg.words.new_kwd);
    detail::maybe_get(w, "new_unk", &cfg.words.new_unk);
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    detail::require_known_keys(f, reference.at("features"), "features.");
    detail::maybe_get(f, "frame_length_ms", &cfg.features.frame_length_ms);
    detail::maybe_get(f, "frame_shift_ms", &cfg.features.frame_shift_ms);
    detail::maybe_get(f, "fmin_hz", &cfg.features.fmin_hz);
    detail::maybe_get(f, "fmax_hz", &cfg.features.fmax_hz);
    detail::maybe_get(f, "log_floor", &cfg.features.log_floor);
    detail::maybe_get(f, "sample_rate", &cfg.features.sample_rate);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::require_known_keys(m, reference.at("model"), "model.");
    nlohmann::json merged = reference.at("model");
    merged.update(m);
    cfg.model = ModelConfig::from_json(merged);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::require_known_keys(t, reference.at("train"), "train.");
    detail::maybe_get(t, "epochs", &cfg.train.epochs);
    detail::maybe_get(t, "batch_size", &cfg.train.batch_size);
    detail::maybe_get(t, "grad_clip", &cfg.train.grad_clip);
    detail::maybe_get(t, "lr", &cfg.train.lr);
    detail::maybe_get(t, "rho", &cfg.train.rho);
    detail::maybe_get(t, "eps", &cfg.train.eps);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    detail::require_known_keys(d, reference.at("decode"), "decode.");
    detail::maybe_get(d, "beam_size", &cfg.decode.beam_size);
    detail::maybe_get(d, "ctc_weight", &cfg.decode.ctc_weight);
    detail::maybe_get(d, "max_len_ratio", &cfg.decode.max_len_ratio);
  }
  if (j.contains("fewshot")) {
    const auto& f = j.at("fewshot");
    detail::require_known_keys(f, reference.at("fewshot"), "fewshot.");
    detail::maybe_get(f, "strategy", &cfg.fewshot.strategy);
    detail::maybe_get(f, "f", &cfg.fewshot.f);
    detail::maybe_get(f, "k", &cfg.fewshot.k);
    detail::maybe_get(f, "lr", &cfg.fewshot.lr);
    detail::maybe_get(f, "adapt_epochs", &cfg.fewshot.adapt_epochs);
    detail::maybe_get(f, "include_fillers", &cfg.fewshot.include_fillers);
    detail::maybe_get(f, "checkpoint", &cfg.fewshot.checkpoint);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::require_known_keys(s, reference.at("sweep"), "sweep.");
    detail::maybe_get(s, "k", &cfg.sweep.k);
    detail::maybe_get(s, "lr", &cfg.sweep.lr);
    detail::maybe_get(s, "epochs", &cfg.sweep.epochs);
    detail::maybe_get(s, "repeats", &cfg.sweep.repeats);
    detail::maybe_get(s, "seeds", &cfg.sweep.seeds);
  }
  return cfg;
}

// Applies one command-line override onto a config loaded from file (or from
// defaults). Flags always win over file values. `epochs` covers both the
// base training budget and the adaptation budget so the one flag does the
// expected thing under every command.
inline void apply_override(RunConfig* cfg, const std::string& key,
                           const std::string& value) {
  if (key == "corpus") {
    cfg->corpus_root = value;
  } else if (key == "out") {
    cfg->out_dir = value;
  } else if (key == "scheme") {
    cfg->scheme = value;
  } else if (key == "lexicon") {
    cfg->lexicon = value;
  } else if (key == "seed") {
    cfg->seed =
        static_cast<uint64_t>(detail::parse_integer_flag("--seed", value));
  } else if (key == "f") {
    cfg->fewshot.f =
        static_cast<int>(detail::parse_integer_flag("--f", value));
  } else if (key == "k") {
    cfg->fewshot.k =
        static_cast<int>(detail::parse_integer_flag("--k", value));
  } else if (key == "lr") {
    cfg->fewshot.lr = detail::parse_number_flag("--lr", value);
  } else if (key == "epochs") {
    const int n =
        static_cast<int>(detail::parse_integer_flag("--epochs", value));
    cfg->train.epochs = n;
    cfg->fewshot.adapt_epochs = n;
  } else if (key == "beam") {
    cfg->decode.beam_size =
        static_cast<int>(detail::parse_integer_flag("--beam", value));
  } else if (key == "repeats") {
    cfg->sweep.repeats =
        static_cast<int>(detail::parse_integer_flag("--repeats", value));
  } else if (key == "workers") {
    cfg->workers =
        static_cast<int>(detail::parse_integer_flag("--workers", value));
  } else if (key == "strategy") {
    cfg->fewshot.strategy = value;
  } else if (key == "checkpoint") {
    cfg->fewshot.checkpoint = value;
  } else if (key == "fillers") {
    cfg->fewshot.include_fillers =
        detail::parse_integer_flag("--fillers", value) != 0;
  } else {
    throw UsageError(str_cat(
        "unknown override \"", key,
        "\" (valid: corpus, out, scheme, lexicon, seed, f, k, lr, epochs, "
        "beam, repeats, workers, strategy, checkpoint, fillers)"));
  }
}

// Resolves the effective config: built-in defaults, then the JSON file (if
// given), then command-line overrides, then $KWSEQ_CORPUS as a last-resort
// corpus root. Validates before returning so no command starts work on a
// bad configuration.
inline RunConfig parse_config(
    const std::string& config_path,
    const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      throw UsageError(str_cat("cannot open config file ", config_path));
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(
          str_cat("config file ", config_path, " is not valid JSON: ",
                  e.what()));
    }
    cfg = run_config_from_json(j);
  }
  for (const auto& [key, value] : overrides) apply_override(&cfg, key, value);
  if (cfg.corpus_root.empty()) {
    if (const char* env = std::getenv(kCorpusEnvVar)) cfg.corpus_root = env;
  }
  cfg.validate();
  return cfg;
}

// Writes the resolved config into the run's output directory so the run can
// be replayed exactly.
inline std::string echo_config(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path =
      (std::filesystem::path(dir) / "config.json").string();
  std::ofstream out(path);
  if (!out) throw DataError(str_cat("cannot write ", path));
  out << cfg.to_json().dump(2) << "\n";
  return path;
}

}  // namespace kws
