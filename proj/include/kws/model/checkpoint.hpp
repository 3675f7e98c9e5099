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

#include <memory>
#include <string>
#include <vector>

#include "kws/io/archive.hpp"
#include "kws/labels/vocabulary.hpp"
#include "kws/model/config.hpp"
#include "kws/model/network.hpp"

namespace kws {

// A checkpoint is one array archive whose JSON manifest stores the model
// config, the token vocabulary, and training metadata, and whose entries
// are the named weight arrays (names match the parameter registry).
inline constexpr const char* kCheckpointFormat = "kws-checkpoint-v1";

struct CheckpointMeta {
  int epoch = 0;             // best epoch the weights correspond to
  uint64_t seed = 0;
  double val_error = -1.0;   // validation error of the stored weights
  nlohmann::json extra;      // free-form (training history, notes)
};

inline void save_checkpoint(const std::string& path, const Network& net,
                            const Vocabulary& vocab,
                            const CheckpointMeta& meta) {
  ArrayArchive ar;
  ar.meta()["format"] = kCheckpointFormat;
  ar.meta()["config"] = net.config().to_json();
  ar.meta()["vocab"] = {{"scheme", label_scheme_name(vocab.scheme)},
                        {"tokens", vocab.tokens}};
  ar.meta()["epoch"] = meta.epoch;
  ar.meta()["seed"] = meta.seed;
  ar.meta()["val_error"] = meta.val_error;
  if (!meta.extra.is_null()) ar.meta()["extra"] = meta.extra;
  net.params().save_values(&ar);
  ar.save(path);
}

struct LoadedCheckpoint {
  std::unique_ptr<Network> net;
  Vocabulary vocab;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  ArrayArchive ar = ArrayArchive::load(path);
  const auto& m = ar.meta();
  if (!m.contains("format") || m.at("format") != kCheckpointFormat) {
    throw DataError("not a model checkpoint: " + path);
  }
  LoadedCheckpoint out;
  const ModelConfig cfg = ModelConfig::from_json(m.at("config"));
  out.vocab.scheme =
      parse_label_scheme(m.at("vocab").at("scheme").get<std::string>());
  out.vocab.tokens =
      m.at("vocab").at("tokens").get<std::vector<std::string>>();
  out.vocab.validate();
  if (out.vocab.size() != cfg.vocab_size) {
    throw DataError(str_cat("checkpoint vocab has ", out.vocab.size(),
                            " tokens but config says ", cfg.vocab_size));
  }
  out.meta.epoch = m.value("epoch", 0);
  out.meta.seed = m.value("seed", uint64_t{0});
  out.meta.val_error = m.value("val_error", -1.0);
  if (m.contains("extra")) out.meta.extra = m.at("extra");
  // Seed is irrelevant here: every weight is overwritten by the archive.
  out.net = std::make_unique<Network>(cfg, out.meta.seed);
  out.net->params().load_values(ar);
  return out;
}

}  // namespace kws
