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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kws/common.hpp"

namespace kws {

// Architecture hyperparameters for the hybrid CTC/attention network.
//
// The encoder is a 4-layer 3x3 CNN (max-pooled 2x2 after layers 2 and 4,
// both time and frequency) followed by a stack of BiLSTM layers; the
// decoder is a single LSTM with location-aware attention. Training mixes
// the CTC and attention losses with weight ctc_weight; decoding
// interpolates the CTC prefix score with weight decode_ctc_weight.
struct ModelConfig {
  int feature_dim = 80;
  std::vector<int> conv_channels = {64, 64, 128, 128};
  int enc_layers = 4;
  int enc_units = 320;  // per direction
  int dec_units = 300;
  int embed_dim = 300;
  int att_dim = 320;
  int att_channels = 10;
  int att_width = 100;
  double ctc_weight = 0.5;         // training loss mix
  double decode_ctc_weight = 0.3;  // beam-search score interpolation
  int beam_size = 5;
  int vocab_size = 0;  // filled in from the vocabulary

  void validate() const {
    if (conv_channels.size() != 4) {
      throw UsageError(str_cat("conv_channels must list 4 layers, got ",
                               conv_channels.size()));
    }
    for (const int c : conv_channels) {
      if (c < 1) throw UsageError("conv channel counts must be >= 1");
    }
    if (feature_dim < 1 || enc_layers < 1 || enc_units < 1 ||
        dec_units < 1 || embed_dim < 1 || att_dim < 1 || att_channels < 1 ||
        att_width < 1 || beam_size < 1) {
      throw UsageError("all model sizes must be >= 1");
    }
    if (ctc_weight < 0.0 || ctc_weight > 1.0) {
      throw UsageError(str_cat("ctc_weight must be in [0,1], got ",
                               ctc_weight));
    }
    if (decode_ctc_weight < 0.0 || decode_ctc_weight > 1.0) {
      throw UsageError(str_cat("decode_ctc_weight must be in [0,1], got ",
                               decode_ctc_weight));
    }
    if (vocab_size < 5) {
      throw UsageError(str_cat(
          "vocab_size must cover the 5 special tokens, got ", vocab_size));
    }
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"feature_dim", feature_dim},
                          {"conv_channels", conv_channels},
                          {"enc_layers", enc_layers},
                          {"enc_units", enc_units},
                          {"dec_units", dec_units},
                          {"embed_dim", embed_dim},
                          {"att_dim", att_dim},
                          {"att_channels", att_channels},
                          {"att_width", att_width},
                          {"ctc_weight", ctc_weight},
                          {"decode_ctc_weight", decode_ctc_weight},
                          {"beam_size", beam_size},
                          {"vocab_size", vocab_size}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    cfg.enc_layers = j.at("enc_layers").get<int>();
    cfg.enc_units = j.at("enc_units").get<int>();
    cfg.dec_units = j.at("dec_units").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.att_dim = j.at("att_dim").get<int>();
    cfg.att_channels = j.at("att_channels").get<int>();
    cfg.att_width = j.at("att_width").get<int>();
    cfg.ctc_weight = j.at("ctc_weight").get<double>();
    cfg.decode_ctc_weight = j.at("decode_ctc_weight").get<double>();
    cfg.beam_size = j.at("beam_size").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    return cfg;
  }

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace kws
