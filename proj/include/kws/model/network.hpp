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

#include "kws/labels/vocabulary.hpp"
#include "kws/model/config.hpp"
#include "kws/model/ctc.hpp"
#include "kws/model/decoder.hpp"
#include "kws/model/encoder.hpp"
#include "kws/nn/linear.hpp"
#include "kws/nn/param.hpp"
#include "kws/rng.hpp"

namespace kws {

// The full hybrid network: shared encoder, CTC output head, and the
// attention decoder. Training minimizes
//   loss = lambda * ctc + (1 - lambda) * attention cross-entropy
// with both branches summed over the sequence; a branch with zero weight
// is excluded from the loss (so an infeasible CTC alignment cannot poison
// a pure-attention run).
class Network {
 public:
  Network(const ModelConfig& cfg, uint64_t init_seed)
      : cfg_((cfg.validate(), cfg)),
        rng_(Rng::derive(init_seed, "model-init")),
        encoder_(&params_, "enc", cfg_, &rng_),
        decoder_(&params_, "dec", cfg_, &rng_),
        ctc_head_(&params_, "ctc.out", 2 * cfg_.enc_units, cfg_.vocab_size,
                  &rng_) {}

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const AttentionDecoder& decoder() const { return decoder_; }

  // Encoder states for one utterance (no gradient bookkeeping).
  Matrix encode(const FeatureMatrix& features) const {
    return encoder_.forward(features, nullptr);
  }

  Matrix ctc_logits(const Matrix& enc_states) const {
    return ctc_head_.forward(enc_states);
  }

  struct LossBreakdown {
    double joint = 0.0;
    double ctc = 0.0;        // meaningful when ctc_weight > 0
    double att = 0.0;
    bool ctc_feasible = true;
  };

  struct ForwardCache {
    Encoder::Cache enc_cache;
    Matrix enc;
    Matrix ctc_logits;
    CtcResult ctc;
    AttentionDecoder::SequenceCache dec;
    LossBreakdown loss;
  };

  // Joint forward pass. `targets` is the bare token sequence (no start/end
  // markers, never the blank). With ctc_weight > 0 and a target that cannot
  // be aligned to the encoder length, the joint loss is +infinity and
  // ctc_feasible is false; callers skip such utterances.
  LossBreakdown forward_loss(const FeatureMatrix& features,
                             const std::vector<int>& targets,
                             ForwardCache* cache) const {
    for (const int t : targets) {
      if (t < 0 || t >= cfg_.vocab_size) {
        throw UsageError(str_cat("target token id out of range: ", t));
      }
    }
    ForwardCache local;
    ForwardCache* fc = cache != nullptr ? cache : &local;
    const double lambda = cfg_.ctc_weight;

    fc->enc = encoder_.forward(features, &fc->enc_cache);

    LossBreakdown loss;
    if (lambda > 0.0) {
      fc->ctc_logits = ctc_head_.forward(fc->enc);
      fc->ctc = ctc_loss(fc->ctc_logits, targets, /*blank=*/0,
                         /*want_grad=*/true);
      loss.ctc = fc->ctc.loss;
      loss.ctc_feasible = fc->ctc.feasible;
    }

    // Teacher forcing: inputs start with <sos>, golds end with <eos>.
    std::vector<int> inputs, golds;
    inputs.reserve(targets.size() + 1);
    golds.reserve(targets.size() + 1);
    inputs.push_back(kSosId);
    inputs.insert(inputs.end(), targets.begin(), targets.end());
    golds = targets;
    golds.push_back(kEosId);
    const auto tf = decoder_.teacher_forced(fc->enc, inputs, golds, &fc->dec);
    loss.att = tf.loss;

    if (lambda <= 0.0) {
      loss.joint = loss.att;
    } else if (lambda >= 1.0) {
      loss.joint = loss.ctc;
    } else {
      loss.joint = lambda * loss.ctc + (1.0 - lambda) * loss.att;
    }
    fc->loss = loss;
    return loss;
  }

  // Accumulates gradients for the cached forward pass.
  void backward(const ForwardCache& fc) const {
    const double lambda = cfg_.ctc_weight;
    if (lambda > 0.0 && !fc.loss.ctc_feasible) {
      throw UsageError("cannot backpropagate an infeasible alignment loss");
    }
    Matrix denc = Matrix::Zero(fc.enc.rows(), fc.enc.cols());
    if (lambda > 0.0) {
      denc += ctc_head_.backward(fc.enc, lambda * fc.ctc.dlogits);
    }
    if (lambda < 1.0) {
      decoder_.backward(fc.dec, fc.enc, 1.0 - lambda, &denc);
    }
    encoder_.backward(fc.enc_cache, denc);
  }

  // Token id conventions shared with the vocabulary module.
  static constexpr int kBlankId = 0;
  static constexpr int kSosId = 1;
  static constexpr int kEosId = 2;

 private:
  ModelConfig cfg_;
  ParamRegistry params_;
  Rng rng_;
  Encoder encoder_;
  AttentionDecoder decoder_;
  Linear ctc_head_;
};

}  // namespace kws
