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

#include "kws/model/config.hpp"
#include "kws/nn/attention.hpp"
#include "kws/nn/embedding.hpp"
#include "kws/nn/linear.hpp"
#include "kws/nn/lstm.hpp"
#include "kws/nn/param.hpp"
#include "kws/rng.hpp"

namespace kws {

// Attention trace of one decoded utterance: row i holds the alignment used
// when token i was emitted (rows x T', each row sums to 1).
using AttentionTrace = Matrix;

// LSTM decoder with location-aware attention. Per step: the previous
// hidden state queries the attention, the LSTM consumes the previous
// token's embedding concatenated with the fresh context vector, and the
// output layer maps [hidden; context] to vocabulary logits.
class AttentionDecoder {
 public:
  AttentionDecoder(ParamRegistry* params, const std::string& name,
                   const ModelConfig& cfg, Rng* rng)
      : cfg_(cfg),
        emb_(params, name + ".emb", cfg.vocab_size, cfg.embed_dim, rng),
        att_(params, name + ".att", 2 * cfg.enc_units, cfg.dec_units,
             cfg.att_dim, cfg.att_channels, cfg.att_width, rng),
        cell_(params, name + ".cell", cfg.embed_dim + 2 * cfg.enc_units,
              cfg.dec_units, rng),
        out_(params, name + ".out", cfg.dec_units + 2 * cfg.enc_units,
             cfg.vocab_size, rng) {}

  Matrix project_encoder(const Matrix& enc) const {
    return att_.project_encoder(enc);
  }

  // Mutable decoding state carried between steps.
  struct State {
    Vector h, c;    // LSTM hidden and cell state
    Vector alpha;   // previous attention weights
  };

  State initial_state(Eigen::Index enc_len) const {
    State s;
    s.h = Vector::Zero(cfg_.dec_units);
    s.c = Vector::Zero(cfg_.dec_units);
    s.alpha = Vector::Constant(enc_len, 1.0 / static_cast<double>(enc_len));
    return s;
  }

  struct StepCache {
    LocationAttention::StepCache att;
    LstmCell::StepCache cell;
    Vector cat;  // [h; context], the output layer input
    int input_token = -1;
  };

  // Advances one step. Returns the vocabulary logits; state is updated in
  // place. alpha_out (if non-null) receives the attention weights used.
  Vector step(int prev_token, const Matrix& enc, const Matrix& enc_proj,
              State* state, StepCache* cache, Vector* alpha_out) const {
    StepCache local;
    StepCache* sc = cache != nullptr ? cache : &local;
    sc->input_token = prev_token;
    Vector context, alpha;
    att_.step(state->h, enc, enc_proj, state->alpha, &sc->att, &context,
              &alpha);
    Vector x(cfg_.embed_dim + context.size());
    x << emb_.forward(prev_token), context;
    Vector h_new, c_new;
    cell_.step(x, state->h, state->c, &sc->cell, &h_new, &c_new);
    state->h = std::move(h_new);
    state->c = std::move(c_new);
    state->alpha = alpha;
    if (alpha_out != nullptr) *alpha_out = std::move(alpha);
    sc->cat.resize(cfg_.dec_units + context.size());
    sc->cat << state->h, context;
    return out_.forward(sc->cat).col(0);
  }

  struct SequenceCache {
    std::vector<StepCache> steps;
    std::vector<Vector> probs;  // softmax over logits per step
    std::vector<int> golds;
  };

  struct TeacherForcedResult {
    double loss = 0.0;       // sum over steps of -log p(gold)
    AttentionTrace trace;    // one row per step
  };

  // Teacher-forced pass: step i consumes inputs[i] and is scored against
  // golds[i]. Callers prepend the start token to build inputs and append
  // the end token to build golds.
  TeacherForcedResult teacher_forced(const Matrix& enc,
                                     const std::vector<int>& inputs,
                                     const std::vector<int>& golds,
                                     SequenceCache* cache) const {
    if (inputs.size() != golds.size() || inputs.empty()) {
      throw UsageError("teacher forcing needs equal non-empty input/gold");
    }
    SequenceCache local;
    SequenceCache* sq = cache != nullptr ? cache : &local;
    const size_t L = inputs.size();
    sq->steps.assign(L, {});
    sq->probs.assign(L, {});
    sq->golds = golds;

    const Matrix enc_proj = project_encoder(enc);
    State state = initial_state(enc.cols());
    TeacherForcedResult result;
    result.trace.resize(static_cast<Eigen::Index>(L), enc.cols());
    for (size_t i = 0; i < L; ++i) {
      Vector alpha;
      const Vector logits =
          step(inputs[i], enc, enc_proj, &state, &sq->steps[i], &alpha);
      result.trace.row(static_cast<Eigen::Index>(i)) = alpha.transpose();
      const double m = logits.maxCoeff();
      const Vector e = (logits.array() - m).exp().matrix();
      const double z = e.sum();
      sq->probs[i] = e / z;
      result.loss -= logits(golds[i]) - m - std::log(z);
    }
    return result;
  }

  // Backpropagates a teacher-forced pass, scaling the cross-entropy
  // gradient by `scale`. Adds the encoder-state gradient into *denc.
  void backward(const SequenceCache& sq, const Matrix& enc,
                double scale, Matrix* denc) const {
    const size_t L = sq.steps.size();
    Vector dh_carry = Vector::Zero(cfg_.dec_units);
    Vector dc_carry = Vector::Zero(cfg_.dec_units);
    Vector dalpha_carry = Vector::Zero(enc.cols());
    for (size_t i = L; i-- > 0;) {
      Vector dlogits = scale * sq.probs[i];
      dlogits(sq.golds[i]) -= scale;
      const Matrix dcat =
          out_.backward(sq.steps[i].cat, dlogits);
      Vector dh = dcat.col(0).head(cfg_.dec_units) + dh_carry;
      Vector dctx = dcat.col(0).tail(enc.rows());

      Vector dx, dh_prev, dc_prev;
      cell_.step_backward(sq.steps[i].cell, dh, dc_carry, &dx, &dh_prev,
                          &dc_prev);
      emb_.backward(sq.steps[i].input_token, dx.head(cfg_.embed_dim));
      dctx += dx.tail(enc.rows());

      Vector dquery, dalpha_prev;
      att_.step_backward(sq.steps[i].att, enc, dctx, dalpha_carry, denc,
                         &dquery, &dalpha_prev);
      dh_carry = dh_prev + dquery;
      dc_carry = std::move(dc_prev);
      dalpha_carry = std::move(dalpha_prev);
    }
  }

 private:
  ModelConfig cfg_;
  Embedding emb_;
  LocationAttention att_;
  LstmCell cell_;
  Linear out_;
};

}  // namespace kws
