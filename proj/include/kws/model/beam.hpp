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
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "kws/model/ctc.hpp"
#include "kws/model/network.hpp"

namespace kws {

struct DecodeOptions {
  int beam_size = 5;
  double ctc_weight = 0.3;    // score interpolation weight
  double max_len_ratio = 2.0; // cap = ratio * encoder length
};

struct DecodeResult {
  std::vector<int> tokens;    // emitted tokens, end marker excluded
  AttentionTrace trace;       // one row per decode step (end step included)
  double score = -std::numeric_limits<double>::infinity();
  bool ended_with_eos = false;
};

namespace detail {
inline Vector log_softmax_vec(const Vector& x) {
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}
}  // namespace detail

// Beam search over the attention decoder, optionally interpolating the
// CTC prefix score:
//   s(h) = (1 - w) * log p_att(h) + w * psi_ctc(h).
// Each step expands every live hypothesis with every non-blank, non-start
// token and keeps the beam_size best; hypotheses that picked the end token
// retire to the finished pool (so beam_size=1 reproduces a stepwise argmax
// rollout exactly). If nothing finishes within max_len_ratio * T' steps
// the best partial hypothesis is returned with ended_with_eos=false.
// There is no length penalty: hypotheses compete on raw joint score.
inline DecodeResult beam_decode(const Network& net,
                                const FeatureMatrix& features,
                                const DecodeOptions& opt) {
  if (opt.beam_size < 1) throw UsageError("beam_size must be >= 1");
  if (opt.ctc_weight < 0.0 || opt.ctc_weight > 1.0) {
    throw UsageError("decode ctc weight must be in [0,1]");
  }
  const double w = opt.ctc_weight;
  const int vocab = net.config().vocab_size;

  const Matrix enc = net.encode(features);
  const Matrix enc_proj = net.decoder().project_encoder(enc);
  const Eigen::Index T = enc.cols();

  std::unique_ptr<CtcPrefixScorer> scorer;
  if (w > 0.0) {
    scorer = std::make_unique<CtcPrefixScorer>(net.ctc_logits(enc),
                                               Network::kBlankId);
  }

  struct Hyp {
    std::vector<int> tokens;
    double att_logp = 0.0;
    double joint = 0.0;
    AttentionDecoder::State state;
    CtcPrefixScorer::State ctc;
    std::vector<Vector> alphas;
  };

  Hyp root;
  root.state = net.decoder().initial_state(T);
  if (scorer) root.ctc = scorer->initial();
  std::vector<Hyp> beams = {std::move(root)};
  std::vector<Hyp> finished;

  const int max_steps = std::max<int>(
      1, static_cast<int>(std::llround(opt.max_len_ratio * T)));

  for (int step = 0; step < max_steps && !beams.empty(); ++step) {
    struct Cand {
      size_t src = 0;
      int token = -1;
      double att = 0.0;
      double joint = 0.0;
      CtcPrefixScorer::State ctc;
    };
    std::vector<Cand> cands;
    cands.reserve(beams.size() * static_cast<size_t>(vocab));
    std::vector<AttentionDecoder::State> stepped(beams.size());
    std::vector<Vector> alphas(beams.size());

    for (size_t b = 0; b < beams.size(); ++b) {
      const Hyp& hyp = beams[b];
      const int prev =
          hyp.tokens.empty() ? Network::kSosId : hyp.tokens.back();
      AttentionDecoder::State st = hyp.state;
      Vector alpha;
      const Vector logits =
          net.decoder().step(prev, enc, enc_proj, &st, nullptr, &alpha);
      const Vector lp = detail::log_softmax_vec(logits);
      stepped[b] = std::move(st);
      alphas[b] = std::move(alpha);

      for (int c = 0; c < vocab; ++c) {
        if (c == Network::kBlankId || c == Network::kSosId) continue;
        Cand cand;
        cand.src = b;
        cand.token = c;
        cand.att = hyp.att_logp + lp(c);
        if (c == Network::kEosId) {
          // Ending here: the CTC side must account for the prefix exactly.
          cand.joint =
              scorer ? (1.0 - w) * cand.att + w * scorer->final_logp(hyp.ctc)
                     : cand.att;
        } else if (scorer) {
          auto [next, psi] = scorer->extend(hyp.ctc, c);
          cand.joint = (1.0 - w) * cand.att + w * psi;
          cand.ctc = std::move(next);
        } else {
          cand.joint = cand.att;
        }
        cands.push_back(std::move(cand));
      }
    }

    const size_t keep =
        std::min(cands.size(), static_cast<size_t>(opt.beam_size));
    std::partial_sort(cands.begin(),
                      cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), [](const Cand& a, const Cand& b) {
                        if (a.joint != b.joint) return a.joint > b.joint;
                        if (a.src != b.src) return a.src < b.src;
                        return a.token < b.token;
                      });

    std::vector<Hyp> next_beams;
    next_beams.reserve(keep);
    for (size_t i = 0; i < keep; ++i) {
      Cand& cand = cands[i];
      Hyp h;
      h.tokens = beams[cand.src].tokens;
      h.att_logp = cand.att;
      h.joint = cand.joint;
      h.alphas = beams[cand.src].alphas;
      h.alphas.push_back(alphas[cand.src]);
      if (cand.token == Network::kEosId) {
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(cand.token);
        h.state = stepped[cand.src];
        h.ctc = std::move(cand.ctc);
        next_beams.push_back(std::move(h));
      }
    }
    beams = std::move(next_beams);
  }

  DecodeResult result;
  const auto better = [](const Hyp& a, const Hyp& b) {
    return a.joint < b.joint;
  };
  const Hyp* winner = nullptr;
  if (!finished.empty()) {
    winner = &*std::max_element(finished.begin(), finished.end(), better);
    result.ended_with_eos = true;
  } else if (!beams.empty()) {
    winner = &*std::max_element(beams.begin(), beams.end(), better);
    result.ended_with_eos = false;
  } else {
    throw UsageError("beam search produced no hypotheses");
  }
  result.tokens = winner->tokens;
  result.score = winner->joint;
  result.trace.resize(static_cast<Eigen::Index>(winner->alphas.size()), T);
  for (size_t i = 0; i < winner->alphas.size(); ++i) {
    result.trace.row(static_cast<Eigen::Index>(i)) =
        winner->alphas[i].transpose();
  }
  return result;
}

}  // namespace kws
