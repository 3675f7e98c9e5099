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

#ifndef KWS_MODEL_CTC_HPP_
#define KWS_MODEL_CTC_HPP_

#include <algorithm>
#include <limits>
#include <vector>

#include "kws/common.hpp"

namespace kws {

namespace detail {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

inline double log_add(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

// Column-wise log softmax of a logits matrix (rows = vocabulary).
inline Matrix log_softmax_cols(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const double m = logits.col(t).maxCoeff();
    const double lse =
        m + std::log((logits.col(t).array() - m).exp().sum());
    out.col(t) = logits.col(t).array() - lse;
  }
  return out;
}

}  // namespace detail

// Fewest frames that can carry the target: one per token plus one separator
// blank between each adjacent repeated pair.
inline Eigen::Index ctc_min_frames(const std::vector<int>& target) {
  Eigen::Index need = static_cast<Eigen::Index>(target.size());
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++need;
  }
  return need;
}

struct CtcResult {
  double loss = 0.0;   // -log p(target); +inf when the target cannot fit
  bool feasible = true;
  Matrix dlogits;      // same shape as the input logits; zero when infeasible
};

// CTC loss and gradient by the log-space forward/backward recursions over
// the blank-extended target. logits: vocab x T. The gradient is with respect
// to the raw logits (softmax folded in).
inline CtcResult ctc_loss(const Matrix& logits, const std::vector<int>& target,
                          int blank = 0, bool want_grad = true) {
  using detail::kLogZero;
  using detail::log_add;

  const Eigen::Index T = logits.cols();
  const Eigen::Index V = logits.rows();
  for (const int c : target) {
    if (c == blank) {
      throw UsageError("CTC target must not contain the blank token");
    }
    if (c < 0 || c >= V) {
      throw UsageError(str_cat("CTC target token out of range: ", c));
    }
  }

  CtcResult result;
  if (ctc_min_frames(target) > T) {
    result.loss = std::numeric_limits<double>::infinity();
    result.feasible = false;
    result.dlogits = Matrix::Zero(V, T);
    return result;
  }

  const Matrix log_y = detail::log_softmax_cols(logits);

  // Blank-extended label sequence: blank, t1, blank, t2, ..., blank.
  const Eigen::Index L = static_cast<Eigen::Index>(target.size());
  const Eigen::Index S = 2 * L + 1;
  std::vector<int> ext(static_cast<size_t>(S), blank);
  for (Eigen::Index i = 0; i < L; ++i) {
    ext[static_cast<size_t>(2 * i + 1)] = target[static_cast<size_t>(i)];
  }

  // Forward: alpha(t, s) = log prob of emitting the extended prefix up to s
  // within frames 0..t (inclusive of frame t's emission).
  Matrix alpha = Matrix::Constant(T, S, kLogZero);
  alpha(0, 0) = log_y(blank, 0);
  if (S > 1) alpha(0, 1) = log_y(ext[1], 0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (s >= 2 && ext[static_cast<size_t>(s)] != blank &&
          ext[static_cast<size_t>(s)] != ext[static_cast<size_t>(s - 2)]) {
        acc = log_add(acc, alpha(t - 1, s - 2));
      }
      if (acc != kLogZero) {
        alpha(t, s) = acc + log_y(ext[static_cast<size_t>(s)], t);
      }
    }
  }
  const double log_p = S > 1 ? log_add(alpha(T - 1, S - 1), alpha(T - 1, S - 2))
                             : alpha(T - 1, S - 1);
  result.loss = -log_p;
  if (!std::isfinite(log_p)) {
    result.feasible = false;
    result.loss = std::numeric_limits<double>::infinity();
    result.dlogits = Matrix::Zero(V, T);
    return result;
  }
  if (!want_grad) return result;

  // Backward: beta(t, s) = log prob of completing the sequence from frames
  // t+1..T-1 given position s at frame t (frame t's emission excluded, so
  // alpha + beta counts each frame exactly once).
  Matrix beta = Matrix::Constant(T, S, kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double acc = kLogZero;
      for (Eigen::Index s2 = s; s2 <= std::min<Eigen::Index>(s + 2, S - 1);
           ++s2) {
        if (s2 == s + 2 && (ext[static_cast<size_t>(s2)] == blank ||
                            ext[static_cast<size_t>(s2)] ==
                                ext[static_cast<size_t>(s)])) {
          continue;
        }
        if (beta(t + 1, s2) == kLogZero) continue;
        acc = log_add(acc,
                      beta(t + 1, s2) + log_y(ext[static_cast<size_t>(s2)], t + 1));
      }
      beta(t, s) = acc;
    }
  }

  // dlogits = softmax - posterior occupancy per symbol and frame.
  result.dlogits = log_y.array().exp().matrix();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      if (alpha(t, s) == kLogZero || beta(t, s) == kLogZero) continue;
      const double occupancy = std::exp(alpha(t, s) + beta(t, s) - log_p);
      result.dlogits(ext[static_cast<size_t>(s)], t) -= occupancy;
    }
  }
  return result;
}

// Prefix scoring for joint CTC/attention beam search: incrementally computes
// the log probability that the CTC output begins with a given label prefix.
// State carries, per frame, the probability of the prefix with the last
// emission being the final label (r_nb) vs a trailing blank (r_b).
class CtcPrefixScorer {
 public:
  CtcPrefixScorer(const Matrix& logits, int blank)
      : log_y_(detail::log_softmax_cols(logits)), blank_(blank) {}

  struct State {
    Vector r_nb;  // per frame, prefix prob ending in the prefix's last token
    Vector r_b;   // per frame, prefix prob ending in blank
    int last = -1;
  };

  State initial() const {
    const Eigen::Index T = log_y_.cols();
    State s;
    s.r_nb = Vector::Constant(T, detail::kLogZero);
    s.r_b = Vector(T);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      acc += log_y_(blank_, t);
      s.r_b(t) = acc;
    }
    s.last = -1;
    return s;
  }

  // Extends the prefix with token c. Returns the new state and the prefix
  // score psi = log P(the CTC output starts with prefix + c).
  std::pair<State, double> extend(const State& g, int c) const {
    using detail::kLogZero;
    using detail::log_add;
    if (c == blank_) throw UsageError("cannot extend a CTC prefix with blank");
    const Eigen::Index T = log_y_.cols();
    State h;
    h.r_nb = Vector::Constant(T, kLogZero);
    h.r_b = Vector::Constant(T, kLogZero);
    h.last = c;
    double psi = kLogZero;
    const bool g_empty = g.last == -1;
    for (Eigen::Index t = 0; t < T; ++t) {
      double phi;
      if (t == 0) {
        phi = g_empty ? 0.0 : kLogZero;
      } else if (c == g.last) {
        // A repeated label needs a separating blank.
        phi = g.r_b(t - 1);
      } else {
        phi = log_add(g.r_b(t - 1), g.r_nb(t - 1));
      }
      const double emit = phi + log_y_(c, t);
      h.r_nb(t) = t == 0 ? emit : log_add(h.r_nb(t - 1) + log_y_(c, t), emit);
      if (t > 0) {
        h.r_b(t) = log_add(h.r_b(t - 1), h.r_nb(t - 1)) + log_y_(blank_, t);
      }
      psi = log_add(psi, emit);
    }
    return {std::move(h), psi};
  }

  // Log probability that the CTC output equals the prefix exactly.
  double final_logp(const State& s) const {
    const Eigen::Index T = log_y_.cols();
    return detail::log_add(s.r_nb(T - 1), s.r_b(T - 1));
  }

  Eigen::Index frames() const { return log_y_.cols(); }

 private:
  Matrix log_y_;
  int blank_;
};

}  // namespace kws

#endif  // KWS_MODEL_CTC_HPP_
