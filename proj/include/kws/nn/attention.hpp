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

#ifndef KWS_NN_ATTENTION_HPP_
#define KWS_NN_ATTENTION_HPP_

#include <string>

#include "kws/nn/param.hpp"

namespace kws {

// Location-aware additive attention: the score for encoder frame t combines
// the decoder query, the encoder state, and convolutional features of the
// previous step's alignment, so the mechanism can track how attention moved.
//
//   F      = U (*) alpha_prev                (1-D conv, zero padded)
//   e_t    = v . tanh(Wq q + We h_t + Wf F_t + b)
//   alpha  = softmax(e),  context = sum_t alpha_t h_t
class LocationAttention {
 public:
  LocationAttention() = default;
  LocationAttention(ParamRegistry* params, const std::string& name,
                    Eigen::Index enc_dim, Eigen::Index dec_dim,
                    Eigen::Index att_dim, Eigen::Index channels,
                    Eigen::Index width, Rng* rng)
      : att_dim_(att_dim), channels_(channels), width_(width) {
    Wq_ = params->add(name + ".Wq", att_dim, dec_dim);
    We_ = params->add(name + ".We", att_dim, enc_dim);
    Wf_ = params->add(name + ".Wf", att_dim, channels);
    U_ = params->add(name + ".U", channels, width);
    b_ = params->add(name + ".b", att_dim, 1);
    v_ = params->add(name + ".v", att_dim, 1);
    init_fan_in_uniform(Wq_, dec_dim, rng);
    init_fan_in_uniform(We_, enc_dim, rng);
    init_fan_in_uniform(Wf_, channels, rng);
    init_fan_in_uniform(U_, width, rng);
    init_fan_in_uniform(v_, att_dim, rng);
  }

  // The encoder-side projection We * enc is constant across decoder steps;
  // callers compute it once per utterance.
  Matrix project_encoder(const Matrix& enc) const { return We_->value * enc; }

  struct StepCache {
    Vector query;
    Vector alpha_prev;
    Matrix F;         // channels x T
    Matrix tanh_out;  // att_dim x T
    Vector alpha;
  };

  void step(const Vector& query, const Matrix& enc, const Matrix& enc_proj,
            const Vector& alpha_prev, StepCache* cache, Vector* context,
            Vector* alpha_out) const {
    const Eigen::Index T = enc.cols();
    const Matrix F = convolve_alignment(alpha_prev);
    Matrix pre = enc_proj + Wf_->value * F;
    pre.colwise() += (Wq_->value * query + b_->value.col(0)).eval();
    const Matrix tanh_out = pre.array().tanh().matrix();
    Vector scores = tanh_out.transpose() * v_->value.col(0);
    // Softmax, stabilized by the max score.
    const double m = scores.maxCoeff();
    Vector alpha = (scores.array() - m).exp().matrix();
    alpha /= alpha.sum();
    *context = enc * alpha;
    *alpha_out = alpha;
    if (cache != nullptr) {
      cache->query = query;
      cache->alpha_prev = alpha_prev;
      cache->F = F;
      cache->tanh_out = tanh_out;
      cache->alpha = alpha;
    }
    (void)T;
  }

  // dcontext: gradient on the context vector. dalpha_out: gradient arriving
  // at this step's alignment from the NEXT step's location features.
  // Accumulates parameter gradients and *adds* the encoder gradient into
  // denc. Returns the query gradient and the gradient on alpha_prev.
  void step_backward(const StepCache& cache, const Matrix& enc,
                     const Vector& dcontext, const Vector& dalpha_out,
                     Matrix* denc, Vector* dquery,
                     Vector* dalpha_prev) const {
    const Vector dalpha = enc.transpose() * dcontext + dalpha_out;
    *denc += dcontext * cache.alpha.transpose();

    // Softmax backward.
    const double dot = cache.alpha.dot(dalpha);
    const Vector dscores =
        cache.alpha.cwiseProduct(dalpha - Vector::Constant(dalpha.size(), dot));

    v_->grad.col(0) += cache.tanh_out * dscores;
    const Matrix dtanh = v_->value.col(0) * dscores.transpose();
    const Matrix dpre =
        dtanh.cwiseProduct((1.0 - cache.tanh_out.array().square()).matrix());

    const Vector dpre_sum = dpre.rowwise().sum();
    Wq_->grad += dpre_sum * cache.query.transpose();
    b_->grad.col(0) += dpre_sum;
    *dquery = Wq_->value.transpose() * dpre_sum;

    We_->grad += dpre * enc.transpose();
    *denc += We_->value.transpose() * dpre;

    Wf_->grad += dpre * cache.F.transpose();
    const Matrix dF = Wf_->value.transpose() * dpre;

    const Eigen::Index T = cache.alpha_prev.size();
    const Eigen::Index offset = (width_ - 1) / 2;
    *dalpha_prev = Vector::Zero(T);
    for (Eigen::Index k = 0; k < channels_; ++k) {
      for (Eigen::Index j = 0; j < width_; ++j) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const Eigen::Index s = t + j - offset;
          if (s < 0 || s >= T) continue;
          U_->grad(k, j) += dF(k, t) * cache.alpha_prev(s);
          (*dalpha_prev)(s) += U_->value(k, j) * dF(k, t);
        }
      }
    }
  }

  Eigen::Index channels() const { return channels_; }
  Eigen::Index width() const { return width_; }

 private:
  Matrix convolve_alignment(const Vector& alpha_prev) const {
    const Eigen::Index T = alpha_prev.size();
    const Eigen::Index offset = (width_ - 1) / 2;
    Matrix F = Matrix::Zero(channels_, T);
    for (Eigen::Index k = 0; k < channels_; ++k) {
      for (Eigen::Index j = 0; j < width_; ++j) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const Eigen::Index s = t + j - offset;
          if (s < 0 || s >= T) continue;
          F(k, t) += U_->value(k, j) * alpha_prev(s);
        }
      }
    }
    return F;
  }

  Eigen::Index att_dim_ = 0;
  Eigen::Index channels_ = 0;
  Eigen::Index width_ = 0;
  Param* Wq_ = nullptr;
  Param* We_ = nullptr;
  Param* Wf_ = nullptr;
  Param* U_ = nullptr;
  Param* b_ = nullptr;
  Param* v_ = nullptr;
};

}  // namespace kws

#endif  // KWS_NN_ATTENTION_HPP_
