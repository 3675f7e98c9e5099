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

#ifndef KWS_NN_LSTM_HPP_
#define KWS_NN_LSTM_HPP_

#include <string>

#include "kws/nn/param.hpp"

namespace kws {

namespace detail {

inline Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace detail

// Single LSTM cell with gates ordered [input; forget; cell; output] in the
// stacked weight rows. The forget-gate bias starts at 1 so memory persists
// through early training.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParamRegistry* params, const std::string& name, Eigen::Index in,
           Eigen::Index hidden, Rng* rng)
      : in_(in), hidden_(hidden) {
    Wx_ = params->add(name + ".Wx", 4 * hidden, in);
    Wh_ = params->add(name + ".Wh", 4 * hidden, hidden);
    b_ = params->add(name + ".b", 4 * hidden, 1);
    init_fan_in_uniform(Wx_, in, rng);
    init_fan_in_uniform(Wh_, hidden, rng);
    b_->value.block(hidden, 0, hidden, 1).setOnes();
  }

  struct StepCache {
    Vector x, h_prev, c_prev;
    Vector i, f, g, o;  // post-nonlinearity gate values
    Vector c, tanh_c;
  };

  void step(const Vector& x, const Vector& h_prev, const Vector& c_prev,
            StepCache* cache, Vector* h_out, Vector* c_out) const {
    const Vector pre = Wx_->value * x + Wh_->value * h_prev + b_->value;
    const Eigen::Index H = hidden_;
    Vector i = detail::sigmoid(pre.segment(0, H));
    Vector f = detail::sigmoid(pre.segment(H, H));
    Vector g = pre.segment(2 * H, H).array().tanh().matrix();
    Vector o = detail::sigmoid(pre.segment(3 * H, H));
    Vector c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    Vector tanh_c = c.array().tanh().matrix();
    *h_out = o.cwiseProduct(tanh_c);
    *c_out = c;
    if (cache != nullptr) {
      cache->x = x;
      cache->h_prev = h_prev;
      cache->c_prev = c_prev;
      cache->i = std::move(i);
      cache->f = std::move(f);
      cache->g = std::move(g);
      cache->o = std::move(o);
      cache->c = std::move(c);
      cache->tanh_c = std::move(tanh_c);
    }
  }

  // Backpropagates one step. dh/dc are the gradients arriving at this step's
  // outputs; the function accumulates parameter gradients and fills the
  // gradients flowing to the inputs.
  void step_backward(const StepCache& cache, const Vector& dh,
                     const Vector& dc_in, Vector* dx, Vector* dh_prev,
                     Vector* dc_prev) const {
    const Vector dout = dh.cwiseProduct(cache.tanh_c);
    const Vector dc =
        dc_in + dh.cwiseProduct(cache.o).cwiseProduct(
                    (1.0 - cache.tanh_c.array().square()).matrix());
    const Vector di = dc.cwiseProduct(cache.g);
    const Vector df = dc.cwiseProduct(cache.c_prev);
    const Vector dg = dc.cwiseProduct(cache.i);
    *dc_prev = dc.cwiseProduct(cache.f);

    const Eigen::Index H = hidden_;
    Vector dpre(4 * H);
    dpre.segment(0, H) =
        di.cwiseProduct(cache.i).cwiseProduct((1.0 - cache.i.array()).matrix());
    dpre.segment(H, H) =
        df.cwiseProduct(cache.f).cwiseProduct((1.0 - cache.f.array()).matrix());
    dpre.segment(2 * H, H) =
        dg.cwiseProduct((1.0 - cache.g.array().square()).matrix());
    dpre.segment(3 * H, H) = dout.cwiseProduct(cache.o).cwiseProduct(
        (1.0 - cache.o.array()).matrix());

    Wx_->grad += dpre * cache.x.transpose();
    Wh_->grad += dpre * cache.h_prev.transpose();
    b_->grad.col(0) += dpre;
    *dx = Wx_->value.transpose() * dpre;
    *dh_prev = Wh_->value.transpose() * dpre;
  }

  Eigen::Index input_dim() const { return in_; }
  Eigen::Index hidden_dim() const { return hidden_; }

 private:
  Eigen::Index in_ = 0;
  Eigen::Index hidden_ = 0;
  Param* Wx_ = nullptr;
  Param* Wh_ = nullptr;
  Param* b_ = nullptr;
};

// Unidirectional LSTM over a whole sequence (input columns are timesteps).
// The input projection for all timesteps is batched into one product.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamRegistry* params, const std::string& name, Eigen::Index in,
       Eigen::Index hidden, Rng* rng)
      : in_(in), hidden_(hidden) {
    Wx_ = params->add(name + ".Wx", 4 * hidden, in);
    Wh_ = params->add(name + ".Wh", 4 * hidden, hidden);
    b_ = params->add(name + ".b", 4 * hidden, 1);
    init_fan_in_uniform(Wx_, in, rng);
    init_fan_in_uniform(Wh_, hidden, rng);
    b_->value.block(hidden, 0, hidden, 1).setOnes();
  }

  struct Cache {
    Matrix x;                   // in x T
    Matrix i, f, g, o, c, tanh_c, h;  // H x T each
  };

  Matrix forward(const Matrix& x, Cache* cache) const {
    const Eigen::Index T = x.cols();
    const Eigen::Index H = hidden_;
    const Matrix xw = Wx_->value * x;  // 4H x T
    Matrix i(H, T), f(H, T), g(H, T), o(H, T), c(H, T), tanh_c(H, T), h(H, T);
    Vector h_prev = Vector::Zero(H);
    Vector c_prev = Vector::Zero(H);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Vector pre = xw.col(t) + Wh_->value * h_prev + b_->value;
      i.col(t) = detail::sigmoid(pre.segment(0, H));
      f.col(t) = detail::sigmoid(pre.segment(H, H));
      g.col(t) = pre.segment(2 * H, H).array().tanh().matrix();
      o.col(t) = detail::sigmoid(pre.segment(3 * H, H));
      c.col(t) = f.col(t).cwiseProduct(c_prev) + i.col(t).cwiseProduct(g.col(t));
      tanh_c.col(t) = c.col(t).array().tanh().matrix();
      h.col(t) = o.col(t).cwiseProduct(tanh_c.col(t));
      h_prev = h.col(t);
      c_prev = c.col(t);
    }
    if (cache != nullptr) {
      cache->x = x;
      cache->i = std::move(i);
      cache->f = std::move(f);
      cache->g = std::move(g);
      cache->o = std::move(o);
      cache->c = std::move(c);
      cache->tanh_c = std::move(tanh_c);
      cache->h = h;
    }
    return h;
  }

  // dh is the gradient on every output column; returns dx.
  Matrix backward(const Cache& cache, const Matrix& dh_seq) const {
    const Eigen::Index T = cache.x.cols();
    const Eigen::Index H = hidden_;
    Matrix dpre_all(4 * H, T);
    Vector dh_carry = Vector::Zero(H);
    Vector dc_carry = Vector::Zero(H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Vector dh = dh_seq.col(t) + dh_carry;
      const Vector dc =
          dc_carry + dh.cwiseProduct(cache.o.col(t))
                         .cwiseProduct(
                             (1.0 - cache.tanh_c.col(t).array().square())
                                 .matrix());
      const Vector c_prev =
          t == 0 ? Vector(Vector::Zero(H)) : Vector(cache.c.col(t - 1));
      Vector dpre(4 * H);
      dpre.segment(0, H) = dc.cwiseProduct(cache.g.col(t))
                               .cwiseProduct(cache.i.col(t))
                               .cwiseProduct((1.0 - cache.i.col(t).array()).matrix());
      dpre.segment(H, H) = dc.cwiseProduct(c_prev)
                               .cwiseProduct(cache.f.col(t))
                               .cwiseProduct((1.0 - cache.f.col(t).array()).matrix());
      dpre.segment(2 * H, H) =
          dc.cwiseProduct(cache.i.col(t))
              .cwiseProduct((1.0 - cache.g.col(t).array().square()).matrix());
      dpre.segment(3 * H, H) =
          dh.cwiseProduct(cache.tanh_c.col(t))
              .cwiseProduct(cache.o.col(t))
              .cwiseProduct((1.0 - cache.o.col(t).array()).matrix());
      dpre_all.col(t) = dpre;
      dh_carry = Wh_->value.transpose() * dpre;
      dc_carry = dc.cwiseProduct(cache.f.col(t));
    }
    Matrix h_prev_all = Matrix::Zero(H, T);
    if (T > 1) h_prev_all.rightCols(T - 1) = cache.h.leftCols(T - 1);
    Wx_->grad += dpre_all * cache.x.transpose();
    Wh_->grad += dpre_all * h_prev_all.transpose();
    b_->grad.col(0) += dpre_all.rowwise().sum();
    return Wx_->value.transpose() * dpre_all;
  }

  Eigen::Index hidden_dim() const { return hidden_; }

 private:
  Eigen::Index in_ = 0;
  Eigen::Index hidden_ = 0;
  Param* Wx_ = nullptr;
  Param* Wh_ = nullptr;
  Param* b_ = nullptr;
};

// Bidirectional LSTM: a forward and a time-reversed pass, outputs stacked to
// 2H rows per timestep.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamRegistry* params, const std::string& name, Eigen::Index in,
         Eigen::Index hidden, Rng* rng)
      : hidden_(hidden),
        fwd_(params, name + ".fwd", in, hidden, rng),
        bwd_(params, name + ".bwd", in, hidden, rng) {}

  struct Cache {
    Lstm::Cache fwd;
    Lstm::Cache bwd;
  };

  Matrix forward(const Matrix& x, Cache* cache) const {
    const Matrix h_f = fwd_.forward(x, cache != nullptr ? &cache->fwd : nullptr);
    const Matrix x_rev = x.rowwise().reverse();
    const Matrix h_b_rev =
        bwd_.forward(x_rev, cache != nullptr ? &cache->bwd : nullptr);
    Matrix out(2 * hidden_, x.cols());
    out.topRows(hidden_) = h_f;
    out.bottomRows(hidden_) = h_b_rev.rowwise().reverse();
    return out;
  }

  Matrix backward(const Cache& cache, const Matrix& dh) const {
    const Matrix dx_f = fwd_.backward(cache.fwd, dh.topRows(hidden_));
    const Matrix dh_b_rev = dh.bottomRows(hidden_).rowwise().reverse();
    const Matrix dx_b_rev = bwd_.backward(cache.bwd, dh_b_rev);
    return dx_f + dx_b_rev.rowwise().reverse();
  }

  Eigen::Index output_dim() const { return 2 * hidden_; }

 private:
  Eigen::Index hidden_ = 0;
  Lstm fwd_;
  Lstm bwd_;
};

}  // namespace kws

#endif  // KWS_NN_LSTM_HPP_
