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

#include "kws/audio/fbank.hpp"
#include "kws/model/config.hpp"
#include "kws/nn/conv.hpp"
#include "kws/nn/lstm.hpp"
#include "kws/nn/param.hpp"
#include "kws/rng.hpp"

namespace kws {

// CNN + BiLSTM encoder. Four 3x3 conv layers with ReLU, ceil-mode 2x2
// max-pooling (time and frequency) after layers 2 and 4, so a T-frame
// input becomes T' = ceil(ceil(T/2)/2) encoder states. The pooled feature
// map is flattened per timestep (channel-major) and fed to a stack of
// BiLSTM layers; the output has 2*enc_units rows and T' columns.
class Encoder {
 public:
  Encoder(ParamRegistry* params, const std::string& name,
          const ModelConfig& cfg, Rng* rng)
      : cfg_(cfg) {
    const auto& ch = cfg.conv_channels;
    convs_.reserve(4);
    convs_.emplace_back(params, name + ".conv1", 1, ch[0], rng);
    convs_.emplace_back(params, name + ".conv2", ch[0], ch[1], rng);
    convs_.emplace_back(params, name + ".conv3", ch[1], ch[2], rng);
    convs_.emplace_back(params, name + ".conv4", ch[2], ch[3], rng);
    pooled_freq_ = pooled_size(pooled_size(cfg.feature_dim));
    flat_dim_ = ch[3] * pooled_freq_;
    lstms_.reserve(static_cast<size_t>(cfg.enc_layers));
    Eigen::Index in = flat_dim_;
    for (int l = 0; l < cfg.enc_layers; ++l) {
      lstms_.emplace_back(params, str_cat(name, ".blstm", l + 1), in,
                          cfg.enc_units, rng);
      in = lstms_.back().output_dim();
    }
  }

  static Eigen::Index downsampled_length(Eigen::Index frames) {
    return pooled_size(pooled_size(frames));
  }

  Eigen::Index output_dim() const { return 2 * cfg_.enc_units; }

  struct Cache {
    std::vector<Conv2d::Cache> conv;  // one per conv layer
    std::vector<Tensor3> act;         // post-ReLU activation per conv layer
    PoolCache pool1, pool2;
    Tensor3 pooled2;                  // input to the flatten step
    Matrix flat;                      // flattened conv output
    std::vector<BiLstm::Cache> lstm;
    std::vector<Matrix> lstm_in;      // input sequence per BiLSTM layer
  };

  // features: T x feature_dim (one row per frame). Returns D x T' states.
  Matrix forward(const FeatureMatrix& features, Cache* cache) const {
    if (features.dim() != cfg_.feature_dim) {
      throw UsageError(str_cat("encoder expects ", cfg_.feature_dim,
                               "-dim features, got ", features.dim()));
    }
    if (features.num_frames() < 1) {
      throw UsageError("encoder requires at least one frame");
    }
    Cache local;
    Cache* c = cache != nullptr ? cache : &local;
    c->conv.assign(4, {});
    c->act.clear();

    // Feature map: 1 channel, rows = frequency, cols = time.
    Tensor3 x(1, cfg_.feature_dim, features.num_frames());
    for (Eigen::Index r = 0; r < x.rows; ++r) {
      for (Eigen::Index t = 0; t < x.cols; ++t) {
        x.at(0, r, t) = features.frames(t, r);
      }
    }

    Tensor3 a = relu(convs_[0].forward(x, &c->conv[0]));
    c->act.push_back(a);
    a = relu(convs_[1].forward(a, &c->conv[1]));
    c->act.push_back(a);
    a = maxpool2(a, &c->pool1);
    a = relu(convs_[2].forward(a, &c->conv[2]));
    c->act.push_back(a);
    a = relu(convs_[3].forward(a, &c->conv[3]));
    c->act.push_back(a);
    c->pooled2 = maxpool2(a, &c->pool2);

    c->flat = flatten(c->pooled2);
    c->lstm.assign(lstms_.size(), {});
    c->lstm_in.assign(lstms_.size(), {});
    Matrix h = c->flat;
    for (size_t l = 0; l < lstms_.size(); ++l) {
      c->lstm_in[l] = h;
      h = lstms_[l].forward(h, &c->lstm[l]);
    }
    return h;
  }

  // dstates: gradient on the encoder output (D x T'). Accumulates parameter
  // gradients.
  void backward(const Cache& c, const Matrix& dstates) const {
    Matrix dh = dstates;
    for (size_t l = lstms_.size(); l-- > 0;) {
      dh = lstms_[l].backward(c.lstm[l], dh);
    }
    Tensor3 d = unflatten(dh, c.pooled2);
    d = maxpool2_backward(c.pool2, d);
    d = convs_[3].backward(c.conv[3], relu_backward(c.act[3], d));
    d = convs_[2].backward(c.conv[2], relu_backward(c.act[2], d));
    d = maxpool2_backward(c.pool1, d);
    d = convs_[1].backward(c.conv[1], relu_backward(c.act[1], d));
    convs_[0].backward(c.conv[0], relu_backward(c.act[0], d));
  }

 private:
  // Stacks channels x frequency into one column per timestep
  // (channel-major: row index = channel * pooled_freq + frequency bin).
  Matrix flatten(const Tensor3& x) const {
    Matrix out(flat_dim_, x.cols);
    for (Eigen::Index ch = 0; ch < x.ch; ++ch) {
      for (Eigen::Index r = 0; r < x.rows; ++r) {
        for (Eigen::Index t = 0; t < x.cols; ++t) {
          out(ch * x.rows + r, t) = x.at(ch, r, t);
        }
      }
    }
    return out;
  }

  Tensor3 unflatten(const Matrix& d, const Tensor3& like) const {
    Tensor3 out(like.ch, like.rows, like.cols);
    for (Eigen::Index ch = 0; ch < like.ch; ++ch) {
      for (Eigen::Index r = 0; r < like.rows; ++r) {
        for (Eigen::Index t = 0; t < like.cols; ++t) {
          out.at(ch, r, t) = d(ch * like.rows + r, t);
        }
      }
    }
    return out;
  }

  ModelConfig cfg_;
  std::vector<Conv2d> convs_;
  std::vector<BiLstm> lstms_;
  Eigen::Index pooled_freq_ = 0;
  Eigen::Index flat_dim_ = 0;
};

}  // namespace kws
