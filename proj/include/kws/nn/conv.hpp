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

#ifndef KWS_NN_CONV_HPP_
#define KWS_NN_CONV_HPP_

#include <string>
#include <vector>

#include "kws/nn/param.hpp"

namespace kws {

// A stack of 2-D feature maps. data is channels x (rows*cols), each row of
// the matrix holding one channel in row-major image order.
struct Tensor3 {
  Eigen::Index ch = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Matrix data;

  Tensor3() = default;
  Tensor3(Eigen::Index c, Eigen::Index r, Eigen::Index k)
      : ch(c), rows(r), cols(k), data(Matrix::Zero(c, r * k)) {}

  double& at(Eigen::Index c, Eigen::Index r, Eigen::Index k) {
    return data(c, r * cols + k);
  }
  double at(Eigen::Index c, Eigen::Index r, Eigen::Index k) const {
    return data(c, r * cols + k);
  }
};

// 3x3 convolution with stride 1 and zero same-padding, implemented as a
// weight matrix times an im2col patch matrix.
class Conv2d {
 public:
  static constexpr Eigen::Index kKernel = 3;

  Conv2d() = default;
  Conv2d(ParamRegistry* params, const std::string& name, Eigen::Index in_ch,
         Eigen::Index out_ch, Rng* rng)
      : in_ch_(in_ch), out_ch_(out_ch) {
    W_ = params->add(name + ".W", out_ch, in_ch * kKernel * kKernel);
    b_ = params->add(name + ".b", out_ch, 1);
    init_fan_in_uniform(W_, in_ch * kKernel * kKernel, rng);
  }

  struct Cache {
    Matrix patches;  // (in_ch*9) x (rows*cols)
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
  };

  Tensor3 forward(const Tensor3& x, Cache* cache) const {
    Cache local;
    Cache& c = cache != nullptr ? *cache : local;
    c.rows = x.rows;
    c.cols = x.cols;
    c.patches = im2col(x);
    Tensor3 y(out_ch_, x.rows, x.cols);
    y.data = W_->value * c.patches;
    y.data.colwise() += b_->value.col(0);
    return y;
  }

  // Accumulates parameter gradients and returns the input gradient.
  Tensor3 backward(const Cache& cache, const Tensor3& dy) const {
    W_->grad += dy.data * cache.patches.transpose();
    b_->grad.col(0) += dy.data.rowwise().sum();
    const Matrix dpatches = W_->value.transpose() * dy.data;
    return col2im(dpatches, cache.rows, cache.cols);
  }

  Eigen::Index in_channels() const { return in_ch_; }
  Eigen::Index out_channels() const { return out_ch_; }

 private:
  Matrix im2col(const Tensor3& x) const {
    const Eigen::Index half = kKernel / 2;
    Matrix patches = Matrix::Zero(in_ch_ * kKernel * kKernel, x.rows * x.cols);
    for (Eigen::Index c = 0; c < in_ch_; ++c) {
      for (Eigen::Index kr = 0; kr < kKernel; ++kr) {
        for (Eigen::Index kc = 0; kc < kKernel; ++kc) {
          const Eigen::Index prow = (c * kKernel + kr) * kKernel + kc;
          for (Eigen::Index r = 0; r < x.rows; ++r) {
            const Eigen::Index sr = r + kr - half;
            if (sr < 0 || sr >= x.rows) continue;
            for (Eigen::Index k = 0; k < x.cols; ++k) {
              const Eigen::Index sk = k + kc - half;
              if (sk < 0 || sk >= x.cols) continue;
              patches(prow, r * x.cols + k) = x.at(c, sr, sk);
            }
          }
        }
      }
    }
    return patches;
  }

  Tensor3 col2im(const Matrix& dpatches, Eigen::Index rows,
                 Eigen::Index cols) const {
    const Eigen::Index half = kKernel / 2;
    Tensor3 dx(in_ch_, rows, cols);
    for (Eigen::Index c = 0; c < in_ch_; ++c) {
      for (Eigen::Index kr = 0; kr < kKernel; ++kr) {
        for (Eigen::Index kc = 0; kc < kKernel; ++kc) {
          const Eigen::Index prow = (c * kKernel + kr) * kKernel + kc;
          for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index sr = r + kr - half;
            if (sr < 0 || sr >= rows) continue;
            for (Eigen::Index k = 0; k < cols; ++k) {
              const Eigen::Index sk = k + kc - half;
              if (sk < 0 || sk >= cols) continue;
              dx.at(c, sr, sk) += dpatches(prow, r * cols + k);
            }
          }
        }
      }
    }
    return dx;
  }

  Eigen::Index in_ch_ = 0;
  Eigen::Index out_ch_ = 0;
  Param* W_ = nullptr;
  Param* b_ = nullptr;
};

// 2x2 max pooling with stride 2; partial windows at the bottom/right edges
// are kept (ceil semantics), so out = ceil(in/2) on both axes.
struct PoolCache {
  std::vector<Eigen::Index> argmax;  // flat source index per (ch, out pos)
  Eigen::Index in_rows = 0;
  Eigen::Index in_cols = 0;
};

inline Eigen::Index pooled_size(Eigen::Index n) { return (n + 1) / 2; }

inline Tensor3 maxpool2(const Tensor3& x, PoolCache* cache) {
  const Eigen::Index out_r = pooled_size(x.rows);
  const Eigen::Index out_c = pooled_size(x.cols);
  Tensor3 y(x.ch, out_r, out_c);
  if (cache != nullptr) {
    cache->argmax.assign(static_cast<size_t>(x.ch * out_r * out_c), 0);
    cache->in_rows = x.rows;
    cache->in_cols = x.cols;
  }
  for (Eigen::Index c = 0; c < x.ch; ++c) {
    for (Eigen::Index r = 0; r < out_r; ++r) {
      for (Eigen::Index k = 0; k < out_c; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index best_idx = 0;
        for (Eigen::Index dr = 0; dr < 2; ++dr) {
          const Eigen::Index sr = 2 * r + dr;
          if (sr >= x.rows) continue;
          for (Eigen::Index dk = 0; dk < 2; ++dk) {
            const Eigen::Index sk = 2 * k + dk;
            if (sk >= x.cols) continue;
            const double v = x.at(c, sr, sk);
            if (v > best) {
              best = v;
              best_idx = sr * x.cols + sk;
            }
          }
        }
        y.at(c, r, k) = best;
        if (cache != nullptr) {
          cache->argmax[static_cast<size_t>((c * out_r + r) * out_c + k)] =
              best_idx;
        }
      }
    }
  }
  return y;
}

inline Tensor3 maxpool2_backward(const PoolCache& cache, const Tensor3& dy) {
  Tensor3 dx(dy.ch, cache.in_rows, cache.in_cols);
  for (Eigen::Index c = 0; c < dy.ch; ++c) {
    for (Eigen::Index r = 0; r < dy.rows; ++r) {
      for (Eigen::Index k = 0; k < dy.cols; ++k) {
        const Eigen::Index src =
            cache.argmax[static_cast<size_t>((c * dy.rows + r) * dy.cols + k)];
        dx.data(c, src) += dy.at(c, r, k);
      }
    }
  }
  return dx;
}

inline Tensor3 relu(const Tensor3& x) {
  Tensor3 y = x;
  y.data = y.data.cwiseMax(0.0);
  return y;
}

// dx = dy where the forward output was positive, using the forward output
// itself as the mask.
inline Tensor3 relu_backward(const Tensor3& y, const Tensor3& dy) {
  Tensor3 dx = dy;
  dx.data = (y.data.array() > 0.0).select(dy.data, Matrix::Zero(dy.data.rows(), dy.data.cols()));
  return dx;
}

}  // namespace kws

#endif  // KWS_NN_CONV_HPP_
