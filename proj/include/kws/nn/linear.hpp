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

#ifndef KWS_NN_LINEAR_HPP_
#define KWS_NN_LINEAR_HPP_

#include <string>

#include "kws/nn/param.hpp"

namespace kws {

// Affine map y = W x + b. Inputs are column vectors; a matrix input treats
// every column as an independent example.
class Linear {
 public:
  Linear() = default;
  Linear(ParamRegistry* params, const std::string& name, Eigen::Index in,
         Eigen::Index out, Rng* rng) {
    W_ = params->add(name + ".W", out, in);
    b_ = params->add(name + ".b", out, 1);
    init_fan_in_uniform(W_, in, rng);
  }

  Matrix forward(const Matrix& x) const {
    return (W_->value * x).colwise() + b_->value.col(0);
  }

  // Accumulates dW, db and returns dx. `x` must be the forward input.
  Matrix backward(const Matrix& x, const Matrix& dy) const {
    W_->grad += dy * x.transpose();
    b_->grad.col(0) += dy.rowwise().sum();
    return W_->value.transpose() * dy;
  }

  Eigen::Index in_dim() const { return W_->value.cols(); }
  Eigen::Index out_dim() const { return W_->value.rows(); }

 private:
  Param* W_ = nullptr;
  Param* b_ = nullptr;
};

}  // namespace kws

#endif  // KWS_NN_LINEAR_HPP_
