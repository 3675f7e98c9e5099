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

#ifndef KWS_NN_EMBEDDING_HPP_
#define KWS_NN_EMBEDDING_HPP_

#include <string>

#include "kws/nn/param.hpp"

namespace kws {

// Token id -> dense vector lookup table (one column per token).
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamRegistry* params, const std::string& name,
            Eigen::Index vocab, Eigen::Index dim, Rng* rng) {
    E_ = params->add(name + ".E", dim, vocab);
    init_fan_in_uniform(E_, dim, rng);
  }

  Vector forward(Eigen::Index id) const {
    if (id < 0 || id >= E_->value.cols()) {
      throw UsageError(str_cat("embedding id out of range: ", id));
    }
    return E_->value.col(id);
  }

  void backward(Eigen::Index id, const Vector& d) const {
    E_->grad.col(id) += d;
  }

  Eigen::Index dim() const { return E_->value.rows(); }
  Eigen::Index vocab() const { return E_->value.cols(); }

 private:
  Param* E_ = nullptr;
};

}  // namespace kws

#endif  // KWS_NN_EMBEDDING_HPP_
