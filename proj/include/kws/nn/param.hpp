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

#ifndef KWS_NN_PARAM_HPP_
#define KWS_NN_PARAM_HPP_

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "kws/common.hpp"
#include "kws/io/archive.hpp"
#include "kws/rng.hpp"

namespace kws {

// One learnable array with its gradient accumulator. Stored by the registry;
// layers keep stable pointers.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Eigen::Index count() const { return value.size(); }
};

// Owns every parameter of a model. Layers register their weights here so the
// optimizer, the checkpoint writer, and the gradient checker can traverse the
// model without knowing its structure.
class ParamRegistry {
 public:
  Param* add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    for (const auto& p : params_) {
      if (p.name == name) {
        throw UsageError("duplicate parameter name: " + name);
      }
    }
    params_.push_back(Param{name, Matrix::Zero(rows, cols),
                            Matrix::Zero(rows, cols)});
    return &params_.back();
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  size_t size() const { return params_.size(); }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.count();
    return n;
  }

  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }

  Param* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& p : params_) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
  }

  // Global-norm gradient clipping: if ||g|| > max_norm, scale every gradient
  // by max_norm / ||g||.
  void clip_grads(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
      const double scale = max_norm / norm;
      for (auto& p : params_) p.grad *= scale;
    }
  }

  void scale_grads(double factor) {
    for (auto& p : params_) p.grad *= factor;
  }

  bool grads_finite() const {
    for (const auto& p : params_) {
      if (!p.grad.allFinite()) return false;
    }
    return true;
  }

  bool values_finite() const {
    for (const auto& p : params_) {
      if (!p.value.allFinite()) return false;
    }
    return true;
  }

  void save_values(ArrayArchive* archive) const {
    for (const auto& p : params_) archive->put(p.name, p.value);
  }

  void load_values(const ArrayArchive& archive) {
    for (auto& p : params_) {
      const Matrix& stored = archive.get(p.name);
      if (stored.rows() != p.value.rows() || stored.cols() != p.value.cols()) {
        throw DataError(str_cat("checkpoint array ", p.name, " has shape ",
                                stored.rows(), "x", stored.cols(),
                                ", model expects ", p.value.rows(), "x",
                                p.value.cols()));
      }
      p.value = stored;
    }
  }

 private:
  std::deque<Param> params_;  // deque: stable addresses across add()
};

// Uniform initialization scaled by fan-in, U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
inline void init_fan_in_uniform(Param* p, Eigen::Index fan_in, Rng* rng) {
  const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
  for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      p->value(r, c) = (2.0 * rng->uniform() - 1.0) * limit;
    }
  }
}

// Adadelta (Zeiler 2012): per-element accumulators of squared gradients and
// squared updates; the lr multiplier scales the final step and is the knob
// the adaptation strategy overrides.
class Adadelta {
 public:
  Adadelta(double rho, double eps, double lr) : rho_(rho), eps_(eps), lr_(lr) {}
  Adadelta() : Adadelta(0.95, 1e-8, 1.0) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  void step(ParamRegistry* params) {
    if (accum_grad_.empty()) {
      for (const auto& p : params->all()) {
        accum_grad_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        accum_update_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      }
    }
    size_t i = 0;
    for (auto& p : params->all()) {
      Matrix& eg2 = accum_grad_[i];
      Matrix& ex2 = accum_update_[i];
      eg2 = rho_ * eg2 + (1.0 - rho_) * p.grad.cwiseProduct(p.grad);
      const Matrix update =
          -((ex2.array() + eps_).sqrt() / (eg2.array() + eps_).sqrt())
               .matrix()
               .cwiseProduct(p.grad);
      ex2 = rho_ * ex2 + (1.0 - rho_) * update.cwiseProduct(update);
      p.value += lr_ * update;
      ++i;
    }
  }

 private:
  double rho_;
  double eps_;
  double lr_;
  std::vector<Matrix> accum_grad_;
  std::vector<Matrix> accum_update_;
};

}  // namespace kws

#endif  // KWS_NN_PARAM_HPP_
