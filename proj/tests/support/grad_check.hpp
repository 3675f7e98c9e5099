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

#ifndef KWS_TESTS_SUPPORT_GRAD_CHECK_HPP_
#define KWS_TESTS_SUPPORT_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "kws/nn/param.hpp"

namespace kws::testing {

// Relative disagreement between an analytic and a finite-difference entry.
// Near-zero gradients are compared against a small absolute scale so noise
// in the difference quotient does not dominate.
inline double rel_err(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // parameter entry where the maximum occurred
};

// Central finite differences over every registered parameter. Analytic
// gradients must already be accumulated in the registry; loss_fn must
// recompute the forward pass from current parameter values.
inline GradCheckResult check_param_grads(
    ParamRegistry* params, const std::function<double()>& loss_fn,
    double eps = 1e-5) {
  GradCheckResult result;
  for (auto& p : params->all()) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        const double saved = p.value(r, c);
        p.value(r, c) = saved + eps;
        const double plus = loss_fn();
        p.value(r, c) = saved - eps;
        const double minus = loss_fn();
        p.value(r, c) = saved;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double err = rel_err(p.grad(r, c), numeric);
        if (err > result.max_rel_err) {
          result.max_rel_err = err;
          result.worst = str_cat(p.name, "(", r, ",", c, ") analytic=",
                                 p.grad(r, c), " numeric=", numeric);
        }
      }
    }
  }
  return result;
}

// Central finite differences wrt an input matrix (for checking dx paths).
inline GradCheckResult check_input_grads(
    Matrix* x, const Matrix& dx_analytic,
    const std::function<double()>& loss_fn, double eps = 1e-5) {
  GradCheckResult result;
  for (Eigen::Index c = 0; c < x->cols(); ++c) {
    for (Eigen::Index r = 0; r < x->rows(); ++r) {
      const double saved = (*x)(r, c);
      (*x)(r, c) = saved + eps;
      const double plus = loss_fn();
      (*x)(r, c) = saved - eps;
      const double minus = loss_fn();
      (*x)(r, c) = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = rel_err(dx_analytic(r, c), numeric);
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst = str_cat("input(", r, ",", c, ") analytic=",
                               dx_analytic(r, c), " numeric=", numeric);
      }
    }
  }
  return result;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng* rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = scale * rng->normal();
    }
  }
  return m;
}

}  // namespace kws::testing

#endif  // KWS_TESTS_SUPPORT_GRAD_CHECK_HPP_
