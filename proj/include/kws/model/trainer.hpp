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

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "kws/model/network.hpp"
#include "kws/nn/param.hpp"
#include "kws/rng.hpp"

namespace kws {

// One training utterance: normalized features plus the token targets.
struct TrainExample {
  FeatureMatrix features;
  std::vector<int> targets;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 30;      // gradient-accumulation batch
  double grad_clip = 5.0;   // global-norm clip
  double lr = 1.0;          // step-size multiplier
  double rho = 0.95;
  double eps = 1e-8;
  uint64_t seed = 0;
};

struct EpochMetrics {
  int epoch = 0;            // 1-based
  double train_loss = 0.0;  // mean per-utterance joint loss
  double val_error = 0.0;   // whatever the validation callback returns
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;       // 0 when no epoch ran
  double best_val_error = std::numeric_limits<double>::infinity();
  bool diverged = false;
  int skipped = 0;          // utterances dropped for infeasible alignments
};

// Validation hook, run after every epoch; returns the error the trainer
// should minimize when selecting the best epoch (lower is better).
using ValidationFn = std::function<double(const Network&)>;

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpochMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics file: " + path);
  out << "epoch,train_loss,val_error\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.epoch << "," << r.train_loss << "," << r.val_error << "\n";
  }
}

namespace detail {

inline std::vector<Matrix> snapshot_params(const ParamRegistry& params) {
  std::vector<Matrix> values;
  values.reserve(params.size());
  for (const Param& p : params.all()) values.push_back(p.value);
  return values;
}

inline void restore_params(ParamRegistry* params,
                           const std::vector<Matrix>& values) {
  size_t i = 0;
  for (Param& p : params->all()) p.value = values[i++];
}

}  // namespace detail

// Runs gradient-accumulation training with an adaptive per-parameter
// optimizer. Fully deterministic for a given seed: shuffling is the only
// randomness and is derived from opt.seed per epoch. On a non-finite loss
// or gradient the run aborts, the weights roll back to the end of the
// last completed epoch, and `diverged` is set; utterances whose targets
// cannot be aligned by the CTC branch are skipped with a warning instead.
// After training the weights of the best-validation epoch are restored.
inline TrainResult train(Network* net,
                         const std::vector<TrainExample>& train_set,
                         const TrainOptions& opt,
                         const ValidationFn& validate) {
  if (train_set.empty()) throw UsageError("training set is empty");
  if (opt.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (opt.epochs < 0) throw UsageError("epochs must be >= 0");

  TrainResult result;
  if (opt.epochs == 0) return result;

  Adadelta optimizer(opt.rho, opt.eps, opt.lr);
  ParamRegistry& params = net->params();
  std::vector<Matrix> last_good = detail::snapshot_params(params);
  std::vector<Matrix> best;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(opt.seed, str_cat("epoch", epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(opt.batch_size)) {
      const size_t stop = std::min(
          order.size(), start + static_cast<size_t>(opt.batch_size));
      params.zero_grads();
      int contributed = 0;
      for (size_t i = start; i < stop; ++i) {
        const TrainExample& ex = train_set[order[i]];
        Network::ForwardCache cache;
        const auto loss = net->forward_loss(ex.features, ex.targets, &cache);
        if (!loss.ctc_feasible && !std::isnan(loss.joint)) {
          warn(str_cat("skipping utterance with unalignable target (",
                       ex.targets.size(), " tokens, ", cache.enc.cols(),
                       " encoder frames)"));
          ++result.skipped;
          continue;
        }
        if (!std::isfinite(loss.joint)) {
          detail::restore_params(&params, last_good);
          result.diverged = true;
          warn(str_cat("training diverged at epoch ", epoch,
                       " (loss not finite); rolled back"));
          if (!best.empty()) detail::restore_params(&params, best);
          return result;
        }
        net->backward(cache);
        loss_sum += loss.joint;
        ++loss_count;
        ++contributed;
      }
      if (contributed == 0) continue;
      params.scale_grads(1.0 / contributed);
      if (!params.grads_finite()) {
        detail::restore_params(&params, last_good);
        result.diverged = true;
        warn(str_cat("training diverged at epoch ", epoch,
                     " (gradient not finite); rolled back"));
        if (!best.empty()) detail::restore_params(&params, best);
        return result;
      }
      params.clip_grads(opt.grad_clip);
      optimizer.step(&params);
    }

    EpochMetrics row;
    row.epoch = epoch;
    row.train_loss = loss_count > 0 ? loss_sum / loss_count
                                    : std::numeric_limits<double>::quiet_NaN();
    row.val_error = validate ? validate(*net) : 0.0;
    result.metrics.push_back(row);

    last_good = detail::snapshot_params(params);
    if (!validate) {
      // No selection signal: the final epoch's weights are the result.
      result.best_epoch = epoch;
      result.best_val_error = row.val_error;
    } else if (row.val_error < result.best_val_error ||
               result.best_epoch == 0) {
      result.best_val_error = row.val_error;
      result.best_epoch = epoch;
      best = last_good;
    }
  }

  if (!best.empty()) detail::restore_params(&params, best);
  return result;
}

}  // namespace kws
