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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kws/fewshot/strategies.hpp"

namespace kws {

// Log-spaced learning-rate grid for adaptation sweeps, spanning two decades
// around the usual best operating point.
inline const std::vector<double> kDefaultAdaptLrGrid = {0.01, 0.03, 0.1,
                                                        0.3,  1.0,  3.0, 10.0};

// One grid point of a sweep; the seed axis is crossed in separately.
struct SweepPoint {
  Strategy strategy = Strategy::retrain;
  int f = 0;
  int k = 1;        // retrain family axis
  double lr = 0.0;  // adapt axes
  int epochs = 0;

  // Stable grouping key; doubles keep full precision.
  std::string key() const {
    std::ostringstream os;
    os << strategy_name(strategy) << ',' << f << ',' << k << ','
       << std::setprecision(17) << lr << ',' << epochs;
    return os.str();
  }
};

// The axes of one sweep. Retrain-family sweeps walk the oversampling factor
// k; adaptation sweeps walk the learning rate x epoch-budget product. Every
// point runs once per seed.
struct SweepGrid {
  Strategy strategy = Strategy::retrain;
  int f = 10;
  std::vector<int> k_values;
  std::vector<double> lr_values;
  std::vector<int> epoch_values;
  int repeats = 10;
  std::vector<uint64_t> seeds;

  void validate() const {
    if (f < 0) throw UsageError("few-shot example count f must be >= 0");
    if (seeds.empty()) throw UsageError("sweep needs at least one seed");
    if (repeats != static_cast<int>(seeds.size())) {
      throw UsageError(str_cat("sweep repeats (", repeats,
                               ") must equal the number of seeds (",
                               seeds.size(), ")"));
    }
    if (strategy == Strategy::adapt) {
      if (lr_values.empty() || epoch_values.empty()) {
        throw UsageError(
            "adapt sweep needs non-empty lr and epochs axes");
      }
      for (const double lr : lr_values) {
        if (!(lr > 0)) throw UsageError("sweep learning rates must be > 0");
      }
      for (const int e : epoch_values) {
        if (e < 1) throw UsageError("sweep epoch budgets must be >= 1");
      }
    } else {
      if (k_values.empty()) {
        throw UsageError("retrain sweep needs a non-empty k axis");
      }
      for (const int k : k_values) {
        if (k < 1) throw UsageError("sweep k values must be >= 1");
      }
    }
  }

  std::vector<SweepPoint> points() const {
    validate();
    std::vector<SweepPoint> out;
    if (strategy == Strategy::adapt) {
      for (const double lr : lr_values) {
        for (const int e : epoch_values) {
          SweepPoint p;
          p.strategy = strategy;
          p.f = f;
          p.lr = lr;
          p.epochs = e;
          out.push_back(p);
        }
      }
    } else {
      for (const int k : k_values) {
        SweepPoint p;
        p.strategy = strategy;
        p.f = f;
        p.k = k;
        out.push_back(p);
      }
    }
    return out;
  }
};

inline nlohmann::json sweep_grid_to_json(const SweepGrid& g) {
  return nlohmann::json{{"strategy", strategy_name(g.strategy)},
                        {"f", g.f},
                        {"k", g.k_values},
                        {"lr", g.lr_values},
                        {"epochs", g.epoch_values},
                        {"repeats", g.repeats},
                        {"seeds", g.seeds}};
}

inline SweepGrid sweep_grid_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "strategy", "f", "k", "lr", "epochs", "repeats", "seeds"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      std::string keys;
      for (const auto& k : known) keys += " " + k;
      throw UsageError("unknown sweep key '" + key + "' (valid keys:" + keys +
                       ")");
    }
  }
  SweepGrid g;
  if (j.contains("strategy")) {
    g.strategy = parse_strategy(j.at("strategy").get<std::string>());
  }
  if (j.contains("f")) g.f = j.at("f").get<int>();
  if (j.contains("k")) g.k_values = j.at("k").get<std::vector<int>>();
  if (j.contains("lr")) g.lr_values = j.at("lr").get<std::vector<double>>();
  if (j.contains("epochs")) {
    g.epoch_values = j.at("epochs").get<std::vector<int>>();
  }
  if (j.contains("seeds")) {
    g.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    g.repeats = static_cast<int>(g.seeds.size());
  }
  if (j.contains("repeats")) g.repeats = j.at("repeats").get<int>();
  g.validate();
  return g;
}

// One persisted per-run observation. Failed runs are recorded with the
// pseudo-set "failed" and a NaN error so they are never silently dropped.
struct SweepRawRow {
  SweepPoint point;
  uint64_t seed = 0;
  std::string set;
  double error = 0.0;
};

struct SweepAggregate {
  SweepPoint point;
  std::string set;
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 when n < 2
  int n = 0;             // successful runs contributing to the mean
  int failed = 0;        // failed runs at this grid point
};

struct SweepResult {
  std::vector<SweepRawRow> raw;
  std::vector<SweepAggregate> aggregates;
  int failed_runs = 0;
};

// Runs one grid point with one seed. The runner owns its model instance;
// runners are called concurrently when workers > 1.
using SweepRunner =
    std::function<FewShotRun(const SweepPoint&, uint64_t seed)>;

namespace detail {

inline void append_raw_rows(const SweepPoint& point, uint64_t seed,
                            const FewShotRun& run,
                            std::vector<SweepRawRow>* rows) {
  if (run.failed) {
    rows->push_back(
        {point, seed, "failed", std::numeric_limits<double>::quiet_NaN()});
    return;
  }
  for (const auto& [name, s] : run.validation.sets) {
    rows->push_back({point, seed, "val_" + name, s.error});
  }
  for (const auto& [name, s] : run.test.sets) {
    rows->push_back({point, seed, "test_" + name, s.error});
  }
}

}  // namespace detail

// Mean and sample standard deviation per grid point per set, recomputed
// from the raw per-run rows. Failed runs are excluded from the statistics
// but their count is carried on every aggregate row of their grid point.
inline std::vector<SweepAggregate> aggregate_sweep(
    const std::vector<SweepRawRow>& raw) {
  std::vector<std::string> point_order;
  std::map<std::string, SweepPoint> points;
  std::map<std::string, std::vector<std::string>> set_order;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::map<std::string, int> failed;

  for (const auto& row : raw) {
    const std::string key = row.point.key();
    if (!points.count(key)) {
      point_order.push_back(key);
      points[key] = row.point;
      failed[key] = 0;
    }
    if (row.set == "failed") {
      failed[key]++;
      continue;
    }
    auto& per_set = values[key];
    if (!per_set.count(row.set)) set_order[key].push_back(row.set);
    per_set[row.set].push_back(row.error);
  }

  std::vector<SweepAggregate> out;
  for (const auto& key : point_order) {
    for (const auto& set : set_order[key]) {
      const std::vector<double>& v = values[key][set];
      SweepAggregate agg;
      agg.point = points[key];
      agg.set = set;
      agg.n = static_cast<int>(v.size());
      agg.failed = failed[key];
      double sum = 0.0;
      for (const double x : v) sum += x;
      agg.mean = sum / static_cast<double>(v.size());
      if (v.size() > 1) {
        double sq = 0.0;
        for (const double x : v) sq += (x - agg.mean) * (x - agg.mean);
        agg.std_dev = std::sqrt(sq / static_cast<double>(v.size() - 1));
      }
      out.push_back(std::move(agg));
    }
    if (set_order[key].empty()) {
      // Every run at this point failed; keep one row so the point is never
      // silently dropped from the report.
      SweepAggregate agg;
      agg.point = points[key];
      agg.set = "failed";
      agg.mean = std::numeric_limits<double>::quiet_NaN();
      agg.failed = failed[key];
      out.push_back(std::move(agg));
    }
  }
  return out;
}

// Executes every grid point with every seed. Runs are independent; with
// workers > 1 they execute on a small thread pool, each writing into its own
// preassigned result slot so the collected output is identical regardless of
// worker count or completion order.
inline SweepResult run_sweep(const SweepGrid& grid, const SweepRunner& runner,
                             int workers = 1) {
  grid.validate();
  if (!runner) throw UsageError("sweep needs a runner");
  if (workers < 1) throw UsageError("sweep needs at least one worker");

  struct Task {
    SweepPoint point;
    uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const SweepPoint& p : grid.points()) {
    for (const uint64_t seed : grid.seeds) tasks.push_back({p, seed});
  }

  std::vector<std::vector<SweepRawRow>> slots(tasks.size());
  std::vector<uint8_t> task_failed(tasks.size(), 0);
  const auto execute = [&](size_t i) {
    const Task& task = tasks[i];
    try {
      const FewShotRun run = runner(task.point, task.seed);
      detail::append_raw_rows(task.point, task.seed, run, &slots[i]);
      task_failed[i] = run.failed ? 1 : 0;
    } catch (const std::exception& e) {
      warn(str_cat("sweep point ", task.point.key(), " seed ", task.seed,
                   " failed: ", e.what()));
      slots[i].push_back({task.point, task.seed, "failed",
                          std::numeric_limits<double>::quiet_NaN()});
      task_failed[i] = 1;
    }
  };

  const size_t pool = std::min<size_t>(static_cast<size_t>(workers),
                                       tasks.size());
  if (pool <= 1) {
    for (size_t i = 0; i < tasks.size(); ++i) execute(i);
  } else {
    std::atomic<size_t> cursor{0};
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (size_t w = 0; w < pool; ++w) {
      threads.emplace_back([&]() {
        for (size_t i = cursor.fetch_add(1); i < tasks.size();
             i = cursor.fetch_add(1)) {
          execute(i);
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  SweepResult result;
  for (size_t i = 0; i < slots.size(); ++i) {
    result.failed_runs += task_failed[i];
    for (auto& row : slots[i]) result.raw.push_back(std::move(row));
  }
  result.aggregates = aggregate_sweep(result.raw);
  return result;
}

inline void write_sweep_raw_csv(const std::string& path,
                                const std::vector<SweepRawRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sweep results: " + path);
  out << "strategy,f,k,lr,epochs,seed,set,error\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << strategy_name(r.point.strategy) << ',' << r.point.f << ','
        << r.point.k << ',' << r.point.lr << ',' << r.point.epochs << ','
        << r.seed << ',' << r.set << ',' << r.error << '\n';
  }
}

inline std::vector<SweepRawRow> read_sweep_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sweep results: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "strategy,f,k,lr,epochs,seed,set,error") {
    throw DataError("sweep results file has an unexpected header: " + path);
  }
  std::vector<SweepRawRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw DataError(str_cat("sweep results line ", line_no, " has ",
                              fields.size(), " fields, expected 8"));
    }
    SweepRawRow row;
    row.point.strategy = parse_strategy(fields[0]);
    row.point.f = std::stoi(fields[1]);
    row.point.k = std::stoi(fields[2]);
    row.point.lr = std::stod(fields[3]);
    row.point.epochs = std::stoi(fields[4]);
    row.seed = std::stoull(fields[5]);
    row.set = fields[6];
    row.error = std::stod(fields[7]);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_aggregate_csv(
    const std::string& path, const std::vector<SweepAggregate>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sweep aggregates: " + path);
  out << "strategy,f,k,lr,epochs,set,mean_error,std,n,failed\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << strategy_name(r.point.strategy) << ',' << r.point.f << ','
        << r.point.k << ',' << r.point.lr << ',' << r.point.epochs << ','
        << r.set << ',' << r.mean << ',' << r.std_dev << ',' << r.n << ','
        << r.failed << '\n';
  }
}

}  // namespace kws
