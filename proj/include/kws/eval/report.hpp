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
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kws/eval/category.hpp"

namespace kws {

struct SetError {
  double error = 0.0;  // percent
  int n = 0;
};

// Per-set classification errors for one evaluated split, plus the
// confusion matrix. The composite "unk" score is the equal-weight average
// of the org_unk and new_unk subset errors regardless of their sizes;
// when only one subset is present it stands alone.
struct EvalReport {
  std::map<std::string, SetError> sets;
  std::map<std::string, std::map<std::string, int>> confusion;  // ref -> pred
  std::optional<SetError> set(const std::string& name) const {
    const auto it = sets.find(name);
    if (it == sets.end()) return std::nullopt;
    return it->second;
  }
};

inline EvalReport build_report(const std::vector<EvalItem>& items) {
  EvalReport report;
  auto add = [&](const std::string& name, const std::string& subset) {
    int n = 0;
    int wrong = 0;
    for (const auto& item : items) {
      if (item.subset != subset) continue;
      ++n;
      if (item.predicted != item.reference) ++wrong;
    }
    if (n > 0) {
      report.sets[name] = {100.0 * wrong / n, n};
    }
  };
  add("org_kwd", "org_kwd");
  add("org_unk", "org_unk");
  add("new_unk", "new_unk");
  add("new_kwd", "new_kwd");
  add("silence", "silence");

  const auto org = report.set("org_unk");
  const auto nu = report.set("new_unk");
  if (org && nu) {
    report.sets["unk"] = {(org->error + nu->error) / 2.0, org->n + nu->n};
  } else if (org) {
    report.sets["unk"] = *org;
  } else if (nu) {
    report.sets["unk"] = *nu;
  }

  int n = 0;
  int wrong = 0;
  for (const auto& item : items) {
    ++n;
    if (item.predicted != item.reference) ++wrong;
    report.confusion[item.reference][item.predicted]++;
  }
  if (n > 0) report.sets["overall"] = {100.0 * wrong / n, n};
  return report;
}

// One row of the results file. `std_dev` is the sample standard deviation
// across repeated runs; single runs carry 0.
struct ReportRow {
  std::string model;
  std::string strategy;
  int f = 0;
  std::string set;
  std::string split;
  double error_pct = 0.0;
  int n = 0;
  double std_dev = 0.0;
};

inline void write_report_csv(const std::string& path,
                             const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << "model,strategy,f,set,split,error_pct,n,std\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.model << "," << r.strategy << "," << r.f << "," << r.set << ","
        << r.split << "," << r.error_pct << "," << r.n << "," << r.std_dev
        << "\n";
  }
}

// Renders rows as a fixed-width table: one line per (model, strategy, f,
// split), one column per requested set; cells without data print "-".
inline std::string render_report_table(
    const std::vector<ReportRow>& rows,
    const std::vector<std::string>& sets = {"org_kwd", "unk", "new_kwd"}) {
  struct Key {
    std::string model, strategy, split;
    int f;
    bool operator<(const Key& o) const {
      return std::tie(model, strategy, f, split) <
             std::tie(o.model, o.strategy, o.f, o.split);
    }
  };
  std::map<Key, std::map<std::string, double>> cells;
  std::vector<Key> order;
  for (const auto& r : rows) {
    const Key k{r.model, r.strategy, r.split, r.f};
    if (cells.find(k) == cells.end()) order.push_back(k);
    cells[k][r.set] = r.error_pct;
  }
  std::sort(order.begin(), order.end());

  std::ostringstream out;
  out << std::left << std::setw(18) << "model" << std::setw(18) << "strategy"
      << std::setw(5) << "f" << std::setw(12) << "split";
  for (const auto& s : sets) out << std::right << std::setw(10) << s;
  out << "\n";
  for (const auto& k : order) {
    out << std::left << std::setw(18) << k.model << std::setw(18)
        << k.strategy << std::setw(5) << k.f << std::setw(12) << k.split;
    for (const auto& s : sets) {
      const auto it = cells[k].find(s);
      if (it == cells[k].end()) {
        out << std::right << std::setw(10) << "-";
      } else {
        std::ostringstream v;
        v << std::fixed << std::setprecision(1) << it->second;
        out << std::right << std::setw(10) << v.str();
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace kws
