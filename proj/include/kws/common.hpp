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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kws {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error classes map onto the CLI exit codes: usage errors exit 1, data
// errors exit 2, training divergence exits 3.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg)
      : std::runtime_error(msg) {}
};

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Warnings go to stderr; tests may swap the sink to count them.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink =
      [](const std::string& msg) {
        std::lock_guard<std::mutex> lock(detail::log_mutex());
        std::cerr << "WARNING: " << msg << "\n";
      };
  return sink;
}

inline void warn(const std::string& msg) { warning_sink()(msg); }

template <typename... Args>
std::string str_cat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace kws
