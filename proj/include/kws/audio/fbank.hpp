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
#include <complex>
#include <fstream>
#include <string>
#include <vector>

#include "kws/common.hpp"
#include "kws/io/wav.hpp"

namespace kws {

// Log-mel filterbank front-end. The bin count is the only value fixed by the
// task; framing, window and mel range are conventional and configurable.
struct FbankConfig {
  int num_bins = 80;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double fmin_hz = 20.0;
  double fmax_hz = 7600.0;
  double log_floor = 1e-10;
  int sample_rate = 16000;
};

struct FeatureMatrix {
  Matrix frames;  // T x num_bins
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

namespace detail {

// Iterative radix-2 FFT, in place. n must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filters as a (num_bins x num_fft_bins) weight matrix.
// Filter i peaks at the i-th interior mel point and tapers to zero at its
// neighbours.
inline Matrix mel_filter_weights(const FbankConfig& cfg, int fft_size) {
  const int num_fft_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<size_t>(cfg.num_bins) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      (cfg.num_bins + 1));
  }
  Matrix weights = Matrix::Zero(cfg.num_bins, num_fft_bins);
  const double hz_per_bin =
      static_cast<double>(cfg.sample_rate) / fft_size;
  for (int b = 0; b < cfg.num_bins; ++b) {
    const double left = edges[static_cast<size_t>(b)];
    const double center = edges[static_cast<size_t>(b) + 1];
    const double right = edges[static_cast<size_t>(b) + 2];
    for (int k = 0; k < num_fft_bins; ++k) {
      const double f = k * hz_per_bin;
      if (f <= left || f >= right) continue;
      weights(b, k) = f <= center ? (f - left) / (center - left)
                                  : (right - f) / (right - center);
    }
  }
  return weights;
}

}  // namespace detail

// T = 1 + floor((samples - window) / shift); clips shorter than one window
// are rejected.
inline Eigen::Index fbank_frame_count(size_t num_samples,
                                      const FbankConfig& cfg) {
  const size_t window = static_cast<size_t>(
      cfg.frame_length_ms * cfg.sample_rate / 1000.0 + 0.5);
  const size_t shift = static_cast<size_t>(
      cfg.frame_shift_ms * cfg.sample_rate / 1000.0 + 0.5);
  if (num_samples < window) return 0;
  return static_cast<Eigen::Index>(1 + (num_samples - window) / shift);
}

inline FeatureMatrix compute_fbank(const AudioClip& clip,
                                   const FbankConfig& cfg = {}) {
  if (clip.sample_rate != cfg.sample_rate) {
    throw DataError(str_cat("expected sample rate ", cfg.sample_rate,
                            ", got ", clip.sample_rate));
  }
  const int window =
      static_cast<int>(cfg.frame_length_ms * cfg.sample_rate / 1000.0 + 0.5);
  const int shift =
      static_cast<int>(cfg.frame_shift_ms * cfg.sample_rate / 1000.0 + 0.5);
  const Eigen::Index num_frames = fbank_frame_count(clip.samples.size(), cfg);
  if (num_frames < 1) {
    throw DataError(str_cat("clip too short for one frame: ",
                            clip.samples.size(), " samples, window ", window));
  }
  for (const double s : clip.samples) {
    if (!std::isfinite(s)) throw DataError("non-finite sample in audio clip");
  }

  int fft_size = 1;
  while (fft_size < window) fft_size <<= 1;

  Vector hann(window);
  for (int n = 0; n < window; ++n) {
    hann(n) = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / (window - 1));
  }
  const Matrix mel = detail::mel_filter_weights(cfg, fft_size);

  FeatureMatrix features;
  features.frame_length_ms = cfg.frame_length_ms;
  features.frame_shift_ms = cfg.frame_shift_ms;
  features.frames.resize(num_frames, cfg.num_bins);

  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  Vector power(fft_size / 2 + 1);
  for (Eigen::Index t = 0; t < num_frames; ++t) {
    const size_t start = static_cast<size_t>(t) * shift;
    for (int n = 0; n < window; ++n) {
      buf[static_cast<size_t>(n)] = clip.samples[start + n] * hann(n);
    }
    for (int n = window; n < fft_size; ++n) buf[static_cast<size_t>(n)] = 0.0;
    detail::fft(buf);
    for (int k = 0; k <= fft_size / 2; ++k) {
      power(k) = std::norm(buf[static_cast<size_t>(k)]);
    }
    Vector energies = mel * power;
    for (int b = 0; b < cfg.num_bins; ++b) {
      features.frames(t, b) = std::log(std::max(energies(b), cfg.log_floor));
    }
  }
  return features;
}

// Global per-dimension statistics, estimated on the training split only.
struct FeatureStats {
  Vector mean;
  Vector variance;
};

inline FeatureStats compute_feature_stats(
    const std::vector<const FeatureMatrix*>& features) {
  if (features.empty()) throw DataError("no features to compute stats from");
  const Eigen::Index dim = features.front()->dim();
  Vector sum = Vector::Zero(dim);
  Vector sum_sq = Vector::Zero(dim);
  double n = 0.0;
  for (const FeatureMatrix* f : features) {
    if (f->dim() != dim) throw DataError("inconsistent feature dimensions");
    sum += f->frames.colwise().sum().transpose();
    sum_sq += f->frames.array().square().colwise().sum().matrix().transpose();
    n += static_cast<double>(f->num_frames());
  }
  FeatureStats stats;
  stats.mean = sum / n;
  stats.variance =
      (sum_sq / n - stats.mean.array().square().matrix()).cwiseMax(0.0);
  return stats;
}

inline void apply_normalization(FeatureMatrix& features,
                                const FeatureStats& stats) {
  if (features.dim() != stats.mean.size()) {
    throw DataError("feature/stats dimension mismatch");
  }
  for (Eigen::Index d = 0; d < features.dim(); ++d) {
    double sigma = std::sqrt(stats.variance(d));
    if (sigma == 0.0) {
      warn(str_cat("zero variance in feature dimension ", d,
                   "; using unit divisor"));
      sigma = 1.0;
    }
    features.frames.col(d) =
        (features.frames.col(d).array() - stats.mean(d)) / sigma;
  }
}

// Stats file: one row per dimension, "<mean>\t<variance>".
inline void save_feature_stats(const FeatureStats& stats,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write stats file: " + path);
  out.precision(17);
  for (Eigen::Index d = 0; d < stats.mean.size(); ++d) {
    out << stats.mean(d) << "\t" << stats.variance(d) << "\n";
  }
}

inline FeatureStats load_feature_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stats file: " + path);
  std::vector<double> means, vars;
  double m, v;
  while (in >> m >> v) {
    means.push_back(m);
    vars.push_back(v);
  }
  if (means.empty()) throw DataError("empty stats file: " + path);
  FeatureStats stats;
  stats.mean = Eigen::Map<Vector>(means.data(),
                                  static_cast<Eigen::Index>(means.size()));
  stats.variance =
      Eigen::Map<Vector>(vars.data(), static_cast<Eigen::Index>(vars.size()));
  return stats;
}

}  // namespace kws
