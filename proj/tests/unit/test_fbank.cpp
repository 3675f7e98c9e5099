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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "kws/audio/fbank.hpp"
#include "kws/rng.hpp"
#include "support/toy_corpus.hpp"

using namespace kws;

namespace {

int window_of(const FbankConfig& cfg) {
  return static_cast<int>(cfg.frame_length_ms * cfg.sample_rate / 1000.0 +
                          0.5);
}

int shift_of(const FbankConfig& cfg) {
  return static_cast<int>(cfg.frame_shift_ms * cfg.sample_rate / 1000.0 +
                          0.5);
}

int fft_of(const FbankConfig& cfg) {
  int n = 1;
  while (n < window_of(cfg)) n <<= 1;
  return n;
}

// Independent reference: naive O(n^2) DFT of one windowed frame followed by
// the same triangular mel projection, written from the textbook formulas
// without reusing any library code paths.
std::vector<double> naive_frame_logmel(const std::vector<double>& samples,
                                       size_t start, const FbankConfig& cfg) {
  const int window = window_of(cfg);
  const int nfft = fft_of(cfg);
  std::vector<std::complex<double>> x(static_cast<size_t>(nfft), 0.0);
  for (int n = 0; n < window; ++n) {
    const double w =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (window - 1));
    x[static_cast<size_t>(n)] = samples[start + static_cast<size_t>(n)] * w;
  }
  const int nbins = nfft / 2 + 1;
  std::vector<double> power(static_cast<size_t>(nbins), 0.0);
  for (int k = 0; k < nbins; ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < nfft; ++n) {
      const double ang = -2.0 * std::numbers::pi * k * n / nfft;
      acc += x[static_cast<size_t>(n)] *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    power[static_cast<size_t>(k)] = std::norm(acc);
  }

  auto to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };
  const double mel_lo = to_mel(cfg.fmin_hz);
  const double mel_hi = to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<size_t>(cfg.num_bins) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                  (cfg.num_bins + 1));
  }
  std::vector<double> out(static_cast<size_t>(cfg.num_bins), 0.0);
  for (int m = 0; m < cfg.num_bins; ++m) {
    double acc = 0.0;
    for (int k = 0; k < nbins; ++k) {
      const double hz = static_cast<double>(k) * cfg.sample_rate / nfft;
      const double left = edges[static_cast<size_t>(m)];
      const double center = edges[static_cast<size_t>(m) + 1];
      const double right = edges[static_cast<size_t>(m) + 2];
      double w = 0.0;
      if (hz > left && hz <= center) {
        w = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        w = (right - hz) / (right - center);
      }
      acc += w * power[static_cast<size_t>(k)];
    }
    out[static_cast<size_t>(m)] = std::log(std::max(acc, cfg.log_floor));
  }
  return out;
}

}  // namespace

TEST_CASE("frame count follows the sliding-window formula") {
  const FbankConfig cfg;
  REQUIRE(window_of(cfg) == 400);
  REQUIRE(shift_of(cfg) == 160);
  REQUIRE(fft_of(cfg) == 512);
  REQUIRE(fbank_frame_count(16000, cfg) == 98);
  REQUIRE(fbank_frame_count(400, cfg) == 1);
  REQUIRE(fbank_frame_count(399, cfg) == 0);
  REQUIRE(fbank_frame_count(560, cfg) == 2);
  REQUIRE(fbank_frame_count(559, cfg) == 1);
  REQUIRE(fbank_frame_count(0, cfg) == 0);
}

TEST_CASE("all-zero audio hits the log floor everywhere") {
  const FbankConfig cfg;
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.assign(16000, 0.0);
  const FeatureMatrix feat = compute_fbank(clip, cfg);
  REQUIRE(feat.num_frames() == 98);
  REQUIRE(feat.dim() == 80);
  const double floor_log = std::log(cfg.log_floor);
  for (Eigen::Index t = 0; t < feat.num_frames(); ++t) {
    for (Eigen::Index d = 0; d < feat.dim(); ++d) {
      REQUIRE(feat.frames(t, d) == Catch::Approx(floor_log).margin(1e-12));
    }
  }
}

TEST_CASE("fbank matches a naive DFT + mel oracle") {
  const FbankConfig cfg;
  AudioClip clip;
  clip.sample_rate = 16000;
  Rng rng(321);
  clip.samples.resize(1200);
  for (size_t n = 0; n < clip.samples.size(); ++n) {
    clip.samples[n] =
        0.4 * std::sin(2.0 * std::numbers::pi * 1000.0 *
                       static_cast<double>(n) / 16000.0) +
        0.05 * rng.normal();
  }
  const FeatureMatrix feat = compute_fbank(clip, cfg);
  REQUIRE(feat.num_frames() == fbank_frame_count(clip.samples.size(), cfg));

  for (Eigen::Index t = 0; t < feat.num_frames(); ++t) {
    const auto ref = naive_frame_logmel(
        clip.samples, static_cast<size_t>(t) * shift_of(cfg), cfg);
    for (Eigen::Index d = 0; d < feat.dim(); ++d) {
      REQUIRE(feat.frames(t, d) ==
              Catch::Approx(ref[static_cast<size_t>(d)]).margin(1e-8));
    }
  }
}

TEST_CASE("a pure tone concentrates energy at the right mel bin") {
  const FbankConfig cfg;
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(16000);
  for (size_t n = 0; n < clip.samples.size(); ++n) {
    clip.samples[n] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 *
                                     static_cast<double>(n) / 16000.0);
  }
  const FeatureMatrix feat = compute_fbank(clip, cfg);

  // Independently find which filter is centered nearest 1 kHz.
  auto to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };
  const double mel_lo = to_mel(cfg.fmin_hz), mel_hi = to_mel(cfg.fmax_hz);
  int expect = 0;
  double best = 1e18;
  for (int m = 0; m < cfg.num_bins; ++m) {
    const double center =
        to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.num_bins + 1));
    if (std::abs(center - 1000.0) < best) {
      best = std::abs(center - 1000.0);
      expect = m;
    }
  }
  for (Eigen::Index t = 10; t < 20; ++t) {
    Eigen::Index argmax = 0;
    for (Eigen::Index d = 1; d < feat.dim(); ++d) {
      if (feat.frames(t, d) > feat.frames(t, argmax)) argmax = d;
    }
    REQUIRE(std::abs(static_cast<int>(argmax) - expect) <= 1);
  }
}

TEST_CASE("fbank rejects mismatched rates and non-finite samples") {
  const FbankConfig cfg;
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(8000, 0.0);
  REQUIRE_THROWS_AS(compute_fbank(clip, cfg), DataError);

  clip.sample_rate = 16000;
  clip.samples.assign(16000, 0.0);
  clip.samples[123] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(compute_fbank(clip, cfg), DataError);

  clip.samples.assign(100, 0.0);  // shorter than one window
  REQUIRE_THROWS_AS(compute_fbank(clip, cfg), DataError);
}

TEST_CASE("normalization yields zero mean and unit variance on its input") {
  const FbankConfig cfg;
  Rng rng(77);
  std::vector<FeatureMatrix> feats;
  for (int i = 0; i < 6; ++i) {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(static_cast<size_t>(4000 + 800 * i));
    for (auto& s : clip.samples) s = 0.3 * rng.normal();
    feats.push_back(compute_fbank(clip, cfg));
  }

  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  const FeatureStats stats = compute_feature_stats(ptrs);
  REQUIRE(stats.mean.size() == cfg.num_bins);
  for (auto& f : feats) apply_normalization(f, stats);

  Vector mean = Vector::Zero(cfg.num_bins);
  Vector sq = Vector::Zero(cfg.num_bins);
  long total = 0;
  for (const auto& f : feats) {
    for (Eigen::Index t = 0; t < f.num_frames(); ++t) {
      mean += f.frames.row(t).transpose();
      sq += f.frames.row(t).cwiseProduct(f.frames.row(t)).transpose();
      ++total;
    }
  }
  mean /= static_cast<double>(total);
  sq /= static_cast<double>(total);
  for (int d = 0; d < cfg.num_bins; ++d) {
    REQUIRE(mean[d] == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(sq[d] - mean[d] * mean[d] == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("zero-variance dimensions normalize without dividing by zero") {
  const FbankConfig cfg;
  FeatureMatrix flat;
  flat.frames = Matrix::Constant(10, cfg.num_bins, std::log(cfg.log_floor));
  const FeatureStats stats = compute_feature_stats({&flat});

  int warnings = 0;
  auto saved = warning_sink();
  warning_sink() = [&](const std::string&) { ++warnings; };
  FeatureMatrix copy = flat;
  apply_normalization(copy, stats);
  warning_sink() = saved;
  REQUIRE(warnings >= 1);
  for (Eigen::Index t = 0; t < copy.num_frames(); ++t) {
    for (Eigen::Index d = 0; d < copy.dim(); ++d) {
      REQUIRE(std::isfinite(copy.frames(t, d)));
      REQUIRE(copy.frames(t, d) == Catch::Approx(0.0).margin(1e-12));
    }
  }
}

TEST_CASE("feature stats survive a file round trip") {
  const FbankConfig cfg;
  Rng rng(9);
  std::vector<FeatureMatrix> feats;
  for (int i = 0; i < 3; ++i) {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(3200);
    for (auto& s : clip.samples) s = 0.2 * rng.normal() + 0.1;
    feats.push_back(compute_fbank(clip, cfg));
  }
  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  const FeatureStats stats = compute_feature_stats(ptrs);
  const std::string dir = testing::fresh_temp_dir("stats");
  save_feature_stats(stats, dir + "/stats.tsv");
  const FeatureStats back = load_feature_stats(dir + "/stats.tsv");
  REQUIRE(back.mean.size() == stats.mean.size());
  for (Eigen::Index d = 0; d < stats.mean.size(); ++d) {
    REQUIRE(back.mean[d] == stats.mean[d]);
    REQUIRE(back.variance[d] == stats.variance[d]);
  }
}
