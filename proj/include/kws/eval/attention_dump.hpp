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
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kws/labels/vocabulary.hpp"
#include "kws/model/beam.hpp"
#include "kws/model/network.hpp"

namespace kws {

// Shannon entropy (nats) of a discrete distribution; used to quantify how
// concentrated an attention row is versus the uniform baseline log(T').
inline double shannon_entropy(const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Trace matrices as tab-separated text: one row per emitted token, first
// column the token label, then one weight per encoder frame.

inline void write_attention_trace(const std::string& path,
                                  const Matrix& trace,
                                  const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != trace.rows()) {
    throw UsageError("one label per trace row required");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace: " + path);
  out.precision(9);
  out << std::fixed;
  for (Eigen::Index r = 0; r < trace.rows(); ++r) {
    out << labels[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < trace.cols(); ++c) {
      out << "\t" << trace(r, c);
    }
    out << "\n";
  }
}

inline std::pair<Matrix, std::vector<std::string>> read_attention_trace(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read trace: " + path);
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string label;
    std::getline(ss, label, '\t');
    labels.push_back(label);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, '\t')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty trace file: " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw DataError("ragged trace file: " + path);
    }
    for (size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return {m, labels};
}

// ---------------------------------------------------------------------------
// Heatmap rendering: an uncompressed 24-bit BMP with the token labels down
// the left edge (5x7 pixel glyphs) and frame indices along the bottom.

namespace detail {

// 5x7 pixel glyphs, one byte per row, low 5 bits used (bit 4 = leftmost).
inline const std::array<uint8_t, 7>* glyph5x7(char ch) {
  using G = std::array<uint8_t, 7>;
  static const std::map<char, G> font = {
      {'A', G{0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'B', G{0x1e, 0x11, 0x1e, 0x11, 0x11, 0x11, 0x1e}},
      {'C', G{0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
      {'D', G{0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
      {'E', G{0x1f, 0x10, 0x1e, 0x10, 0x10, 0x10, 0x1f}},
      {'F', G{0x1f, 0x10, 0x1e, 0x10, 0x10, 0x10, 0x10}},
      {'G', G{0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
      {'H', G{0x11, 0x11, 0x1f, 0x11, 0x11, 0x11, 0x11}},
      {'I', G{0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'J', G{0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
      {'K', G{0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', G{0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
      {'M', G{0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', G{0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', G{0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'P', G{0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
      {'Q', G{0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
      {'R', G{0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
      {'S', G{0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
      {'T', G{0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', G{0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'V', G{0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
      {'W', G{0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}},
      {'X', G{0x11, 0x0a, 0x04, 0x04, 0x04, 0x0a, 0x11}},
      {'Y', G{0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
      {'Z', G{0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
      {'0', G{0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', G{0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', G{0x0e, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1f}},
      {'3', G{0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', G{0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', G{0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', G{0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', G{0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', G{0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', G{0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'<', G{0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
      {'>', G{0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
      {'?', G{0x0e, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
      {'\'', G{0x04, 0x04, 0x08, 0x00, 0x00, 0x00, 0x00}},
      {'-', G{0x00, 0x00, 0x00, 0x0e, 0x00, 0x00, 0x00}},
      {'_', G{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
      {' ', G{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  const char up = static_cast<char>(
      std::toupper(static_cast<unsigned char>(ch)));
  const auto it = font.find(up);
  return it == font.end() ? nullptr : &it->second;
}

struct Canvas {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, top-down rows

  Canvas(int w, int h) : width(w), height(h), rgb(3u * w * h, 255) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const size_t i = 3u * (static_cast<size_t>(y) * width + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }

  void text(int x, int y, const std::string& s) {
    for (const char ch : s) {
      const auto* glyph = glyph5x7(ch);
      for (int gy = 0; gy < 7; ++gy) {
        for (int gx = 0; gx < 5; ++gx) {
          const bool on = glyph != nullptr
                              ? ((*glyph)[gy] >> (4 - gx)) & 1
                              : true;  // unknown characters: solid block
          if (on) set(x + gx, y + gy, 0, 0, 0);
        }
      }
      x += 6;
    }
  }

  void save_bmp(const std::string& path) const {
    const int row_bytes = ((3 * width + 3) / 4) * 4;
    const uint32_t data_size = static_cast<uint32_t>(row_bytes) * height;
    const uint32_t file_size = 54 + data_size;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);
    auto u16 = [&](uint16_t v) {
      out.put(static_cast<char>(v & 0xff));
      out.put(static_cast<char>(v >> 8));
    };
    auto u32 = [&](uint32_t v) {
      for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    out.put('B');
    out.put('M');
    u32(file_size);
    u32(0);
    u32(54);
    u32(40);  // BITMAPINFOHEADER
    u32(static_cast<uint32_t>(width));
    u32(static_cast<uint32_t>(height));
    u16(1);
    u16(24);
    u32(0);  // BI_RGB
    u32(data_size);
    u32(2835);
    u32(2835);
    u32(0);
    u32(0);
    std::vector<char> row(static_cast<size_t>(row_bytes), 0);
    for (int y = height - 1; y >= 0; --y) {  // bottom-up scanlines
      for (int x = 0; x < width; ++x) {
        const size_t i = 3u * (static_cast<size_t>(y) * width + x);
        row[3 * x] = static_cast<char>(rgb[i + 2]);      // blue
        row[3 * x + 1] = static_cast<char>(rgb[i + 1]);  // green
        row[3 * x + 2] = static_cast<char>(rgb[i]);      // red
      }
      out.write(row.data(), row_bytes);
    }
  }
};

}  // namespace detail

// Renders the trace as a heatmap: token labels on the vertical axis, frame
// indices on the horizontal axis, cell intensity scaled by the matrix
// maximum (white = 0, saturated red = max).
inline void render_attention_heatmap(const std::string& path,
                                     const Matrix& trace,
                                     const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != trace.rows()) {
    throw UsageError("one label per trace row required");
  }
  constexpr int kCell = 10;
  size_t max_label = 1;
  for (const auto& l : labels) max_label = std::max(max_label, l.size());
  const int margin_left = static_cast<int>(max_label) * 6 + 6;
  const int margin_top = 4;
  const int margin_bottom = 14;
  const int width =
      margin_left + kCell * static_cast<int>(trace.cols()) + 4;
  const int height = margin_top + kCell * static_cast<int>(trace.rows()) +
                     margin_bottom;
  detail::Canvas canvas(width, height);

  const double peak = std::max(trace.maxCoeff(), 1e-12);
  for (Eigen::Index r = 0; r < trace.rows(); ++r) {
    for (Eigen::Index c = 0; c < trace.cols(); ++c) {
      const double v = std::clamp(trace(r, c) / peak, 0.0, 1.0);
      const auto fade = static_cast<uint8_t>(std::lround(255.0 * (1.0 - v)));
      for (int dy = 0; dy < kCell - 1; ++dy) {
        for (int dx = 0; dx < kCell - 1; ++dx) {
          canvas.set(margin_left + static_cast<int>(c) * kCell + dx,
                     margin_top + static_cast<int>(r) * kCell + dy, 255,
                     fade, fade);
        }
      }
    }
    canvas.text(2, margin_top + static_cast<int>(r) * kCell + 1,
                labels[static_cast<size_t>(r)]);
  }
  const int axis_y = margin_top + kCell * static_cast<int>(trace.rows()) + 2;
  for (Eigen::Index c = 0; c < trace.cols(); c += 5) {
    canvas.text(margin_left + static_cast<int>(c) * kCell, axis_y + 3,
                std::to_string(c));
    canvas.set(margin_left + static_cast<int>(c) * kCell, axis_y, 0, 0, 0);
    canvas.set(margin_left + static_cast<int>(c) * kCell, axis_y + 1, 0, 0,
               0);
  }
  canvas.save_bmp(path);
}

// ---------------------------------------------------------------------------
// Batch export for a decoded model.

struct AttentionUtterance {
  std::string name;  // file stem for the outputs
  FeatureMatrix features;
};

// Decodes each utterance and writes <out_dir>/<name>.tsv plus .bmp. A
// failed decode logs a warning and skips the utterance. Returns the number
// of utterances written.
inline int dump_attention(const Network& net, const Vocabulary& vocab,
                          const std::vector<AttentionUtterance>& utterances,
                          const std::string& out_dir,
                          const DecodeOptions& opt) {
  std::filesystem::create_directories(out_dir);
  int written = 0;
  for (const auto& utt : utterances) {
    try {
      const DecodeResult r = beam_decode(net, utt.features, opt);
      std::vector<std::string> labels = vocab.decode(r.tokens);
      if (r.ended_with_eos) labels.emplace_back("<eos>");
      const auto base = std::filesystem::path(out_dir) / utt.name;
      write_attention_trace(base.string() + ".tsv", r.trace, labels);
      render_attention_heatmap(base.string() + ".bmp", r.trace, labels);
      ++written;
    } catch (const std::exception& e) {
      warn(str_cat("attention dump skipped '", utt.name, "': ", e.what()));
    }
  }
  return written;
}

}  // namespace kws
