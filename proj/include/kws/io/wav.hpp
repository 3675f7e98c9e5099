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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "kws/common.hpp"

namespace kws {

// Mono waveform. Samples are in [-1, 1] (int16 scaled by 1/32768).
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

namespace wavio {

namespace detail {

inline uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

inline void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads a 16-bit PCM mono RIFF/WAVE file. Anything else is a data error.
inline AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }
  size_t pos = 12;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  const unsigned char* data = nullptr;
  size_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    const uint32_t chunk_len = detail::read_u32(buf.data() + pos + 4);
    const unsigned char* body = buf.data() + pos + 8;
    if (pos + 8 + chunk_len > buf.size()) break;
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
      const uint16_t format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      sample_rate = static_cast<int>(detail::read_u32(body + 4));
      bits = detail::read_u16(body + 14);
      if (format != 1) {
        throw DataError("wav is not plain PCM: " + path);
      }
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (sample_rate == 0 || data == nullptr) {
    throw DataError("wav missing fmt/data chunk: " + path);
  }
  if (channels != 1 || bits != 16) {
    throw DataError(str_cat("expected 16-bit mono wav, got ", channels,
                            " channel(s) at ", bits, " bits: ", path));
  }
  AudioClip clip;
  clip.sample_rate = sample_rate;
  const size_t n = data_len / 2;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t s =
        static_cast<int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    clip.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return clip;
}

// Reads just the header to get duration; avoids decoding samples when
// scanning a large corpus.
inline double read_wav_duration_s(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  unsigned char head[12];
  if (!in.read(reinterpret_cast<char*>(head), 12) ||
      std::memcmp(head, "RIFF", 4) != 0 ||
      std::memcmp(head + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }
  int sample_rate = 0;
  int channels = 1;
  int bits = 16;
  double data_len = -1.0;
  unsigned char chunk[8];
  while (in.read(reinterpret_cast<char*>(chunk), 8)) {
    const uint32_t len = detail::read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      unsigned char body[16];
      if (!in.read(reinterpret_cast<char*>(body), 16)) break;
      channels = detail::read_u16(body + 2);
      sample_rate = static_cast<int>(detail::read_u32(body + 4));
      bits = detail::read_u16(body + 14);
      in.seekg(len - 16 + (len & 1), std::ios::cur);
    } else {
      if (std::memcmp(chunk, "data", 4) == 0) {
        data_len = static_cast<double>(len);
        break;
      }
      in.seekg(len + (len & 1), std::ios::cur);
    }
  }
  if (sample_rate <= 0 || data_len < 0 || channels <= 0 || bits <= 0) {
    throw DataError("wav missing fmt/data chunk: " + path);
  }
  const double bytes_per_sample = channels * bits / 8.0;
  return data_len / bytes_per_sample / sample_rate;
}

inline void write_wav(const std::string& path, const AudioClip& clip) {
  std::string out;
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  out.reserve(44 + 2 * n);
  out += "RIFF";
  detail::put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<uint32_t>(clip.sample_rate));
  detail::put_u32(out, static_cast<uint32_t>(clip.sample_rate * 2));
  detail::put_u16(out, 2);   // block align
  detail::put_u16(out, 16);  // bits
  out += "data";
  detail::put_u32(out, 2 * n);
  for (const double s : clip.samples) {
    double v = s * 32768.0;
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    detail::put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write wav file: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace wavio
}  // namespace kws
