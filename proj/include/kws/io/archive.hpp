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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kws/common.hpp"

namespace kws {

// Single-file named-array archive used for checkpoints and feature caches.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "KWSAR01\n"
//   bytes 8..15  uint64 length of the JSON header
//   JSON header  {"meta": {...}, "arrays": [{"name", "rows", "cols",
//                "offset"}]}; offsets are relative to the start of the data
//                section, in bytes
//   data section float64 values, row-major, one block per array
//
// The header is plain JSON so the file stays readable by independent
// tooling; the exact array names written by the checkpointing code are
// documented in the README.
class ArrayArchive {
 public:
  using json = nlohmann::json;

  void put(const std::string& name, const Matrix& m) {
    if (index_.count(name)) {
      throw DataError("duplicate array name in archive: " + name);
    }
    index_[name] = arrays_.size();
    names_.push_back(name);
    arrays_.push_back(m);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const Matrix& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw DataError("array not found in archive: " + name);
    }
    return arrays_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }

  json& meta() { return meta_; }
  const json& meta() const { return meta_; }

  void save(const std::string& path) const {
    json header;
    header["meta"] = meta_;
    header["arrays"] = json::array();
    uint64_t offset = 0;
    for (size_t i = 0; i < arrays_.size(); ++i) {
      const Matrix& m = arrays_[i];
      header["arrays"].push_back({{"name", names_[i]},
                                  {"rows", m.rows()},
                                  {"cols", m.cols()},
                                  {"offset", offset}});
      offset += static_cast<uint64_t>(m.size()) * sizeof(double);
    }
    const std::string hdr = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write archive: " + path);
    out.write(kMagic, 8);
    uint64_t hdr_len = hdr.size();
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) {
      len_bytes[i] = static_cast<char>((hdr_len >> (8 * i)) & 0xff);
    }
    out.write(len_bytes, 8);
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (const Matrix& m : arrays_) {
      // Row-major on disk regardless of Eigen's in-memory layout.
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          const double v = m(r, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
      }
    }
    if (!out) throw DataError("short write on archive: " + path);
  }

  static ArrayArchive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open archive: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
      throw DataError("bad archive magic: " + path);
    }
    char len_bytes[8];
    if (!in.read(len_bytes, 8)) throw DataError("truncated archive: " + path);
    uint64_t hdr_len = 0;
    for (int i = 0; i < 8; ++i) {
      hdr_len |= static_cast<uint64_t>(static_cast<unsigned char>(len_bytes[i]))
                 << (8 * i);
    }
    std::string hdr(hdr_len, '\0');
    if (!in.read(hdr.data(), static_cast<std::streamsize>(hdr_len))) {
      throw DataError("truncated archive header: " + path);
    }
    json header = json::parse(hdr);
    ArrayArchive ar;
    ar.meta_ = header.value("meta", json::object());
    const std::streampos data_start = in.tellg();
    for (const auto& entry : header["arrays"]) {
      const std::string name = entry.at("name").get<std::string>();
      const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
      const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
      const uint64_t offset = entry.at("offset").get<uint64_t>();
      in.seekg(data_start + static_cast<std::streamoff>(offset));
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          double v;
          if (!in.read(reinterpret_cast<char*>(&v), sizeof(double))) {
            throw DataError("truncated array data in archive: " + path);
          }
          m(r, c) = v;
        }
      }
      ar.put(name, m);
    }
    return ar;
  }

 private:
  static constexpr const char* kMagic = "KWSAR01\n";

  json meta_ = json::object();
  std::vector<std::string> names_;
  std::vector<Matrix> arrays_;
  std::map<std::string, size_t> index_;
};

}  // namespace kws
