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

#include <openssl/sha.h>

#include <string>
#include <string_view>

#include "kws/common.hpp"

namespace kws {

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    default: return "test";
  }
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "val") return Split::validation;
  if (s == "test") return Split::test;
  throw UsageError("unknown split '" + s + "'");
}

// Split assignment mirrors the reference procedure of the public dataset
// bit for bit so that splits line up with the original challenge:
//   h   = SHA1(speaker_id) as a big-endian integer
//   b   = h mod 2^27
//   pct = b * (100.0 / (2^27 - 1))
//   pct < val_pct                 -> validation
//   pct < val_pct + test_pct      -> test
//   otherwise                     -> train
// Note the asymmetry between the modulus (2^27) and the scale (2^27 - 1);
// it is part of the reference procedure and is kept as-is.
inline double split_bucket_pct(std::string_view speaker_id) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(speaker_id.data()),
       speaker_id.size(), digest);
  // mod 2^27 touches only the low 27 bits of the 160-bit digest.
  const uint32_t low = (static_cast<uint32_t>(digest[16]) << 24) |
                       (static_cast<uint32_t>(digest[17]) << 16) |
                       (static_cast<uint32_t>(digest[18]) << 8) |
                       static_cast<uint32_t>(digest[19]);
  const uint32_t bucket = low & ((1u << 27) - 1);
  return bucket * (100.0 / ((1u << 27) - 1));
}

inline Split assign_split(std::string_view speaker_id, double val_pct,
                          double test_pct) {
  const double pct = split_bucket_pct(speaker_id);
  if (pct < val_pct) return Split::validation;
  if (pct < val_pct + test_pct) return Split::test;
  return Split::train;
}

}  // namespace kws
