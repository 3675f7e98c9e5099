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
#include <filesystem>

#include "kws/io/archive.hpp"
#include "kws/io/wav.hpp"
#include "support/toy_corpus.hpp"

using namespace kws;

TEST_CASE("wav round trip preserves samples at int16 resolution") {
  const std::string dir = testing::fresh_temp_dir("wav");
  AudioClip clip;
  clip.sample_rate = 16000;
  for (int i = 0; i < 1600; ++i) {
    clip.samples.push_back(0.5 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0));
  }
  wavio::write_wav(dir + "/a.wav", clip);
  const AudioClip read = wavio::read_wav(dir + "/a.wav");
  REQUIRE(read.sample_rate == 16000);
  REQUIRE(read.samples.size() == clip.samples.size());
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    REQUIRE(std::abs(read.samples[i] - clip.samples[i]) < 1.0 / 32768.0);
  }
  REQUIRE(wavio::read_wav_duration_s(dir + "/a.wav") ==
          Catch::Approx(0.1).margin(1e-9));
}

TEST_CASE("wav reader rejects non-wav data") {
  const std::string dir = testing::fresh_temp_dir("badwav");
  {
    std::ofstream out(dir + "/bad.wav", std::ios::binary);
    out << "this is not audio";
  }
  REQUIRE_THROWS_AS(wavio::read_wav(dir + "/bad.wav"), DataError);
  REQUIRE_THROWS_AS(wavio::read_wav(dir + "/missing.wav"), DataError);
}

TEST_CASE("array archive round trips arrays and metadata") {
  const std::string dir = testing::fresh_temp_dir("archive");
  ArrayArchive ar;
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Matrix b = Matrix::Random(4, 4);
  ar.put("layer.weight", a);
  ar.put("layer.bias", b);
  ar.meta()["note"] = "hello";
  ar.meta()["epoch"] = 7;
  ar.save(dir + "/m.kwz");

  const ArrayArchive back = ArrayArchive::load(dir + "/m.kwz");
  REQUIRE(back.names() == std::vector<std::string>{"layer.weight",
                                                   "layer.bias"});
  REQUIRE(back.get("layer.weight") == a);
  REQUIRE(back.get("layer.bias") == b);
  REQUIRE(back.meta()["note"] == "hello");
  REQUIRE(back.meta()["epoch"] == 7);
  REQUIRE_THROWS_AS(back.get("nope"), DataError);
}

TEST_CASE("array archive rejects duplicates and corrupt files") {
  ArrayArchive ar;
  ar.put("x", Matrix::Zero(1, 1));
  REQUIRE_THROWS_AS(ar.put("x", Matrix::Zero(1, 1)), DataError);

  const std::string dir = testing::fresh_temp_dir("badar");
  {
    std::ofstream out(dir + "/bad.kwz", std::ios::binary);
    out << "garbage";
  }
  REQUIRE_THROWS_AS(ArrayArchive::load(dir + "/bad.kwz"), DataError);
}
