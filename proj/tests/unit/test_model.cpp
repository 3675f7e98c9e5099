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
#include <fstream>
#include <limits>
#include <vector>

#include "kws/model/beam.hpp"
#include "kws/model/checkpoint.hpp"
#include "kws/model/network.hpp"
#include "kws/model/trainer.hpp"
#include "kws/rng.hpp"
#include "support/grad_check.hpp"

using namespace kws;
using kws::testing::random_matrix;

namespace {

// Smallest configuration that still exercises every code path: 2-channel
// convolutions, a single 4-unit BiLSTM, a 5-token vocabulary.
ModelConfig micro_config(double ctc_weight) {
  ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.conv_channels = {2, 2, 2, 2};
  cfg.enc_layers = 1;
  cfg.enc_units = 4;
  cfg.dec_units = 6;
  cfg.embed_dim = 5;
  cfg.att_dim = 7;
  cfg.att_channels = 2;
  cfg.att_width = 3;
  cfg.ctc_weight = ctc_weight;
  cfg.vocab_size = 5;
  return cfg;
}

FeatureMatrix random_features(Eigen::Index frames, Eigen::Index dim,
                              Rng* rng) {
  FeatureMatrix f;
  f.frames = random_matrix(frames, dim, rng);
  return f;
}

Vocabulary micro_vocab() {
  Vocabulary v;
  v.scheme = LabelScheme::phoneme;
  v.tokens = {"<blank>", "<sos>", "<eos>", "UNK", "SIL"};
  v.validate();
  return v;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("downsampled length matches the ceil formula for T in [1,1000]") {
  for (Eigen::Index T = 1; T <= 1000; ++T) {
    const auto expected = static_cast<Eigen::Index>(
        std::ceil(std::ceil(static_cast<double>(T) / 2.0) / 2.0));
    REQUIRE(Encoder::downsampled_length(T) == expected);
  }
  REQUIRE(Encoder::downsampled_length(98) == 25);
  REQUIRE(Encoder::downsampled_length(1) == 1);
  REQUIRE(Encoder::downsampled_length(400) == 100);
}

TEST_CASE("joint loss gradients match finite differences at each mix") {
  Rng rng(17);
  const FeatureMatrix feats = random_features(8, 8, &rng);
  const std::vector<int> targets = {3, 4};
  for (const double lambda : {0.0, 0.5, 1.0}) {
    Network net(micro_config(lambda), 11);
    net.params().zero_grads();
    Network::ForwardCache cache;
    const auto loss = net.forward_loss(feats, targets, &cache);
    REQUIRE(std::isfinite(loss.joint));
    net.backward(cache);
    auto loss_fn = [&]() {
      return net.forward_loss(feats, targets, nullptr).joint;
    };
    const auto check =
        kws::testing::check_param_grads(&net.params(), loss_fn);
    INFO("lambda=" << lambda << " worst: " << check.worst);
    REQUIRE(check.max_rel_err < 1e-4);
  }
}

TEST_CASE("loss mix endpoints are exact") {
  Rng rng(3);
  const FeatureMatrix feats = random_features(9, 8, &rng);
  const std::vector<int> targets = {4};

  Network att_only(micro_config(0.0), 21);
  Network ctc_only(micro_config(1.0), 21);
  Network mixed(micro_config(0.5), 21);

  const auto l0 = att_only.forward_loss(feats, targets, nullptr);
  const auto l1 = ctc_only.forward_loss(feats, targets, nullptr);
  const auto lm = mixed.forward_loss(feats, targets, nullptr);

  REQUIRE(l0.joint == l0.att);
  REQUIRE(l1.joint == l1.ctc);
  // Same init seed -> same weights, so the branches agree across nets.
  REQUIRE(lm.att == Catch::Approx(l0.att).margin(1e-12));
  REQUIRE(lm.ctc == Catch::Approx(l1.ctc).margin(1e-12));
  REQUIRE(lm.joint ==
          Catch::Approx(0.5 * (lm.ctc + lm.att)).margin(1e-6));
}

TEST_CASE("infeasible alignments flag the loss instead of crashing") {
  Rng rng(5);
  // 8 frames -> 2 encoder states; a 3-token target cannot align.
  const FeatureMatrix feats = random_features(8, 8, &rng);
  Network net(micro_config(0.5), 9);
  const auto loss = net.forward_loss(feats, {3, 4, 3}, nullptr);
  REQUIRE(!loss.ctc_feasible);
  REQUIRE(std::isinf(loss.joint));

  // With the CTC branch disabled the same utterance trains fine.
  Network att_only(micro_config(0.0), 9);
  const auto l0 = att_only.forward_loss(feats, {3, 4, 3}, nullptr);
  REQUIRE(std::isfinite(l0.joint));
}

TEST_CASE("teacher-forced attention trace is a row-stochastic L x T' matrix") {
  Rng rng(23);
  const FeatureMatrix feats = random_features(13, 8, &rng);
  Network net(micro_config(0.5), 2);
  const Matrix enc = net.encode(feats);
  REQUIRE(enc.cols() == Encoder::downsampled_length(13));

  const std::vector<int> inputs = {Network::kSosId, 3, 4};
  const std::vector<int> golds = {3, 4, Network::kEosId};
  const auto tf = net.decoder().teacher_forced(enc, inputs, golds, nullptr);
  REQUIRE(tf.trace.rows() == 3);
  REQUIRE(tf.trace.cols() == enc.cols());
  for (Eigen::Index r = 0; r < tf.trace.rows(); ++r) {
    REQUIRE(tf.trace.row(r).sum() == Catch::Approx(1.0).margin(1e-5));
    REQUIRE(tf.trace.row(r).minCoeff() >= 0.0);
    REQUIRE(tf.trace.row(r).maxCoeff() <= 1.0);
  }
  REQUIRE(std::isfinite(tf.loss));
}

TEST_CASE("checkpoint round trip reproduces the decode bit for bit") {
  Rng rng(31);
  const FeatureMatrix feats = random_features(12, 8, &rng);
  Network net(micro_config(0.5), 77);
  const Vocabulary vocab = micro_vocab();

  DecodeOptions opt;
  opt.beam_size = 3;
  const DecodeResult before = beam_decode(net, feats, opt);

  const auto path = temp_path("kws_ckpt_roundtrip.kwsar");
  CheckpointMeta meta;
  meta.epoch = 4;
  meta.seed = 77;
  meta.val_error = 12.5;
  save_checkpoint(path.string(), net, vocab, meta);

  const LoadedCheckpoint loaded = load_checkpoint(path.string());
  REQUIRE(loaded.net->config() == net.config());
  REQUIRE(loaded.vocab.tokens == vocab.tokens);
  REQUIRE(loaded.vocab.scheme == vocab.scheme);
  REQUIRE(loaded.meta.epoch == 4);
  REQUIRE(loaded.meta.seed == 77);
  REQUIRE(loaded.meta.val_error == 12.5);

  const DecodeResult after = beam_decode(*loaded.net, feats, opt);
  REQUIRE(after.tokens == before.tokens);
  REQUIRE(after.score == before.score);  // bitwise
  REQUIRE((after.trace - before.trace).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("loading a non-checkpoint archive is a data error") {
  const auto path = temp_path("kws_not_a_ckpt.kwsar");
  ArrayArchive ar;
  ar.meta()["format"] = "something-else";
  ar.put("x", Matrix::Zero(1, 1));
  ar.save(path.string());
  REQUIRE_THROWS_AS(load_checkpoint(path.string()), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("same seed gives identical first-epoch loss") {
  Rng rng(41);
  std::vector<TrainExample> train_set;
  for (int i = 0; i < 4; ++i) {
    TrainExample ex;
    ex.features = random_features(8, 8, &rng);
    ex.targets = {3 + (i % 2)};
    train_set.push_back(ex);
  }
  TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 2;
  opt.seed = 123;

  double losses[2];
  for (int run = 0; run < 2; ++run) {
    Network net(micro_config(0.5), 55);
    const TrainResult r = train(&net, train_set, opt, {});
    REQUIRE(r.metrics.size() == 1);
    losses[run] = r.metrics[0].train_loss;
  }
  REQUIRE(std::abs(losses[0] - losses[1]) < 5e-7);
  REQUIRE(losses[0] == losses[1]);  // single-threaded: bitwise equal
}

TEST_CASE("zero epochs returns the initialized model untouched") {
  Network net(micro_config(0.5), 13);
  std::vector<Matrix> values;
  for (const Param& p : net.params().all()) values.push_back(p.value);

  std::vector<TrainExample> train_set(1);
  Rng rng(1);
  train_set[0].features = random_features(8, 8, &rng);
  train_set[0].targets = {3};
  TrainOptions opt;
  opt.epochs = 0;
  const TrainResult r = train(&net, train_set, opt, {});
  REQUIRE(r.metrics.empty());
  REQUIRE(r.best_epoch == 0);
  size_t i = 0;
  for (const Param& p : net.params().all()) {
    REQUIRE((p.value - values[i++]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("divergence rolls back and reports instead of crashing") {
  Network net(micro_config(0.5), 19);
  // Poison one weight so the forward pass yields a non-finite loss.
  Param* w = net.params().find("enc.conv1.W");
  REQUIRE(w != nullptr);
  w->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<Matrix> before;
  for (const Param& p : net.params().all()) before.push_back(p.value);

  std::vector<TrainExample> train_set(1);
  Rng rng(1);
  train_set[0].features = random_features(8, 8, &rng);
  train_set[0].targets = {3};
  TrainOptions opt;
  opt.epochs = 3;
  const TrainResult r = train(&net, train_set, opt, {});
  REQUIRE(r.diverged);
  REQUIRE(r.metrics.empty());
  size_t i = 0;
  for (const Param& p : net.params().all()) {
    const Matrix& b = before[i++];
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      for (Eigen::Index rr = 0; rr < b.rows(); ++rr) {
        if (std::isnan(b(rr, c))) {
          REQUIRE(std::isnan(p.value(rr, c)));
        } else {
          REQUIRE(p.value(rr, c) == b(rr, c));
        }
      }
    }
  }
}

TEST_CASE("unalignable utterances are skipped, not fatal") {
  Network net(micro_config(0.5), 29);
  Rng rng(2);
  std::vector<TrainExample> train_set(2);
  train_set[0].features = random_features(8, 8, &rng);
  train_set[0].targets = {3};           // fits in 2 encoder frames
  train_set[1].features = random_features(8, 8, &rng);
  train_set[1].targets = {3, 4, 3, 4};  // cannot align
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 2;
  auto quiet = warning_sink();
  warning_sink() = [](const std::string&) {};
  const TrainResult r = train(&net, train_set, opt, {});
  warning_sink() = quiet;
  REQUIRE(!r.diverged);
  REQUIRE(r.skipped == 2);  // once per epoch
  REQUIRE(r.metrics.size() == 2);
  for (const auto& m : r.metrics) REQUIRE(std::isfinite(m.train_loss));
}

TEST_CASE("training reduces the loss and tracks the best epoch") {
  Rng rng(47);
  std::vector<TrainExample> train_set;
  // Three strongly distinct utterances with distinct short targets.
  for (int i = 0; i < 3; ++i) {
    TrainExample ex;
    ex.features = random_features(8, 8, &rng);
    ex.features.frames.array() += 3.0 * i;
    ex.targets = i == 0 ? std::vector<int>{3}
               : i == 1 ? std::vector<int>{4}
                        : std::vector<int>{3, 4};
    train_set.push_back(ex);
  }
  Network net(micro_config(0.5), 99);
  TrainOptions opt;
  opt.epochs = 60;
  opt.batch_size = 1;
  opt.lr = 5.0;
  opt.seed = 7;
  int calls = 0;
  const TrainResult r = train(&net, train_set, opt,
                              [&](const Network&) {
                                ++calls;
                                return 100.0 - calls;  // keeps improving
                              });
  REQUIRE(r.metrics.size() == 60);
  REQUIRE(calls == 60);
  REQUIRE(r.best_epoch == 60);  // validation kept improving
  REQUIRE(r.best_val_error == 40.0);
  REQUIRE(r.metrics.back().train_loss < 0.7 * r.metrics.front().train_loss);
}

TEST_CASE("metrics csv has the documented header and rows") {
  const auto path = temp_path("kws_metrics_test.csv");
  write_metrics_csv(path.string(),
                    {{1, 2.5, 50.0}, {2, 1.25, 25.0}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "epoch,train_loss,val_error");
  std::getline(in, line);
  REQUIRE(line == "1,2.5,50");
  std::getline(in, line);
  REQUIRE(line == "2,1.25,25");
  REQUIRE(!std::getline(in, line));
  std::filesystem::remove(path);
}

TEST_CASE("beam size one reproduces a stepwise argmax rollout") {
  Rng rng(61);
  const FeatureMatrix feats = random_features(10, 8, &rng);
  Network net(micro_config(0.5), 101);

  DecodeOptions opt;
  opt.beam_size = 1;
  opt.ctc_weight = 0.3;
  const DecodeResult beam = beam_decode(net, feats, opt);

  // Independent greedy rollout with the same joint scoring rule.
  const Matrix enc = net.encode(feats);
  const Matrix enc_proj = net.decoder().project_encoder(enc);
  const CtcPrefixScorer scorer(net.ctc_logits(enc), Network::kBlankId);
  AttentionDecoder::State state = net.decoder().initial_state(enc.cols());
  CtcPrefixScorer::State ctc = scorer.initial();
  std::vector<int> tokens;
  double att_logp = 0.0;
  double final_score = 0.0;
  bool ended = false;
  const int max_steps = static_cast<int>(2 * enc.cols());
  for (int step = 0; step < max_steps && !ended; ++step) {
    const int prev = tokens.empty() ? Network::kSosId : tokens.back();
    Vector alpha;
    const Vector logits =
        net.decoder().step(prev, enc, enc_proj, &state, nullptr, &alpha);
    const Vector lp = kws::detail::log_softmax_vec(logits);
    double best = -std::numeric_limits<double>::infinity();
    int best_c = -1;
    double best_att = 0.0;
    CtcPrefixScorer::State best_state;
    for (int c = 0; c < net.config().vocab_size; ++c) {
      if (c == Network::kBlankId || c == Network::kSosId) continue;
      const double att = att_logp + lp(c);
      double joint;
      CtcPrefixScorer::State next;
      if (c == Network::kEosId) {
        joint = 0.7 * att + 0.3 * scorer.final_logp(ctc);
      } else {
        auto [n, psi] = scorer.extend(ctc, c);
        joint = 0.7 * att + 0.3 * psi;
        next = std::move(n);
      }
      if (joint > best) {
        best = joint;
        best_c = c;
        best_att = att;
        best_state = std::move(next);
      }
    }
    if (best_c == Network::kEosId) {
      ended = true;
      final_score = best;
    } else {
      tokens.push_back(best_c);
      att_logp = best_att;
      ctc = std::move(best_state);
      final_score = best;
    }
  }
  REQUIRE(beam.tokens == tokens);
  REQUIRE(beam.ended_with_eos == ended);
  REQUIRE(beam.score == Catch::Approx(final_score).margin(1e-12));
}

TEST_CASE("a wider beam never scores worse") {
  Rng rng(71);
  const FeatureMatrix feats = random_features(11, 8, &rng);
  Network net(micro_config(0.5), 103);
  DecodeOptions one;
  one.beam_size = 1;
  DecodeOptions five;
  five.beam_size = 5;
  const DecodeResult r1 = beam_decode(net, feats, one);
  const DecodeResult r5 = beam_decode(net, feats, five);
  REQUIRE(r5.score >= r1.score - 1e-12);
}

TEST_CASE("decode works without the ctc score and respects forced endings") {
  Rng rng(83);
  const FeatureMatrix feats = random_features(9, 8, &rng);

  // Pure attention scoring.
  {
    Network net(micro_config(0.0), 107);
    DecodeOptions opt;
    opt.ctc_weight = 0.0;
    const DecodeResult r = beam_decode(net, feats, opt);
    REQUIRE(r.trace.rows() >= 1);
  }

  // End token suppressed under pure attention scoring: must return a
  // partial hypothesis with the flag. (With CTC interpolation an
  // over-long prefix scores -inf, so the end token always wins a slot
  // eventually and the search self-terminates.)
  {
    Network net(micro_config(0.0), 107);
    net.params().find("dec.out.b")->value(Network::kEosId, 0) = -100.0;
    DecodeOptions opt;
    opt.ctc_weight = 0.0;
    // Keep the beam narrower than the candidate set so the suppressed end
    // token is actually pruned (a beam as wide as the vocabulary keeps
    // every ending as a finished hypothesis by construction).
    opt.beam_size = 2;
    const DecodeResult r = beam_decode(net, feats, opt);
    REQUIRE(!r.ended_with_eos);
    const auto T = Encoder::downsampled_length(9);
    REQUIRE(static_cast<Eigen::Index>(r.tokens.size()) == 2 * T);
    REQUIRE(r.trace.rows() == 2 * T);
  }

  // End token boosted: empty transcription, one trace row.
  {
    Network net(micro_config(0.5), 107);
    net.params().find("dec.out.b")->value(Network::kEosId, 0) = 100.0;
    const DecodeResult r = beam_decode(net, feats, DecodeOptions{});
    REQUIRE(r.ended_with_eos);
    REQUIRE(r.tokens.empty());
    REQUIRE(r.trace.rows() == 1);
    REQUIRE(r.trace.row(0).sum() == Catch::Approx(1.0).margin(1e-5));
  }
}
