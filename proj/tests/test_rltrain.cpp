/*
 * Copyright 2026 The semrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "doctest.h"

#include <cmath>

#include "core/oracle.hpp"
#include "core/rltrain.hpp"
#include "core/synth.hpp"

using namespace semrl;
using Ids = std::vector<TokenId>;

namespace {

Seq2Seq tiny(size_t vocab, uint64_t seed) { return Seq2Seq::create({vocab, 3, 4, 2}, seed); }

double length_reward(const Ids& a) {
  return 0.5 + static_cast<double>(a.size()) + (a.size() > 1 && a[0] == kUnk ? 1.5 : 0.0);
}

}  // namespace

TEST_CASE("terminal rewards") {
  Ids s{4, 5, 6, 7};
  std::vector<Ids> docs{s, {4, 9}};
  auto idf = IdfTable::build(std::span<const Ids>(docs));
  CHECK(terminal_reward(s, s, RewardSpec::parse("cider_d:1"), &idf) == doctest::Approx(10.0));
  CHECK(terminal_reward(Ids{}, s, RewardSpec::parse("cider_d:1"), &idf) == 0.0);
  auto mix = RewardSpec::parse("bleu1:0.5,bleu3:0.5");
  Ids c{4, 5, 8};
  CHECK(terminal_reward(c, s, mix, nullptr) == mixture_reward(c, s, mix, nullptr));
  CHECK(sentence_rewards(4, 2.5) == std::vector<double>{0, 0, 0, 2.5});
  CHECK(sentence_rewards(0, 2.5).empty());
}

TEST_CASE("returns") {
  std::vector<double> r{0, 0, 5};
  CHECK(episode_return(r, 1.0) == std::vector<double>{5, 5, 5});
  auto g = episode_return(r, 0.5);
  CHECK(g[0] == doctest::Approx(1.25));
  CHECK(g[1] == doctest::Approx(2.5));
  CHECK(g[2] == doctest::Approx(5.0));
  CHECK(episode_return(std::vector<double>(3, 0.0), 0.9) == std::vector<double>(3, 0.0));
}

TEST_CASE("leave-one-out baseline") {
  std::vector<double> r{2, 1, 0, 1, 1};
  auto b = leave_one_out_baseline(r);
  CHECK(b[0] == doctest::Approx(0.75));
  CHECK(r[0] - b[0] == doctest::Approx(1.25));
  auto same = make_self_critic_batch(std::vector<double>(5, 3.0), 5);
  for (double a : same.advantages) CHECK(a == 0.0);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(6);
    for (auto& x : v) x = rng.uniform(-3, 7);
    auto sc = make_self_critic_batch(v, 3);
    CHECK(sc.groups() == 2);
    for (size_t g = 0; g < 2; ++g) {
      double sum = 0.0;
      for (size_t i = 0; i < 3; ++i) sum += sc.advantages[g * 3 + i];
      CHECK(std::abs(sum) < 1e-12);
    }
  }
  CHECK_THROWS_AS(leave_one_out_baseline(std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(make_self_critic_batch(std::vector<double>{1, 2, 3}, 2), Error);
}

TEST_CASE("surrogate gradients on a two-token policy") {
  ParamStore ps;
  Matrix z(1, 2);
  z << 0.3, -0.4;
  auto& logits = ps.add("z", z);
  const double p0 = std::exp(0.3) / (std::exp(0.3) + std::exp(-0.4));
  // Three samples: tokens 0, 1, 0 with rewards 2, 1, 0.
  std::vector<int> chosen{0, 1, 0};
  std::vector<double> rewards{2, 1, 0};
  auto sc = make_self_critic_batch(rewards, 3);
  Tape t;
  std::vector<int> rows{0, 0, 0};
  auto lp = ad::pick(ad::log_softmax_rows(ad::gather_rows(t.parameter(logits), rows)), chosen);
  t.backward(self_critic_surrogate(lp, sc));
  // d log p(a) / dz_0 = [a == 0] - p0, and dz_1 is its negative.
  double want = 0.0;
  for (size_t i = 0; i < 3; ++i) want += sc.advantages[i] * ((chosen[i] == 0 ? 1.0 : 0.0) - p0);
  want *= -1.0 / 3.0;
  CHECK(logits.grad(0, 0) == doctest::Approx(want).epsilon(1e-14));
  CHECK(logits.grad(0, 1) == doctest::Approx(-want).epsilon(1e-14));

  ps.zero_grad();
  auto zero = make_self_critic_batch(std::vector<double>(3, 4.0), 3);
  Tape t2;
  auto lp2 = ad::pick(ad::log_softmax_rows(ad::gather_rows(t2.parameter(logits), rows)), chosen);
  t2.backward(self_critic_surrogate(lp2, zero));
  CHECK(logits.grad.norm() == 0.0);
}

TEST_CASE("surrogates reject detached or misshapen log-probs") {
  auto sc = make_self_critic_batch(std::vector<double>{1, 2}, 2);
  Tape t;
  CHECK_THROWS_AS(self_critic_surrogate(t.constant(Matrix::Zero(2, 1)), sc), Error);
  Tape off(false);
  ParamStore ps;
  auto& w = ps.add("w", Matrix::Zero(2, 1));
  CHECK_THROWS_AS(self_critic_surrogate(off.parameter(w), sc), Error);
  ParamStore qs;
  auto& v = qs.add("v", Matrix::Zero(3, 1));
  CHECK_THROWS_AS(self_critic_surrogate(t.parameter(v), sc), Error);
  CHECK_THROWS_AS(reinforce_surrogate(t.parameter(v), std::vector<double>{1, 2}), Error);
}

TEST_CASE("trajectory enumeration") {
  // Specials plus one word: emittable EOS, UNK, word.
  std::vector<bool> mask{false, false, true, true, true};
  auto all = enumerate_trajectories(mask, 2);
  CHECK(all.size() == 1 + 2 + 4);
  CHECK(all.front() == Ids{kEos});
  CHECK_THROWS_AS(enumerate_trajectories(mask, 20, 1000), Error);
}

TEST_CASE("exact policy gradient") {
  auto m = tiny(5, 31);
  std::vector<double> rx{0.4, -0.9};
  auto ones = exact_policy_gradient(m, rx, [](const Ids&) { return 1.0; }, 2);
  double worst = 0.0;
  for (double g : ones.grad_j) worst = std::max(worst, std::abs(g));
  CHECK(worst < 1e-12);
  CHECK(ones.objective == doctest::Approx(1.0).epsilon(1e-13));

  auto target = Ids{kUnk, kEos};
  auto single = exact_policy_gradient(m, rx, [&](const Ids& a) { return a == target ? 3.0 : 0.0; }, 2);
  size_t k = 0;
  while (single.trajectories[k] != target) ++k;
  for (size_t d = 0; d < single.grad_j.size(); ++d)
    CHECK(single.grad_j[d] ==
          doctest::Approx(single.probabilities[k] * single.grad_logprob[k][d] * 3.0).epsilon(1e-12));
}

TEST_CASE("self-critic expectation equals the exact gradient") {
  auto m = tiny(5, 17);
  auto exact = exact_policy_gradient(m, std::vector<double>{0.8, -1.1}, length_reward, 2);
  auto expected = oracle::expected_self_critic_gradient(exact, 3);
  for (size_t d = 0; d < expected.size(); ++d) CHECK(std::abs(expected[d] - exact.grad_j[d]) < 1e-10);
}

TEST_CASE("learning-rate schedules") {
  TrainSchedule s;
  CHECK(s.pretrain_epochs == 87);
  CHECK(s.total_epochs == 200);
  CHECK(s.batch_size == 64);
  CHECK(s.samples_per_input == 5);
  CHECK(s.ce_lr.at(19) == doctest::Approx(1e-3));
  CHECK(s.ce_lr.at(20) == doctest::Approx(5e-4));
  CHECK(s.rl_lr.at(159) == doctest::Approx(1e-4));
  CHECK(s.rl_lr.at(160) == doctest::Approx(5e-5));
  s.validate();
  s.pretrain_epochs = 300;
  CHECK_THROWS_AS(s.validate(), Error);
  TrainSchedule m1;
  m1.samples_per_input = 1;
  CHECK_THROWS_AS(m1.validate(), Error);
}

namespace {

struct ToyData {
  PreparedData data;
  IdfTable idf;
};

ToyData toy_data(size_t sentences) {
  GrammarConfig g;
  g.sentences = sentences;
  auto lines = generate_grammar_corpus(g);
  PreprocessConfig pc;
  pc.min_count = 1;
  ToyData t{prepare_corpus(lines, pc), {}};
  t.idf = IdfTable::build(std::span<const TokenSequence>(t.data.train.sentences));
  return t;
}

TrainSchedule short_schedule() {
  TrainSchedule s;
  s.pretrain_epochs = 2;
  s.total_epochs = 3;
  s.batch_size = 16;
  s.samples_per_input = 3;
  s.ce_lr = {3e-3, {}, 0.5};
  s.rl_lr = {1e-3, {}, 0.5};
  s.max_len = 10;
  return s;
}

}  // namespace

TEST_CASE("two-stage training is deterministic and logs each epoch") {
  auto toy = toy_data(120);
  TrainData td{&toy.data.train, &toy.data.test, &toy.idf, &toy.idf, ChannelKind::Awgn, 10.0};
  ModelDims dims{toy.data.vocab.size(), 8, 8, 4};
  auto a = Seq2Seq::create(dims, 3), b = Seq2Seq::create(dims, 3);
  auto s = short_schedule();
  s.eval_every = 1;
  auto ra = train_two_stage(s, a, td, 9);
  auto rb = train_two_stage(s, b, td, 9);
  CHECK(a.params().values() == b.params().values());
  REQUIRE(ra.log.size() == 3);
  CHECK(ra.log[0].stage == "ce");
  CHECK(ra.log[2].stage == "rl");
  CHECK(ra.log[2].mean_reward > 0.0);
  CHECK(ra.log[2].eval.has_value());
  CHECK(ra.log[2].eval->cider_d == rb.log[2].eval->cider_d);
  CHECK(ra.optimizer.step_count() == rb.optimizer.step_count());
}

TEST_CASE("zero RL epochs reduce to the cross-entropy path") {
  auto toy = toy_data(80);
  TrainData td{&toy.data.train, nullptr, &toy.idf, nullptr, ChannelKind::Awgn, 10.0};
  ModelDims dims{toy.data.vocab.size(), 6, 6, 4};
  auto s = short_schedule();
  s.pretrain_epochs = s.total_epochs = 2;
  auto rl = Seq2Seq::create(dims, 1), ce = Seq2Seq::create(dims, 1);
  s.second_stage = SecondStage::Rl;
  train_two_stage(s, rl, td, 2);
  s.second_stage = SecondStage::Ce;
  train_two_stage(s, ce, td, 2);
  CHECK(rl.params().values() == ce.params().values());
}

TEST_CASE("resuming from the pretrained model matches a single run") {
  auto toy = toy_data(80);
  TrainData td{&toy.data.train, nullptr, &toy.idf, nullptr, ChannelKind::Awgn, 10.0};
  ModelDims dims{toy.data.vocab.size(), 6, 6, 4};
  auto s = short_schedule();
  auto whole = Seq2Seq::create(dims, 4), split = Seq2Seq::create(dims, 4);
  train_two_stage(s, whole, td, 5);
  auto pre = s;
  pre.total_epochs = pre.pretrain_epochs;
  train_two_stage(pre, split, td, 5);
  train_two_stage(s, split, td, 5, {}, s.pretrain_epochs);
  CHECK(whole.params().values() == split.params().values());
}

TEST_CASE("divergence names the last checkpoint") {
  auto toy = toy_data(60);
  TrainData td{&toy.data.train, nullptr, &toy.idf, nullptr, ChannelKind::Awgn, 10.0};
  auto m = Seq2Seq::create({toy.data.vocab.size(), 6, 6, 4}, 1);
  auto s = short_schedule();
  s.pretrain_epochs = s.total_epochs = 2;
  TrainCallbacks cb;
  cb.checkpoint = [](size_t epoch, const Seq2Seq&, const Optimizer&) { return "ckpt-" + std::to_string(epoch); };
  cb.on_epoch = [&](const EpochRecord& r) {
    if (r.epoch == 1) m.params().get("dec.out.w").value(0, 0) = std::nan("");
  };
  s.checkpoint_every = 1;
  try {
    train_two_stage(s, m, td, 1, cb);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Divergence);
    CHECK(std::string(e.what()).find("ckpt-1") != std::string::npos);
  }
}

TEST_CASE("noiseless overfit of ten sentences reaches BLEU-1 of 1") {
  auto toy = toy_data(400);
  Corpus ten;
  ten.sentences.assign(toy.data.train.sentences.begin(), toy.data.train.sentences.begin() + 10);
  auto idf = IdfTable::build(std::span<const TokenSequence>(ten.sentences));
  TrainData td{&ten, nullptr, &idf, nullptr, ChannelKind::Awgn, kNoiselessSnr};
  auto m = Seq2Seq::create({toy.data.vocab.size(), 16, 32, 16}, 2);
  TrainSchedule s;
  s.pretrain_epochs = s.total_epochs = 300;
  s.batch_size = 10;
  s.ce_lr = {1e-2, {200}, 0.3};
  s.max_len = 12;
  train_two_stage(s, m, td, 3);
  EvalOptions opts;
  opts.snr_db = kNoiselessSnr;
  opts.max_len = 12;
  auto r = evaluate_model(m, ten, idf, opts);
  CHECK(r.report.bleu[0] == doctest::Approx(1.0));
  CHECK(r.report.wer == 0.0);
}

TEST_CASE("evaluation passes draw independent noise") {
  auto toy = toy_data(100);
  auto m = Seq2Seq::create({toy.data.vocab.size(), 6, 6, 4}, 1);
  EvalOptions opts;
  opts.passes = 3;
  opts.snr_db = 0.0;
  opts.max_len = 10;
  opts.seed = 5;
  auto r = evaluate_model(m, toy.data.test, toy.idf, opts);
  CHECK(r.per_pass.size() == 3);
  CHECK(r.decoded.size() == 3);
  auto again = evaluate_model(m, toy.data.test, toy.idf, opts);
  CHECK(again.report.cider_d == r.report.cider_d);
  double mean = 0.0;
  for (const auto& p : r.per_pass) mean += p.cider_d / 3.0;
  CHECK(r.report.cider_d == doctest::Approx(mean));
}
