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

#include "core/rltrain.hpp"

#include <chrono>
#include <cmath>

namespace semrl {

double terminal_reward(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                       const RewardSpec& spec, const IdfTable* idf) {
  return mixture_reward(candidate, reference, spec, idf);
}

std::vector<double> sentence_rewards(size_t steps, double terminal) {
  std::vector<double> r(steps, 0.0);
  if (steps > 0) r.back() = terminal;
  return r;
}

std::vector<double> episode_return(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    g[k] = acc;
  }
  return g;
}

std::vector<double> leave_one_out_baseline(std::span<const double> rewards) {
  const size_t m = rewards.size();
  if (m < 2) fail(ErrorCode::Config, "self-critic baseline needs M >= 2 samples, got " + std::to_string(m));
  std::vector<double> b(m);
  for (size_t i = 0; i < m; ++i) {
    double others = 0.0;
    for (size_t k = 0; k < m; ++k)
      if (k != i) others += rewards[k];
    b[i] = others / static_cast<double>(m - 1);
  }
  return b;
}

SelfCriticBatch make_self_critic_batch(std::span<const double> rewards, size_t group_size) {
  if (group_size < 2) fail(ErrorCode::Config, "self-critic needs M >= 2 samples per input");
  if (rewards.size() % group_size != 0)
    fail(ErrorCode::Shape, "reward count is not a multiple of the group size");
  SelfCriticBatch b;
  b.group_size = group_size;
  b.rewards.assign(rewards.begin(), rewards.end());
  b.baselines.resize(rewards.size());
  b.advantages.resize(rewards.size());
  for (size_t g = 0; g < rewards.size(); g += group_size) {
    const auto base = leave_one_out_baseline(rewards.subspan(g, group_size));
    for (size_t i = 0; i < group_size; ++i) {
      b.baselines[g + i] = base[i];
      b.advantages[g + i] = rewards[g + i] - base[i];
    }
  }
  return b;
}

namespace {

void require_live(Var v, const char* who, size_t rows) {
  if (!v.valid() || !v.tape()->recording() || !v.tape()->needs_grad(v.id()))
    fail(ErrorCode::Contract, std::string(who) + ": log-probabilities are detached from the graph");
  if (static_cast<size_t>(v.rows()) != rows || v.cols() != 1)
    fail(ErrorCode::Shape, std::string(who) + ": expected " + std::to_string(rows) +
                               "x1 log-probabilities, got " + shape_string(v.value()));
}

}  // namespace

Var self_critic_surrogate(Var total_logprob, const SelfCriticBatch& batch) {
  require_live(total_logprob, "self_critic_surrogate", batch.rewards.size());
  const double norm = 1.0 / static_cast<double>(batch.rewards.size());
  return ad::scale(ad::sum(ad::row_scale(total_logprob, batch.advantages)), -norm);
}

Var reinforce_surrogate(Var total_logprob, std::span<const double> rewards) {
  require_live(total_logprob, "reinforce_surrogate", rewards.size());
  const double norm = 1.0 / static_cast<double>(rewards.size());
  return ad::scale(ad::sum(ad::row_scale(total_logprob, rewards)), -norm);
}

std::vector<std::vector<TokenId>> enumerate_trajectories(const std::vector<bool>& emit_mask,
                                                         size_t max_len, size_t limit) {
  std::vector<TokenId> words;
  for (size_t t = 0; t < emit_mask.size(); ++t)
    if (emit_mask[t] && static_cast<TokenId>(t) != kEos) words.push_back(static_cast<TokenId>(t));
  if (emit_mask.size() <= static_cast<size_t>(kEos) || !emit_mask[kEos])
    fail(ErrorCode::Contract, "enumerate_trajectories: EOS must be emittable");
  // Count: sum_{k<max_len} w^k (EOS after k words) + w^max_len.
  double count = 0.0, power = 1.0;
  for (size_t k = 0; k < max_len; ++k, power *= static_cast<double>(words.size())) count += power;
  count += power;
  if (count > static_cast<double>(limit))
    fail(ErrorCode::Input, "trajectory space has " + std::to_string(static_cast<long double>(count)) +
                               " sequences, limit is " + std::to_string(limit));
  std::vector<std::vector<TokenId>> out;
  std::vector<std::vector<TokenId>> frontier{{}};
  for (size_t len = 0; len <= max_len; ++len) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& prefix : frontier) {
      if (len == max_len) {
        out.push_back(prefix);
        continue;
      }
      auto ended = prefix;
      ended.push_back(kEos);
      out.push_back(std::move(ended));
      for (TokenId w : words) {
        auto longer = prefix;
        longer.push_back(w);
        next.push_back(std::move(longer));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

ExactPolicyGradient exact_policy_gradient(Seq2Seq& model, std::span<const double> received,
                                          const TrajectoryReward& reward, size_t max_len,
                                          size_t limit) {
  ExactPolicyGradient out;
  out.trajectories = enumerate_trajectories(model.emit_mask(), max_len, limit);
  Matrix latent(1, static_cast<Eigen::Index>(received.size()));
  for (size_t i = 0; i < received.size(); ++i) latent(0, static_cast<Eigen::Index>(i)) = received[i];
  auto& params = model.params();
  out.grad_j.assign(params.flat_size(), 0.0);
  for (const auto& traj : out.trajectories) {
    params.zero_grad();
    Tape tape;
    Var y = tape.constant(latent);
    const std::vector<TokenId> one[] = {traj};
    Var lp = sequence_logprob(tape, model, y, one);
    Var total = ad::sum(lp);
    tape.backward(total);
    const double p = std::exp(total.scalar());
    const double r = reward(traj);
    auto g = params.grads();
    for (size_t k = 0; k < g.size(); ++k) out.grad_j[k] += p * g[k] * r;
    out.objective += p * r;
    out.probabilities.push_back(p);
    out.rewards.push_back(r);
    out.grad_logprob.push_back(std::move(g));
  }
  params.zero_grad();
  return out;
}

double LrSchedule::at(size_t epoch) const {
  double lr = initial;
  for (size_t d : drop_epochs)
    if (epoch >= d) lr *= factor;
  return lr;
}

void TrainSchedule::validate() const {
  if (pretrain_epochs > total_epochs)
    fail(ErrorCode::Config, "pretrain_epochs exceeds total_epochs");
  if (batch_size < 1) fail(ErrorCode::Config, "batch_size must be >= 1");
  if (second_stage == SecondStage::Rl && total_epochs > pretrain_epochs && samples_per_input < 2)
    fail(ErrorCode::Config, "self-critic stage needs samples >= 2");
  if (!(ce_lr.initial > 0.0) || !(rl_lr.initial > 0.0) || !(ce_lr.factor > 0.0) ||
      !(rl_lr.factor > 0.0))
    fail(ErrorCode::Config, "learning rates must be positive");
  if (max_len < 1) fail(ErrorCode::Config, "max_len must be >= 1");
  if (!(clip_norm > 0.0)) fail(ErrorCode::Config, "clip_norm must be positive");
}

double cross_entropy_step(Seq2Seq& model, const Batch& batch, const TrainData& data, Rng& rng) {
  model.params().zero_grad();
  Tape tape;
  Var received = transmit_batch(tape, model, batch, data.channel, data.snr_db, rng);
  Var loss = ce_loss(tape, model, received, batch);
  const double value = loss.scalar();
  if (!std::isfinite(value)) fail(ErrorCode::Divergence, "cross-entropy loss is not finite");
  tape.backward(loss);
  return value;
}

double self_critic_step(Seq2Seq& model, const Batch& batch, const TrainSchedule& schedule,
                        const TrainData& data, Rng& rng) {
  model.params().zero_grad();
  const size_t m = schedule.samples_per_input;
  Tape tape;
  // Transmit once per sentence; all M rollouts decode the same received latent.
  Var received = transmit_batch(tape, model, batch, data.channel, data.snr_db, rng);
  Var repeated = ad::repeat_rows(received, static_cast<Eigen::Index>(m));
  SampledBatch sampled = sample_trajectories(tape, model, repeated, rng, schedule.max_len);
  std::vector<double> rewards(sampled.samples.size());
  for (size_t b = 0; b < batch.rows; ++b) {
    const auto ref = surface_ids(batch.sequence(b).ids);
    for (size_t i = 0; i < m; ++i) {
      auto& s = sampled.samples[b * m + i];
      s.terminal_reward = terminal_reward(s.tokens, ref, schedule.reward, data.idf);
      rewards[b * m + i] = s.terminal_reward;
    }
  }
  const auto sc = make_self_critic_batch(rewards, m);
  Var surrogate = self_critic_surrogate(sampled.total_logprob, sc);
  if (!std::isfinite(surrogate.scalar()))
    fail(ErrorCode::Divergence, "self-critic surrogate is not finite");
  tape.backward(surrogate);
  double mean = 0.0;
  for (double r : rewards) mean += r;
  return mean / static_cast<double>(rewards.size());
}

TrainResult train_two_stage(const TrainSchedule& schedule, Seq2Seq& model, const TrainData& data,
                            uint64_t seed, const TrainCallbacks& callbacks, size_t start_epoch) {
  schedule.validate();
  if (!data.train) fail(ErrorCode::Contract, "train_two_stage: no training corpus");
  if (schedule.reward.needs_idf() && !data.idf)
    fail(ErrorCode::Config, "cider_d reward requires an idf table");
  TrainResult result{{}, Optimizer(schedule.optimizer), {}};
  BatchIterator batches(*data.train, schedule.batch_size, seed);
  const Rng root(seed);
  for (size_t epoch = start_epoch + 1; epoch <= schedule.total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool pretraining = epoch <= schedule.pretrain_epochs;
    const bool rl = !pretraining && schedule.second_stage == SecondStage::Rl;
    if (epoch == schedule.pretrain_epochs + 1)
      result.optimizer = Optimizer(schedule.optimizer);
    const double lr = pretraining ? schedule.ce_lr.at(epoch) : schedule.rl_lr.at(epoch);
    Rng rng = root.fork(0x5EED0000ull + epoch);
    batches.begin_epoch(epoch);
    double sum = 0.0;
    size_t n = 0;
    try {
      while (auto batch = batches.next()) {
        sum += rl ? self_critic_step(model, *batch, schedule, data, rng)
                  : cross_entropy_step(model, *batch, data, rng);
        if (rl) clip_grad_norm(model.params(), schedule.clip_norm);
        result.optimizer.step(model.params(), lr);
        ++n;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Divergence) throw;
      fail(ErrorCode::Divergence,
           std::string(e.what()) + " at epoch " + std::to_string(epoch) + "; last good checkpoint: " +
               (result.last_checkpoint.empty() ? std::string("none") : result.last_checkpoint));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = rl ? "rl" : "ce";
    rec.lr = lr;
    (rl ? rec.mean_reward : rec.mean_ce_loss) = sum / static_cast<double>(std::max<size_t>(n, 1));
    if (schedule.eval_every > 0 && data.eval && data.eval_idf &&
        (epoch % schedule.eval_every == 0 || epoch == schedule.total_epochs)) {
      EvalOptions opts;
      opts.channel = data.channel;
      opts.snr_db = data.snr_db;
      opts.passes = schedule.eval_passes;
      opts.max_len = schedule.max_len;
      opts.seed = root.fork(0xE7A10000ull + epoch).seed();
      rec.eval = evaluate_model(model, *data.eval, *data.eval_idf, opts).report;
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
    const bool cadence = schedule.checkpoint_every > 0 && epoch % schedule.checkpoint_every == 0;
    if (callbacks.checkpoint && (cadence || epoch == schedule.pretrain_epochs ||
                                 epoch == schedule.total_epochs))
      result.last_checkpoint = callbacks.checkpoint(epoch, model, result.optimizer);
  }
  return result;
}

EvalResult evaluate_model(Seq2Seq& model, const Corpus& corpus, const IdfTable& idf,
                          const EvalOptions& options) {
  if (options.passes < 1) fail(ErrorCode::Config, "evaluation needs passes >= 1");
  if (corpus.sentences.empty()) fail(ErrorCode::Input, "evaluation corpus is empty");
  EvalResult out;
  std::vector<std::vector<TokenId>> refs;
  refs.reserve(corpus.size());
  for (const auto& s : corpus.sentences) refs.push_back(surface_ids(s.ids));
  const Rng root(options.seed);
  for (size_t pass = 0; pass < options.passes; ++pass) {
    Rng rng = root.fork(pass);
    std::vector<std::vector<TokenId>> decoded;
    decoded.reserve(corpus.size());
    for (size_t begin = 0; begin < corpus.size(); begin += options.batch_size) {
      const size_t end = std::min(corpus.size(), begin + options.batch_size);
      std::vector<size_t> idx;
      for (size_t i = begin; i < end; ++i) idx.push_back(i);
      const Batch batch = make_batch(corpus, idx);
      Tape tape(false);
      Var received = transmit_batch(tape, model, batch, options.channel, options.snr_db, rng);
      for (auto& d : greedy_decode(tape, model, received, options.max_len))
        decoded.push_back(std::move(d.tokens));
    }
    out.per_pass.push_back(evaluate_pairs(decoded, refs, idf));
    out.decoded.push_back(std::move(decoded));
  }
  MetricReport& avg = out.report;
  avg.count = corpus.size();
  for (const auto& r : out.per_pass) {
    for (int k = 0; k < kMaxNGramOrder; ++k) avg.bleu[k] += r.bleu[k];
    avg.cider_d += r.cider_d;
    avg.wer += r.wer;
    avg.degenerate += r.degenerate;
  }
  const double p = static_cast<double>(options.passes);
  for (auto& b : avg.bleu) b /= p;
  avg.cider_d /= p;
  avg.wer /= p;
  return out;
}

}  // namespace semrl
