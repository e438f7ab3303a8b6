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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/channel.hpp"
#include "core/corpus.hpp"
#include "core/metrics.hpp"
#include "core/optim.hpp"
#include "core/seq2seq.hpp"

namespace semrl {

// Phi(candidate, reference) granted at the final step of an episode.
double terminal_reward(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                       const RewardSpec& spec, const IdfTable* idf);

// Per-step rewards of a sentence episode: zero everywhere except the last.
std::vector<double> sentence_rewards(size_t steps, double terminal);

// G(t) = sum_k gamma^k r(t+k+1) where rewards[k] holds r(k+1).
std::vector<double> episode_return(std::span<const double> rewards, double gamma);

// b_i = (sum_k r_k - r_i) / (M - 1). Throws ErrorCode::Config when M < 2.
std::vector<double> leave_one_out_baseline(std::span<const double> rewards);

// Rewards of `groups` x M samples laid out group-major (rows g*M .. g*M+M-1
// share one received latent), with leave-one-out baselines per group.
struct SelfCriticBatch {
  size_t group_size = 0;
  std::vector<double> rewards;
  std::vector<double> baselines;
  std::vector<double> advantages;

  size_t groups() const { return group_size ? rewards.size() / group_size : 0; }
};

SelfCriticBatch make_self_critic_batch(std::span<const double> rewards, size_t group_size);

// Surrogate whose negative gradient is the self-critic estimate
// (1/M) sum_i A_i sum_t grad log pi, averaged over groups. Advantages are
// constants. `total_logprob` is rows x 1 on a recording tape.
Var self_critic_surrogate(Var total_logprob, const SelfCriticBatch& batch);

// Baseline-free single-rollout estimator: -(1/rows) sum_i r_i log P_i.
Var reinforce_surrogate(Var total_logprob, std::span<const double> rewards);

// Every action sequence a decoder can emit within max_len steps: sequences
// ending in EOS, plus max_len-long sequences without EOS. Throws
// ErrorCode::Input when the space exceeds `limit`.
std::vector<std::vector<TokenId>> enumerate_trajectories(const std::vector<bool>& emit_mask,
                                                         size_t max_len, size_t limit = 10000);

struct ExactPolicyGradient {
  std::vector<std::vector<TokenId>> trajectories;
  std::vector<double> rewards;
  std::vector<double> probabilities;
  std::vector<std::vector<double>> grad_logprob;  // flat parameter gradient per trajectory
  std::vector<double> grad_j;                     // sum_m P(m) grad log P(m) r(m)
  double objective = 0.0;                         // J = sum_m P(m) r(m)
};

using TrajectoryReward = std::function<double(const std::vector<TokenId>& actions)>;

// Exhaustive grad J for the decoder conditioned on a fixed received latent.
ExactPolicyGradient exact_policy_gradient(Seq2Seq& model, std::span<const double> received,
                                          const TrajectoryReward& reward, size_t max_len,
                                          size_t limit = 10000);

struct LrSchedule {
  double initial = 1e-3;
  std::vector<size_t> drop_epochs;
  double factor = 0.5;

  // Rate for a 1-based epoch; each drop applies from its epoch onward.
  double at(size_t epoch) const;
};

enum class SecondStage { Rl, Ce };

struct TrainSchedule {
  size_t pretrain_epochs = 87;
  size_t total_epochs = 200;
  size_t batch_size = 64;
  size_t samples_per_input = 5;
  LrSchedule ce_lr{1e-3, {20}, 0.5};
  LrSchedule rl_lr{1e-4, {160}, 0.5};
  RewardSpec reward = RewardSpec::parse("cider_d:1.0");
  SecondStage second_stage = SecondStage::Rl;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double clip_norm = 5.0;
  size_t max_len = 22;
  size_t checkpoint_every = 0;
  size_t eval_every = 0;
  size_t eval_passes = 1;

  void validate() const;
};

struct TrainData {
  const Corpus* train = nullptr;
  const Corpus* eval = nullptr;
  const IdfTable* idf = nullptr;       // reward statistics (training references)
  const IdfTable* eval_idf = nullptr;  // statistics of the eval references
  ChannelKind channel = ChannelKind::Awgn;
  double snr_db = 10.0;
};

struct EpochRecord {
  size_t epoch = 0;
  std::string stage;  // "ce" or "rl"
  double lr = 0.0;
  double mean_ce_loss = 0.0;
  double mean_reward = 0.0;
  std::optional<MetricReport> eval;
  double wall_time = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Persists a checkpoint and returns its path.
  std::function<std::string(size_t epoch, const Seq2Seq&, const Optimizer&)> checkpoint;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  Optimizer optimizer;
  std::string last_checkpoint;
};

// Stage 1 (epochs 1..E_p): cross entropy through the channel, descending.
// Stage 2 (E_p+1..total): self-critic policy gradient with M samples from one
// received latent per sentence, ascending on J; or more cross entropy when
// second_stage == Ce. Runs epochs start_epoch+1..total_epochs so a run can
// resume from a pretrained model. The optimizer resets at the stage switch.
TrainResult train_two_stage(const TrainSchedule& schedule, Seq2Seq& model, const TrainData& data,
                            uint64_t seed, const TrainCallbacks& callbacks = {},
                            size_t start_epoch = 0);

// One self-critic step on a batch; returns the mean sampled reward. Gradients
// are left in model.params().
double self_critic_step(Seq2Seq& model, const Batch& batch, const TrainSchedule& schedule,
                        const TrainData& data, Rng& rng);

// One teacher-forced cross-entropy step; returns the loss value.
double cross_entropy_step(Seq2Seq& model, const Batch& batch, const TrainData& data, Rng& rng);

struct EvalOptions {
  ChannelKind channel = ChannelKind::Awgn;
  double snr_db = 10.0;
  size_t passes = 1;
  size_t max_len = 22;
  size_t batch_size = 256;
  uint64_t seed = 0;
};

struct EvalResult {
  MetricReport report;                              // averaged over passes
  std::vector<MetricReport> per_pass;
  std::vector<std::vector<std::vector<TokenId>>> decoded;  // [pass][sentence]
};

// Greedy decoding of every sentence once per pass.
EvalResult evaluate_model(Seq2Seq& model, const Corpus& corpus, const IdfTable& idf,
                          const EvalOptions& options);

}  // namespace semrl
