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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/channel.hpp"
#include "core/corpus.hpp"
#include "core/rng.hpp"

namespace semrl {

struct ModelDims {
  size_t vocab_size = 0;
  size_t embed_dim = 64;
  size_t hidden_dim = 128;
  size_t latent_dim = 32;

  bool operator==(const ModelDims&) const = default;
};

// Bidirectional recurrent encoder to a fixed-length latent, and a recurrent
// decoder whose state is initialized from the received latent.
class Seq2Seq {
 public:
  static Seq2Seq create(const ModelDims& dims, uint64_t seed);
  // Validates every expected parameter name and shape.
  static Seq2Seq from_params(const ModelDims& dims, ParamStore params);

  const ModelDims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  std::map<std::string, std::string> header() const;
  static ModelDims dims_from_header(const std::map<std::string, std::string>& header);

  // Output mask: PAD and SOS are never emitted.
  const std::vector<bool>& emit_mask() const { return emit_mask_; }

 private:
  Seq2Seq(ModelDims dims, ParamStore params);
  ModelDims dims_;
  ParamStore params_;
  std::vector<bool> emit_mask_;
};

// Gated recurrent cell with input/forget/output gates and a cell state.
struct LstmState {
  Var h;
  Var c;
};
LstmState lstm_step(Tape& tape, Var x, const LstmState& s, Parameter& wx, Parameter& wh,
                    Parameter& b);

// Pre-normalization latents (rows x L). Each row encodes the batch row's
// tokens before its EOS.
Var encode_batch(Tape& tape, Seq2Seq& model, const Batch& batch);
LatentVector encode(const TokenSequence& msg, Seq2Seq& model);

// One channel realization per row (block fading, noise against unit power).
struct ChannelRealization {
  std::vector<double> gains;
  Matrix noise;
};
ChannelRealization draw_channel_batch(ChannelKind kind, double snr_db, Eigen::Index rows,
                                      Eigen::Index dim, Rng& rng);
Var apply_channel(Var normalized, const ChannelRealization& realization);

// encode -> power normalize -> channel.
Var transmit_batch(Tape& tape, Seq2Seq& model, const Batch& batch, ChannelKind kind, double snr_db,
                   Rng& rng);

struct DecoderState {
  LstmState lstm;
  std::vector<TokenId> prev;
  size_t step = 0;
};

DecoderState init_decoder(Tape& tape, Seq2Seq& model, Var received);

// Log-probabilities (rows x V) for the next token, and the advanced state.
// Emitted tokens are supplied afterwards through DecoderState::prev.
struct StepOutput {
  Var log_probs;
  DecoderState state;
};
StepOutput decode_step(Tape& tape, Seq2Seq& model, const DecoderState& state);

// Probabilities of one row of a log-probability matrix.
std::vector<double> step_distribution(const Var& log_probs, Eigen::Index row);

struct DecodedSentence {
  std::vector<TokenId> tokens;  // surface tokens, EOS excluded
  bool terminated = false;      // EOS emitted before max_len
  bool degenerate() const { return tokens.empty(); }
};

std::vector<DecodedSentence> greedy_decode(Tape& tape, Seq2Seq& model, Var received,
                                           size_t max_len);

struct TrajectorySample {
  std::vector<TokenId> tokens;        // surface tokens
  std::vector<TokenId> actions;       // every emitted token incl. a final EOS
  std::vector<double> step_logprobs;  // log pi(a_t | s_t), one per action
  bool terminated = false;
  double terminal_reward = 0.0;
  size_t steps() const { return actions.size(); }
};

struct SampledBatch {
  std::vector<TrajectorySample> samples;
  // Per-step log pi of the chosen token (rows x 1), zero on finished rows.
  std::vector<Var> step_logprobs;
  // Sum over steps, rows x 1, on the differentiation graph.
  Var total_logprob;
};

// temperature == 0 selects the argmax (greedy limit).
SampledBatch sample_trajectories(Tape& tape, Seq2Seq& model, Var received, Rng& rng,
                                 size_t max_len, double temperature = 1.0);

// Teacher-forced log P of given action sequences (rows x 1). Each sequence
// lists the emitted tokens, including the final EOS when present.
Var sequence_logprob(Tape& tape, Seq2Seq& model, Var received,
                     std::span<const std::vector<TokenId>> actions);

// Cross entropy with teacher forcing: -sum log p(target) over non-PAD
// positions, divided by the number of rows. Targets end with EOS.
Var ce_loss(Tape& tape, Seq2Seq& model, Var received, const Batch& targets);

}  // namespace semrl
