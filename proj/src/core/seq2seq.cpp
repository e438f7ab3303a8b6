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

#include "core/seq2seq.hpp"

#include <cmath>
#include <limits>

namespace semrl {
namespace {

struct Shape {
  const char* name;
  size_t rows;
  size_t cols;
};

std::vector<Shape> expected_shapes(const ModelDims& d) {
  const size_t V = d.vocab_size, E = d.embed_dim, H = d.hidden_dim, L = d.latent_dim;
  return {
      {"enc.embed", V, E},       {"enc.fwd.wx", E, 4 * H},  {"enc.fwd.wh", H, 4 * H},
      {"enc.fwd.b", 1, 4 * H},   {"enc.bwd.wx", E, 4 * H},  {"enc.bwd.wh", H, 4 * H},
      {"enc.bwd.b", 1, 4 * H},   {"enc.proj.w", 2 * H, L},  {"enc.proj.b", 1, L},
      {"dec.init_h.w", L, H},    {"dec.init_h.b", 1, H},    {"dec.init_c.w", L, H},
      {"dec.init_c.b", 1, H},    {"dec.embed", V, E},       {"dec.lstm.wx", E, 4 * H},
      {"dec.lstm.wh", H, 4 * H}, {"dec.lstm.b", 1, 4 * H},  {"dec.out.w", H, V},
      {"dec.out.b", 1, V},
  };
}

void validate_dims(const ModelDims& d) {
  if (d.vocab_size <= static_cast<size_t>(kNumSpecials) - 1 || d.embed_dim == 0 ||
      d.hidden_dim == 0 || d.latent_dim == 0)
    fail(ErrorCode::Config, "model dimensions must be positive and vocab must hold the specials");
}

std::vector<bool> make_emit_mask(size_t vocab) {
  std::vector<bool> m(vocab, true);
  m[kPad] = false;
  m[kSos] = false;
  return m;
}

void ids_column(const Batch& b, size_t t, std::vector<int>& ids) {
  ids.resize(b.rows);
  for (size_t r = 0; r < b.rows; ++r) ids[r] = t < b.width ? b.at(r, t) : kPad;
}

size_t encoder_length(const Batch& b, size_t row) {
  size_t n = b.lengths[row];
  if (n > 0 && b.at(row, n - 1) == kEos) --n;
  return n;
}

}  // namespace

Seq2Seq::Seq2Seq(ModelDims dims, ParamStore params)
    : dims_(dims), params_(std::move(params)), emit_mask_(make_emit_mask(dims.vocab_size)) {}

Seq2Seq Seq2Seq::create(const ModelDims& d, uint64_t seed) {
  validate_dims(d);
  Rng rng(seed);
  ParamStore ps;
  const double kh = 1.0 / std::sqrt(static_cast<double>(d.hidden_dim));
  const double kp = 1.0 / std::sqrt(2.0 * static_cast<double>(d.hidden_dim));
  const double kl = 1.0 / std::sqrt(static_cast<double>(d.latent_dim));
  const auto H = static_cast<Eigen::Index>(d.hidden_dim);
  for (const auto& s : expected_shapes(d)) {
    const std::string name = s.name;
    double bound = kh;
    if (name.ends_with("embed")) bound = 0.1;
    else if (name.starts_with("enc.proj")) bound = kp;
    else if (name.starts_with("dec.init")) bound = kl;
    Matrix m = uniform_matrix(static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols),
                              bound, rng);
    // Forget-gate bias starts at 1.
    if (name == "enc.fwd.b" || name == "enc.bwd.b" || name == "dec.lstm.b")
      m.middleCols(H, H).setConstant(1.0);
    ps.add(name, std::move(m));
  }
  return Seq2Seq(d, std::move(ps));
}

Seq2Seq Seq2Seq::from_params(const ModelDims& d, ParamStore params) {
  validate_dims(d);
  const auto shapes = expected_shapes(d);
  if (params.count() != shapes.size())
    fail(ErrorCode::Load, "parameter count " + std::to_string(params.count()) + " != expected " +
                              std::to_string(shapes.size()));
  for (const auto& s : shapes) {
    if (!params.contains(s.name)) fail(ErrorCode::Load, std::string("missing parameter ") + s.name);
    const auto& v = params.get(s.name).value;
    if (static_cast<size_t>(v.rows()) != s.rows || static_cast<size_t>(v.cols()) != s.cols)
      fail(ErrorCode::Load, std::string("parameter ") + s.name + " has shape " + shape_string(v));
  }
  return Seq2Seq(d, std::move(params));
}

std::map<std::string, std::string> Seq2Seq::header() const {
  return {{"model", "seq2seq"},
          {"vocab_size", std::to_string(dims_.vocab_size)},
          {"embed_dim", std::to_string(dims_.embed_dim)},
          {"hidden_dim", std::to_string(dims_.hidden_dim)},
          {"latent_dim", std::to_string(dims_.latent_dim)}};
}

ModelDims Seq2Seq::dims_from_header(const std::map<std::string, std::string>& h) {
  auto get = [&](const char* key) -> size_t {
    auto it = h.find(key);
    if (it == h.end()) fail(ErrorCode::Load, std::string("checkpoint header lacks ") + key);
    try {
      return std::stoul(it->second);
    } catch (const std::exception&) {
      fail(ErrorCode::Load, std::string("checkpoint header ") + key + " is not an integer");
    }
  };
  auto model = h.find("model");
  if (model == h.end() || model->second != "seq2seq")
    fail(ErrorCode::Load, "checkpoint does not hold a seq2seq model");
  return {get("vocab_size"), get("embed_dim"), get("hidden_dim"), get("latent_dim")};
}

LstmState lstm_step(Tape& tape, Var x, const LstmState& s, Parameter& wx, Parameter& wh,
                    Parameter& b) {
  const Eigen::Index H = wh.value.rows();
  Var z = ad::add(ad::add(ad::matmul(x, tape.parameter(wx)), ad::matmul(s.h, tape.parameter(wh))),
                  tape.parameter(b));
  Var i = ad::sigmoid(ad::slice_cols(z, 0, H));
  Var f = ad::sigmoid(ad::slice_cols(z, H, H));
  Var g = ad::tanh(ad::slice_cols(z, 2 * H, H));
  Var o = ad::sigmoid(ad::slice_cols(z, 3 * H, H));
  Var c = ad::add(ad::mul(f, s.c), ad::mul(i, g));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

Var encode_batch(Tape& tape, Seq2Seq& model, const Batch& batch) {
  if (batch.rows == 0) fail(ErrorCode::Contract, "encode: empty batch");
  auto& ps = model.params();
  const auto V = static_cast<TokenId>(model.dims().vocab_size);
  for (TokenId id : batch.ids)
    if (id < 0 || id >= V)
      fail(ErrorCode::Contract, "encode: token id " + std::to_string(id) + " >= V=" +
                                    std::to_string(V));
  const auto rows = static_cast<Eigen::Index>(batch.rows);
  const auto H = static_cast<Eigen::Index>(model.dims().hidden_dim);
  std::vector<size_t> lens(batch.rows);
  size_t width = 0;
  for (size_t r = 0; r < batch.rows; ++r) {
    lens[r] = encoder_length(batch, r);
    if (lens[r] == 0) fail(ErrorCode::Contract, "encode: empty message in batch row " + std::to_string(r));
    width = std::max(width, lens[r]);
  }
  Var embed = tape.parameter(ps.get("enc.embed"));
  Var zero = tape.constant(Matrix::Zero(rows, H));
  std::vector<int> ids;
  std::vector<double> mask(batch.rows);
  auto run = [&](const char* dir, bool reverse) {
    LstmState s{zero, zero};
    auto& wx = ps.get(std::string("enc.") + dir + ".wx");
    auto& wh = ps.get(std::string("enc.") + dir + ".wh");
    auto& b = ps.get(std::string("enc.") + dir + ".b");
    for (size_t k = 0; k < width; ++k) {
      const size_t t = reverse ? width - 1 - k : k;
      ids_column(batch, t, ids);
      for (size_t r = 0; r < batch.rows; ++r) {
        mask[r] = t < lens[r] ? 1.0 : 0.0;
        if (t >= lens[r]) ids[r] = kPad;
      }
      Var x = ad::gather_rows(embed, ids);
      LstmState next = lstm_step(tape, x, s, wx, wh, b);
      s.h = ad::row_blend(mask, next.h, s.h);
      s.c = ad::row_blend(mask, next.c, s.c);
    }
    return s.h;
  };
  Var fwd = run("fwd", false);
  Var bwd = run("bwd", true);
  Var both = ad::concat_cols(fwd, bwd);
  return ad::add(ad::matmul(both, tape.parameter(ps.get("enc.proj.w"))),
                 tape.parameter(ps.get("enc.proj.b")));
}

LatentVector encode(const TokenSequence& msg, Seq2Seq& model) {
  Corpus c;
  c.sentences.push_back(msg);
  const size_t idx = 0;
  const Batch b = make_batch(c, std::span<const size_t>(&idx, 1));
  Tape tape(false);
  const Matrix& v = encode_batch(tape, model, b).value();
  return LatentVector(v.data(), v.data() + v.size());
}

ChannelRealization draw_channel_batch(ChannelKind kind, double snr_db, Eigen::Index rows,
                                      Eigen::Index dim, Rng& rng) {
  ChannelRealization out;
  out.gains.resize(static_cast<size_t>(rows));
  out.noise.resize(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto d = draw_channel(kind, snr_db, static_cast<size_t>(dim), rng);
    out.gains[static_cast<size_t>(r)] = d.gain;
    for (Eigen::Index c = 0; c < dim; ++c) out.noise(r, c) = d.noise[static_cast<size_t>(c)];
  }
  return out;
}

Var apply_channel(Var normalized, const ChannelRealization& realization) {
  Tape& tape = *normalized.tape();
  Var scaled = normalized;
  bool unit = true;
  for (double g : realization.gains) unit &= (g == 1.0);
  if (!unit) scaled = ad::row_scale(normalized, realization.gains);
  return ad::add(scaled, tape.constant(realization.noise));
}

Var transmit_batch(Tape& tape, Seq2Seq& model, const Batch& batch, ChannelKind kind, double snr_db,
                   Rng& rng) {
  Var latent = encode_batch(tape, model, batch);
  Var normalized = ad::power_normalize_rows(latent);
  const auto real = draw_channel_batch(kind, snr_db, normalized.rows(), normalized.cols(), rng);
  return apply_channel(normalized, real);
}

DecoderState init_decoder(Tape& tape, Seq2Seq& model, Var received) {
  auto& ps = model.params();
  if (static_cast<size_t>(received.cols()) != model.dims().latent_dim)
    fail(ErrorCode::Contract, "init_decoder: received latent has " +
                                  std::to_string(received.cols()) + " columns, model expects " +
                                  std::to_string(model.dims().latent_dim));
  DecoderState s;
  s.lstm.h = ad::add(ad::matmul(received, tape.parameter(ps.get("dec.init_h.w"))),
                     tape.parameter(ps.get("dec.init_h.b")));
  s.lstm.c = ad::add(ad::matmul(received, tape.parameter(ps.get("dec.init_c.w"))),
                     tape.parameter(ps.get("dec.init_c.b")));
  s.prev.assign(static_cast<size_t>(received.rows()), kSos);
  s.step = 0;
  return s;
}

StepOutput decode_step(Tape& tape, Seq2Seq& model, const DecoderState& state) {
  auto& ps = model.params();
  std::vector<int> ids(state.prev.begin(), state.prev.end());
  Var x = ad::gather_rows(tape.parameter(ps.get("dec.embed")), ids);
  StepOutput out;
  out.state.lstm = lstm_step(tape, x, state.lstm, ps.get("dec.lstm.wx"), ps.get("dec.lstm.wh"),
                             ps.get("dec.lstm.b"));
  Var logits = ad::add(ad::matmul(out.state.lstm.h, tape.parameter(ps.get("dec.out.w"))),
                       tape.parameter(ps.get("dec.out.b")));
  out.log_probs = ad::log_softmax_rows(logits, &model.emit_mask());
  out.state.prev = state.prev;
  out.state.step = state.step + 1;
  return out;
}

std::vector<double> step_distribution(const Var& log_probs, Eigen::Index row) {
  const Matrix& lp = log_probs.value();
  std::vector<double> p(static_cast<size_t>(lp.cols()));
  for (Eigen::Index c = 0; c < lp.cols(); ++c) p[static_cast<size_t>(c)] = std::exp(lp(row, c));
  return p;
}

namespace {

TokenId argmax_row(const Matrix& lp, Eigen::Index r) {
  Eigen::Index best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < lp.cols(); ++c)
    if (lp(r, c) > best_v) best_v = lp(r, c), best = c;
  return static_cast<TokenId>(best);
}

}  // namespace

std::vector<DecodedSentence> greedy_decode(Tape& tape, Seq2Seq& model, Var received,
                                           size_t max_len) {
  if (max_len < 1) fail(ErrorCode::Config, "max_len must be >= 1");
  const auto rows = static_cast<size_t>(received.rows());
  std::vector<DecodedSentence> out(rows);
  std::vector<bool> done(rows, false);
  size_t remaining = rows;
  DecoderState s = init_decoder(tape, model, received);
  for (size_t t = 0; t < max_len && remaining > 0; ++t) {
    StepOutput step = decode_step(tape, model, s);
    const Matrix& lp = step.log_probs.value();
    for (size_t r = 0; r < rows; ++r) {
      const TokenId tok = argmax_row(lp, static_cast<Eigen::Index>(r));
      step.state.prev[r] = tok;
      if (done[r]) continue;
      if (tok == kEos) {
        done[r] = true;
        out[r].terminated = true;
        --remaining;
      } else {
        out[r].tokens.push_back(tok);
      }
    }
    s = std::move(step.state);
  }
  return out;
}

SampledBatch sample_trajectories(Tape& tape, Seq2Seq& model, Var received, Rng& rng,
                                 size_t max_len, double temperature) {
  if (max_len < 1) fail(ErrorCode::Config, "max_len must be >= 1");
  if (temperature < 0.0) fail(ErrorCode::Config, "temperature must be >= 0");
  const auto rows = static_cast<size_t>(received.rows());
  SampledBatch out;
  out.samples.resize(rows);
  std::vector<bool> done(rows, false);
  size_t remaining = rows;
  std::vector<int> chosen(rows);
  std::vector<double> active(rows);
  std::vector<double> weights(model.dims().vocab_size);
  DecoderState s = init_decoder(tape, model, received);
  Var total;
  for (size_t t = 0; t < max_len && remaining > 0; ++t) {
    StepOutput step = decode_step(tape, model, s);
    const Matrix& lp = step.log_probs.value();
    for (size_t r = 0; r < rows; ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      active[r] = done[r] ? 0.0 : 1.0;
      TokenId tok;
      if (done[r]) {
        tok = kEos;
      } else if (temperature == 0.0) {
        tok = argmax_row(lp, row);
      } else {
        for (Eigen::Index c = 0; c < lp.cols(); ++c)
          weights[static_cast<size_t>(c)] = std::exp(lp(row, c) / temperature);
        tok = static_cast<TokenId>(rng.categorical(weights));
      }
      chosen[r] = tok;
      step.state.prev[r] = tok;
      if (done[r]) continue;
      auto& sample = out.samples[r];
      sample.actions.push_back(tok);
      sample.step_logprobs.push_back(lp(row, tok));
      if (tok == kEos) {
        done[r] = true;
        sample.terminated = true;
        --remaining;
      } else {
        sample.tokens.push_back(tok);
      }
    }
    Var picked = ad::row_scale(ad::pick(step.log_probs, chosen), active);
    out.step_logprobs.push_back(picked);
    total = total.valid() ? ad::add(total, picked) : picked;
    s = std::move(step.state);
  }
  out.total_logprob = total;
  return out;
}

Var sequence_logprob(Tape& tape, Seq2Seq& model, Var received,
                     std::span<const std::vector<TokenId>> actions) {
  const auto rows = static_cast<size_t>(received.rows());
  if (actions.size() != rows)
    fail(ErrorCode::Shape, "sequence_logprob: " + std::to_string(actions.size()) +
                               " sequences for " + std::to_string(rows) + " latents");
  size_t width = 0;
  for (const auto& a : actions) width = std::max(width, a.size());
  DecoderState s = init_decoder(tape, model, received);
  std::vector<int> target(rows);
  std::vector<double> mask(rows);
  Var total;
  for (size_t t = 0; t < width; ++t) {
    StepOutput step = decode_step(tape, model, s);
    for (size_t r = 0; r < rows; ++r) {
      const bool live = t < actions[r].size();
      target[r] = live ? actions[r][t] : kEos;
      mask[r] = live ? 1.0 : 0.0;
      step.state.prev[r] = target[r];
    }
    Var picked = ad::row_scale(ad::pick(step.log_probs, target), mask);
    total = total.valid() ? ad::add(total, picked) : picked;
    s = std::move(step.state);
  }
  if (!total.valid()) total = tape.constant(Matrix::Zero(static_cast<Eigen::Index>(rows), 1));
  return total;
}

Var ce_loss(Tape& tape, Seq2Seq& model, Var received, const Batch& targets) {
  std::vector<std::vector<TokenId>> actions(targets.rows);
  for (size_t r = 0; r < targets.rows; ++r) {
    const size_t n = targets.lengths[r];
    if (n == 0 || targets.at(r, n - 1) != kEos)
      fail(ErrorCode::Contract, "ce_loss: target row " + std::to_string(r) + " does not end with EOS");
    actions[r].assign(targets.ids.begin() + static_cast<std::ptrdiff_t>(r * targets.width),
                      targets.ids.begin() + static_cast<std::ptrdiff_t>(r * targets.width + n));
  }
  Var lp = sequence_logprob(tape, model, received, actions);
  return ad::scale(ad::sum(lp), -1.0 / static_cast<double>(targets.rows));
}

}  // namespace semrl
