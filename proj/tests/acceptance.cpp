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

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [N ...]
//
// Without criterion numbers every criterion runs. Results are also written
// to DIR/acceptance.json.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/harness.hpp"
#include "core/oracle.hpp"
#include "json.hpp"

using namespace semrl;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  ojson data = ojson::object();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path g_work;

// ---------------------------------------------------------------- 1

Outcome metric_oracle() {
  const auto seqs = oracle::all_sequences({4, 5, 6}, 5);
  const IdfTable idf = IdfTable::build(std::span<const std::vector<TokenId>>(seqs));
  const oracle::DocumentFrequency df(seqs);
  std::array<double, 6> worst{};
  size_t pairs = 0;
  for (const auto& c : seqs)
    for (const auto& r : seqs) {
      ++pairs;
      for (int k = 1; k <= 4; ++k)
        worst[k - 1] = std::max(worst[k - 1], std::abs(bleu_n(c, r, k).value - oracle::bleu(c, r, k)));
      worst[4] = std::max(worst[4], std::abs(cider_d(c, r, idf).value - oracle::cider_d(c, r, df)));
      worst[5] = std::max(worst[5], std::abs(word_error_rate(c, r).value - oracle::wer(c, r)));
    }
  const double max_err = *std::max_element(worst.begin(), worst.end());
  const auto goldens = load_goldens(fs::path(SEMRL_TEST_DATA) / "metric_goldens.jsonl");
  const double golden_err = check_goldens(goldens);
  Outcome o;
  o.pass = pairs >= 7000 && max_err <= 1e-12 && goldens.size() == 10 && golden_err <= 1e-12;
  o.detail = fmt("%zu pairs, max abs error %.2g (B1..B4 %.1g %.1g %.1g %.1g, CIDEr-D %.1g, WER %.1g); "
                 "%zu goldens, max abs error %.2g",
                 pairs, max_err, worst[0], worst[1], worst[2], worst[3], worst[4], worst[5],
                 goldens.size(), golden_err);
  o.data = {{"pairs", pairs}, {"max_abs_error", max_err}, {"golden_max_abs_error", golden_err}};
  return o;
}

// ---------------------------------------------------------------- 2, 3

// Fixed random policy with three emittable tokens (EOS, UNK, one word).
struct TinyPolicy {
  Seq2Seq model = Seq2Seq::create({5, 3, 4, 2}, 20240917);
  std::vector<double> received{0.9, -1.3};
  static constexpr size_t kMaxLen = 2;

  // Non-constant reward with a positive mean, so a baseline matters.
  static double reward(const std::vector<TokenId>& actions) {
    const auto words = surface_ids(actions);
    const std::vector<TokenId> ref{4, 3};
    return 1.0 + bleu_n(words, ref, 1).value + 0.5 * static_cast<double>(words.size());
  }
};

// J(theta) by enumeration, for a finite-difference cross-check of grad J.
double objective(Seq2Seq& model, std::span<const double> received,
                 const std::vector<std::vector<TokenId>>& trajectories) {
  Tape tape(false);
  Matrix y(1, static_cast<Eigen::Index>(received.size()));
  for (size_t i = 0; i < received.size(); ++i) y(0, static_cast<Eigen::Index>(i)) = received[i];
  Var rx = tape.constant(y.replicate(static_cast<Eigen::Index>(trajectories.size()), 1));
  const Matrix lp = sequence_logprob(tape, model, rx, trajectories).value();
  double j = 0.0;
  for (size_t k = 0; k < trajectories.size(); ++k)
    j += std::exp(lp(static_cast<Eigen::Index>(k), 0)) * TinyPolicy::reward(trajectories[k]);
  return j;
}

Outcome estimator_unbiased() {
  TinyPolicy pol;
  const size_t m = 3;
  const auto exact =
      exact_policy_gradient(pol.model, pol.received, TinyPolicy::reward, TinyPolicy::kMaxLen);
  const size_t k = exact.trajectories.size();
  const size_t dim = exact.grad_j.size();

  // Route A: production surrogate, backpropagated for every M-tuple and
  // weighted by the tuple probability.
  std::vector<double> via_surrogate(dim, 0.0);
  Matrix y(1, 2);
  y << pol.received[0], pol.received[1];
  std::vector<size_t> tuple(m, 0);
  size_t tuples = 0;
  while (true) {
    double p = 1.0;
    std::vector<std::vector<TokenId>> actions;
    std::vector<double> rewards;
    for (size_t i : tuple) {
      p *= exact.probabilities[i];
      actions.push_back(exact.trajectories[i]);
      rewards.push_back(exact.rewards[i]);
    }
    pol.model.params().zero_grad();
    Tape tape;
    Var rx = tape.constant(y.replicate(static_cast<Eigen::Index>(m), 1));
    Var lp = sequence_logprob(tape, pol.model, rx, actions);
    tape.backward(self_critic_surrogate(lp, make_self_critic_batch(rewards, m)));
    const auto g = pol.model.params().grads();
    // The surrogate is minimized, so its negative gradient estimates grad J.
    for (size_t d = 0; d < dim; ++d) via_surrogate[d] -= p * g[d];
    ++tuples;
    size_t pos = 0;
    while (pos < m && ++tuple[pos] == k) tuple[pos++] = 0;
    if (pos == m) break;
  }
  pol.model.params().zero_grad();

  // Route B: the oracle's closed-form expectation.
  const auto via_oracle = oracle::expected_self_critic_gradient(exact, m);

  double err_a = 0.0, err_b = 0.0, scale = 0.0;
  for (size_t d = 0; d < dim; ++d) {
    err_a = std::max(err_a, std::abs(via_surrogate[d] - exact.grad_j[d]));
    err_b = std::max(err_b, std::abs(via_oracle[d] - exact.grad_j[d]));
    scale = std::max(scale, std::abs(exact.grad_j[d]));
  }

  // The enumerated grad J itself against central differences of J.
  auto& ps = pol.model.params();
  double fd_err = 0.0;
  for (size_t d = 0; d < dim; ++d) {
    const double orig = ps.flat_value(d);
    ps.set_flat_value(d, orig + 1e-5);
    const double up = objective(pol.model, pol.received, exact.trajectories);
    ps.set_flat_value(d, orig - 1e-5);
    const double down = objective(pol.model, pol.received, exact.trajectories);
    ps.set_flat_value(d, orig);
    const double fd = (up - down) / 2e-5;
    fd_err = std::max(fd_err, std::abs(fd - exact.grad_j[d]) / std::max({std::abs(fd), std::abs(exact.grad_j[d]), 1e-6}));
  }

  Outcome o;
  o.pass = err_a < 1e-10 && err_b < 1e-10 && fd_err < 1e-4 && scale > 1e-3;
  o.detail = fmt("%zu trajectories, %zu tuples, %zu coordinates: |E[g_sc] - grad J| <= %.2g (surrogate "
                 "route), %.2g (oracle route); max |grad J| %.3g; grad J vs finite differences %.2g rel",
                 k, tuples, dim, err_a, err_b, scale, fd_err);
  o.data = {{"trajectories", k}, {"tuples", tuples}, {"max_error_surrogate", err_a},
            {"max_error_oracle", err_b}, {"grad_fd_rel_error", fd_err}};
  return o;
}

Outcome variance_reduction() {
  TinyPolicy pol;
  const size_t m = 3;
  const size_t draws = 10000;
  const auto exact =
      exact_policy_gradient(pol.model, pol.received, TinyPolicy::reward, TinyPolicy::kMaxLen);
  const size_t dim = exact.grad_j.size();
  std::vector<size_t> order(dim);
  for (size_t d = 0; d < dim; ++d) order[d] = d;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::abs(exact.grad_j[a]) > std::abs(exact.grad_j[b]);
  });
  order.resize(10);

  Matrix y(1, 2);
  y << pol.received[0], pol.received[1];
  std::vector<double> sum_sc(10, 0.0), sq_sc(10, 0.0), sum_rf(10, 0.0), sq_rf(10, 0.0);
  const Rng root(77);
  auto estimate = [&](bool self_critic, uint64_t draw, std::vector<double>& sum, std::vector<double>& sq) {
    Rng rng = root.fork(draw);
    pol.model.params().zero_grad();
    Tape tape;
    Var rx = tape.constant(y.replicate(static_cast<Eigen::Index>(m), 1));
    auto sb = sample_trajectories(tape, pol.model, rx, rng, TinyPolicy::kMaxLen);
    std::vector<double> rewards;
    for (const auto& s : sb.samples) rewards.push_back(TinyPolicy::reward(s.actions));
    tape.backward(self_critic ? self_critic_surrogate(sb.total_logprob, make_self_critic_batch(rewards, m))
                              : reinforce_surrogate(sb.total_logprob, rewards));
    for (size_t i = 0; i < 10; ++i) {
      const double g = -pol.model.params().flat_grad(order[i]);
      sum[i] += g;
      sq[i] += g * g;
    }
  };
  for (uint64_t d = 0; d < draws; ++d) {
    // Both estimators see the same samples.
    estimate(true, d, sum_sc, sq_sc);
    estimate(false, d, sum_rf, sq_rf);
  }
  pol.model.params().zero_grad();

  Outcome o;
  o.pass = true;
  const double n = static_cast<double>(draws);
  double worst_ratio = 0.0;
  ojson coords = ojson::array();
  for (size_t i = 0; i < 10; ++i) {
    const double var_sc = sq_sc[i] / n - std::pow(sum_sc[i] / n, 2);
    const double var_rf = sq_rf[i] / n - std::pow(sum_rf[i] / n, 2);
    o.pass &= var_sc <= var_rf;
    worst_ratio = std::max(worst_ratio, var_sc / var_rf);
    coords.push_back({{"index", order[i]}, {"grad_j", exact.grad_j[order[i]]}, {"var_self_critic", var_sc},
                      {"var_reinforce", var_rf}, {"mean_self_critic", sum_sc[i] / n},
                      {"mean_reinforce", sum_rf[i] / n}});
  }
  o.detail = fmt("%zu draws of M=%zu samples; variance ratio self-critic/baseline-free on the top-10 "
                 "coordinates at most %.3f",
                 draws, m, worst_ratio);
  o.data = {{"draws", draws}, {"max_variance_ratio", worst_ratio}, {"coordinates", coords}};
  return o;
}

// ---------------------------------------------------------------- 4

Outcome gradient_checks() {
  // Vocab of 12 with 8 words; a 4-sentence batch.
  Seq2Seq model = Seq2Seq::create({12, 8, 10, 6}, 4242);
  Corpus c;
  for (std::vector<TokenId> s : std::vector<std::vector<TokenId>>{{4, 5, 6, 7}, {8, 9, 4}, {10, 11, 5, 5, 6}, {7, 4, 9}}) {
    s.push_back(kEos);
    c.sentences.push_back({s});
  }
  const std::vector<size_t> idx{0, 1, 2, 3};
  const Batch batch = make_batch(c, idx);
  const auto probes = random_probes(model.params(), 150, 99);

  Outcome o;
  o.pass = true;
  ojson runs = ojson::array();
  for (ChannelKind kind : {ChannelKind::Awgn, ChannelKind::PhaseInvariantFading}) {
    std::vector<std::vector<TokenId>> actions;
    {
      Tape t;
      Rng rng(5);
      Var rx = transmit_batch(t, model, batch, kind, 10.0, rng);
      Rng srng(12);
      for (const auto& s : sample_trajectories(t, model, rx, srng, 8).samples) actions.push_back(s.actions);
    }
    // Probes under the round-off floor are re-checked at a coarser step,
    // where the round-off is a hundred times smaller.
    auto recheck = [&](const GradCheckReport& r, const std::function<Var(Tape&)>& fn) {
      std::vector<size_t> small;
      for (const auto& e : r.entries)
        if (std::max(std::abs(e.analytic), std::abs(e.numeric)) < r.floor) small.push_back(e.flat_index);
      if (small.empty()) return GradCheckReport{};
      return finite_difference_check(fn, model.params(), small, 1e-3, 1e-4, 0.0);
    };
    auto ce_fn = [&](Tape& t) {
      Rng rng(5);
      return ce_loss(t, model, transmit_batch(t, model, batch, kind, 10.0, rng), batch);
    };
    auto lp_fn = [&](Tape& t) {
      Rng rng(5);
      Var rx = transmit_batch(t, model, batch, kind, 10.0, rng);
      return ad::sum(sequence_logprob(t, model, rx, actions));
    };
    const auto ce = finite_difference_check(ce_fn, model.params(), probes);
    const auto lp = finite_difference_check(lp_fn, model.params(), probes);
    const auto ce_small = recheck(ce, ce_fn), lp_small = recheck(lp, lp_fn);
    o.pass &= ce.passed && lp.passed && ce_small.passed && lp_small.passed;
    const std::string name = channel_kind_name(kind);
    note(fmt("%s: CE max rel error %.2g (floor %.2g; %zu small gradients re-checked at step 1e-3, max rel %.2g)",
             name.c_str(), ce.max_rel_error, ce.floor, ce_small.entries.size(), ce_small.max_rel_error));
    note(fmt("%s: trajectory log-prob max rel error %.2g (floor %.2g; %zu re-checked, max rel %.2g)",
             name.c_str(), lp.max_rel_error, lp.floor, lp_small.entries.size(), lp_small.max_rel_error));
    runs.push_back({{"channel", name}, {"ce_max_rel_error", ce.max_rel_error}, {"ce_floor", ce.floor},
                    {"logprob_max_rel_error", lp.max_rel_error}, {"logprob_floor", lp.floor},
                    {"small_recheck_max_rel_error", std::max(ce_small.max_rel_error, lp_small.max_rel_error)}});
    o.data[name] = runs.back();
  }
  o.detail = fmt("CE and trajectory log-prob, %zu probes each on AWGN and fading, step 1e-5: max rel error "
                 "%.2g (tolerance 1e-4)",
                 probes.size(), std::max({runs[0]["ce_max_rel_error"].get<double>(), runs[0]["logprob_max_rel_error"].get<double>(),
                                          runs[1]["ce_max_rel_error"].get<double>(), runs[1]["logprob_max_rel_error"].get<double>()}));
  return o;
}

// ---------------------------------------------------------------- 5

Outcome channel_statistics() {
  const size_t blocks = 31250, dim = 32;  // 1e6 symbols
  Outcome o;
  o.pass = true;
  std::string detail;
  for (double snr : {0.0, 10.0, 20.0}) {
    Rng rng(static_cast<uint64_t>(1000 + snr));
    double signal = 0.0, noise = 0.0;
    for (size_t b = 0; b < blocks; ++b) {
      std::vector<double> x(dim);
      for (auto& v : x) v = rng.normal();
      const auto xn = power_normalize(x);
      const auto y = awgn(xn, snr, rng);
      for (size_t i = 0; i < dim; ++i) {
        signal += xn[i] * xn[i];
        noise += (y[i] - xn[i]) * (y[i] - xn[i]);
      }
    }
    const double measured = 10.0 * std::log10(signal / noise);
    o.pass &= std::abs(measured - snr) <= 0.2;
    detail += fmt("%g dB -> %.3f dB; ", snr, measured);
    o.data["awgn_" + format_double(snr)] = measured;
  }
  Rng g(4321);
  double m2 = 0.0;
  const size_t draws = 1000000;
  for (size_t i = 0; i < draws; ++i) {
    const double h = draw_rayleigh_gain(g);
    m2 += h * h;
  }
  m2 /= static_cast<double>(draws);
  o.pass &= std::abs(m2 - 1.0) <= 0.01;
  o.detail = detail + fmt("Rayleigh E[h^2] = %.4f over 1e6 draws", m2);
  o.data["rayleigh_second_moment"] = m2;
  return o;
}

// ---------------------------------------------------------------- 6, 7, 8

struct ToySeed {
  uint64_t seed = 0;
  MetricReport rl, ce, mix, rl_fading, ce_fading;
  DegradationRow rl_row, ce_row;
};

std::vector<ToySeed> g_toy;
double g_toy_seconds = 0.0;

const std::vector<ToySeed>& toy_runs() {
  if (!g_toy.empty()) return g_toy;
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = ExperimentConfig::load(fs::path(SEMRL_CONFIG_DIR) / "toy.cfg");
  cfg.output_dir = (g_work / "toy").string();
  const DataBundle data = load_data(cfg);
  note(fmt("toy corpus: vocab %zu, %zu train / %zu test sentences", data.data.vocab.size(),
           data.data.train.size(), data.data.test.size()));
  for (uint64_t seed : cfg.seeds) {
    ToySeed r;
    r.seed = seed;
    const auto ts = std::chrono::steady_clock::now();
    const TrainSummary run = run_train(cfg, seed);

    // Same pretrained weights, RL stage with the BLEU mixture reward.
    auto pre = load_model({"pretrain", run.pretrain_checkpoint}, cfg, data.data.vocab);
    TrainSchedule mix = cfg.schedule;
    mix.reward = RewardSpec::parse("bleu1:0.5,bleu3:0.5");
    mix.eval_every = 0;
    TrainData td{&data.data.train, &data.data.test, &data.train_idf, &data.test_idf, cfg.channel, cfg.snr_db};
    train_two_stage(mix, pre.model, td, seed, {}, cfg.schedule.pretrain_epochs);

    auto eval = [&](Seq2Seq& m, ChannelKind kind) {
      EvalOptions opts;
      opts.channel = kind;
      opts.snr_db = cfg.snr_db;
      opts.passes = cfg.eval_passes;
      opts.max_len = cfg.schedule.max_len;
      opts.seed = cfg.eval_seed;
      return evaluate_model(m, data.data.test, data.test_idf, opts).report;
    };
    for (const auto& ref : run.finals) {
      auto loaded = load_model(ref, cfg, data.data.vocab);
      const auto awgn = eval(loaded.model, ChannelKind::Awgn);
      const auto fading = eval(loaded.model, ChannelKind::PhaseInvariantFading);
      (ref.label == "rl" ? r.rl : r.ce) = awgn;
      (ref.label == "rl" ? r.rl_fading : r.ce_fading) = fading;
      (ref.label == "rl" ? r.rl_row : r.ce_row) = degradation_row(ref.label, awgn, fading);
    }
    r.mix = eval(pre.model, ChannelKind::Awgn);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
    note(fmt("seed %llu (%.0f s): CE  B1 %.4f B3 %.4f B4 %.4f CIDEr-D %.4f | fading CIDEr-D %.4f",
             static_cast<unsigned long long>(seed), secs, r.ce.bleu[0], r.ce.bleu[2], r.ce.bleu[3],
             r.ce.cider_d, r.ce_fading.cider_d));
    note(fmt("          RL  B1 %.4f B3 %.4f B4 %.4f CIDEr-D %.4f | fading CIDEr-D %.4f", r.rl.bleu[0],
             r.rl.bleu[2], r.rl.bleu[3], r.rl.cider_d, r.rl_fading.cider_d));
    note(fmt("          MIX B1 %.4f B3 %.4f B4 %.4f CIDEr-D %.4f", r.mix.bleu[0], r.mix.bleu[2],
             r.mix.bleu[3], r.mix.cider_d));
    g_toy.push_back(r);
  }
  g_toy_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return g_toy;
}

ojson report_json(const MetricReport& r) {
  return {{"bleu1", r.bleu[0]}, {"bleu2", r.bleu[1]}, {"bleu3", r.bleu[2]}, {"bleu4", r.bleu[3]},
          {"cider_d", r.cider_d}, {"wer", r.wer}};
}

Outcome toy_trend() {
  const auto& runs = toy_runs();
  std::vector<double> rl_c, ce_c, rl_b3, ce_b3, rl_b4, ce_b4;
  ojson seeds = ojson::array();
  for (const auto& r : runs) {
    rl_c.push_back(r.rl.cider_d);
    ce_c.push_back(r.ce.cider_d);
    rl_b3.push_back(r.rl.bleu[2]);
    ce_b3.push_back(r.ce.bleu[2]);
    rl_b4.push_back(r.rl.bleu[3]);
    ce_b4.push_back(r.ce.bleu[3]);
    seeds.push_back({{"seed", r.seed}, {"rl", report_json(r.rl)}, {"ce", report_json(r.ce)}});
  }
  Outcome o;
  const bool cider_ok = median(rl_c) >= median(ce_c);
  const bool b3_ok = median(rl_b3) > median(ce_b3);
  const bool b4_ok = median(rl_b4) > median(ce_b4);
  o.pass = runs.size() == 3 && cider_ok && b3_ok && b4_ok;
  o.detail = fmt("medians over %zu seeds, RL vs continued CE: CIDEr-D %.4f vs %.4f (%s), BLEU-3 %.4f vs "
                 "%.4f (%s), BLEU-4 %.4f vs %.4f (%s); %.0f s for all toy runs",
                 runs.size(), median(rl_c), median(ce_c), cider_ok ? ">=" : "<", median(rl_b3),
                 median(ce_b3), b3_ok ? ">" : "<=", median(rl_b4), median(ce_b4), b4_ok ? ">" : "<=",
                 g_toy_seconds);
  o.data = {{"seeds", seeds}, {"seconds", g_toy_seconds}};
  return o;
}

Outcome reward_steering() {
  const auto& runs = toy_runs();
  std::vector<double> mix_b1, cider_b1;
  ojson seeds = ojson::array();
  for (const auto& r : runs) {
    mix_b1.push_back(r.mix.bleu[0]);
    cider_b1.push_back(r.rl.bleu[0]);
    seeds.push_back({{"seed", r.seed}, {"mixture", report_json(r.mix)}});
  }
  Outcome o;
  o.pass = runs.size() == 3 && median(mix_b1) >= median(cider_b1);
  o.detail = fmt("median BLEU-1: bleu1:0.5,bleu3:0.5 reward %.4f vs CIDEr-D reward %.4f", median(mix_b1),
                 median(cider_b1));
  o.data = {{"seeds", seeds}};
  return o;
}

Outcome fading_trend() {
  const auto& runs = toy_runs();
  std::vector<double> rl_deg, ce_deg;
  ojson seeds = ojson::array();
  for (const auto& r : runs) {
    rl_deg.push_back(r.rl_row.percent[4]);
    ce_deg.push_back(r.ce_row.percent[4]);
    seeds.push_back({{"seed", r.seed}, {"rl_fading", report_json(r.rl_fading)},
                     {"ce_fading", report_json(r.ce_fading)}, {"rl_cider_degradation", r.rl_row.percent[4]},
                     {"ce_cider_degradation", r.ce_row.percent[4]}});
  }
  // Reference rows: AWGN and fading scores of the first metric.
  const double rl_awgn = 0.876, rl_fading = 0.744, ce_awgn = 0.883, ce_fading = 0.748;
  const std::string rl_pct = format_percent(percent_degradation(rl_awgn, rl_fading));
  const std::string ce_pct = format_percent(percent_degradation(ce_awgn, ce_fading));
  MetricReport ra, rf, ca, cf;
  ra.count = rf.count = ca.count = cf.count = 1;
  ra.bleu[0] = rl_awgn;
  rf.bleu[0] = rl_fading;
  ca.bleu[0] = ce_awgn;
  cf.bleu[0] = ce_fading;
  const auto table = format_degradation_table({degradation_row("rl", ra, rf), degradation_row("ce", ca, cf)}, 10.0);
  auto row_has = [&](const std::string& label, const std::string& a, const std::string& b) {
    std::istringstream in(table);
    for (std::string line; std::getline(in, line);)
      if (line.rfind(label, 0) == 0) return line.find(a) != std::string::npos && line.find(b) != std::string::npos;
    return false;
  };
  const bool format_ok = rl_pct == "15.1%" && ce_pct == "15.3%" && row_has("Fading-RL", "0.744", "0.744") &&
                         row_has("Fading-CE", "0.748", "0.748") && row_has("Degradation-RL", "15.1%", "15.1%") &&
                         row_has("Degradation-CE", "15.3%", "15.3%");
  Outcome o;
  const bool trend_ok = median(rl_deg) <= median(ce_deg);
  o.pass = runs.size() == 3 && trend_ok && format_ok;
  o.detail = fmt("median CIDEr-D degradation AWGN->fading at 10 dB: RL %.2f%% vs CE %.2f%% (%s); reference rows "
                 "format as 0.744/%s and 0.748/%s",
                 median(rl_deg), median(ce_deg), trend_ok ? "<=" : ">", rl_pct.c_str(), ce_pct.c_str());
  o.data = {{"seeds", seeds}, {"table", table}};
  return o;
}

// ---------------------------------------------------------------- 9

Outcome pixel_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(31337);
  size_t telescoping_failures = 0;
  for (int e = 0; e < 10000; ++e) {
    ImageGrid target{8, 8, std::vector<int>(64)};
    for (auto& l : target.levels) l = static_cast<int>(rng.index(kPixelLevels));
    const auto ep = run_episode(target, [&](const ImageGrid& c, size_t) {
      std::vector<PixelAction> a(c.size());
      for (auto& v : a) v = static_cast<PixelAction>(rng.index(kPixelActions));
      return a;
    });
    for (size_t i = 0; i < target.size(); ++i) {
      int sum = 0;
      for (const auto& step : ep.reward_hundredths) sum += step[i];
      const int d0 = target.levels[i] - ep.canvases.front().levels[i];
      const int d5 = target.levels[i] - ep.canvases.back().levels[i];
      telescoping_failures += sum != d0 * d0 - d5 * d5;
    }
  }

  // Greedy oracle: every level pattern, random grids and the stroke images.
  std::vector<ImageGrid> targets;
  for (int l = 0; l < kPixelLevels; ++l) targets.push_back({8, 8, std::vector<int>(64, l)});
  for (int e = 0; e < 2000; ++e) {
    ImageGrid t{8, 8, std::vector<int>(64)};
    for (auto& l : t.levels) l = static_cast<int>(rng.index(kPixelLevels));
    targets.push_back(t);
  }
  for (auto& im : synthetic_stroke_images(500, 8, 8, 5)) targets.push_back(im);
  size_t oracle_failures = 0;
  for (const auto& t : targets) {
    const auto ep = run_episode(t, [&](const ImageGrid& c, size_t) { return oracle_greedy_actions(t, c); });
    oracle_failures += ep.final_mse(t) != 0.0;
  }

  ExperimentConfig cfg = ExperimentConfig::load(fs::path(SEMRL_CONFIG_DIR) / "toy.cfg");
  std::vector<double> untrained, trained;
  ojson seeds = ojson::array();
  for (uint64_t seed : cfg.seeds) {
    const auto s = run_image_demo(cfg, seed, g_work / "image" / ("seed-" + std::to_string(seed)));
    untrained.push_back(s.untrained_final_mse);
    trained.push_back(s.trained_final_mse);
    note(fmt("image seed %llu: untrained final MSE %.5f, trained %.5f", static_cast<unsigned long long>(seed),
             s.untrained_final_mse, s.trained_final_mse));
    seeds.push_back({{"seed", seed}, {"untrained", s.untrained_final_mse}, {"trained", s.trained_final_mse}});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = telescoping_failures == 0 && oracle_failures == 0 && median(trained) < median(untrained);
  o.detail = fmt("telescoping exact on 10000 episodes x 64 pixels (%zu failures); greedy oracle MSE 0 on %zu "
                 "targets (%zu failures); median final MSE trained %.5f vs untrained %.5f; %.0f s",
                 telescoping_failures, targets.size(), oracle_failures, median(trained), median(untrained), secs);
  o.data = {{"seeds", seeds}, {"seconds", secs}};
  return o;
}

// ---------------------------------------------------------------- 10

int run_shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc;
}

// Every file under dir, mapped to its bytes.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

Outcome determinism() {
  const std::string cli = SEMRL_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> commands = {
      // Paths are relative to the per-run working directory.
      {"preprocess", "preprocess -c smoke.cfg"},
      {"train", "train -c smoke.cfg --seed 7"},
      {"evaluate", "evaluate -c smoke.cfg -m rl=out/seed-7/rl.ckpt -m ce=out/seed-7/ce.ckpt --channel awgn --snr 10"},
      {"evaluate-fading", "evaluate -c smoke.cfg -m rl=out/seed-7/rl.ckpt -m ce=out/seed-7/ce.ckpt --channel fading "
                          "--snr 10 -o out/eval-fading"},
      {"sweep-snr", "sweep-snr -c smoke.cfg -m rl=out/seed-7/rl.ckpt --snrs 0:20:2"},
      {"degradation", "degradation -c smoke.cfg -m rl=out/seed-7/rl.ckpt -m ce=out/seed-7/ce.ckpt --snr 10"},
      {"degradation-reports", "degradation --awgn-report out/eval/report.json --fading-report "
                              "out/eval-fading/report.json -o out/degradation-reports"},
      {"image-demo", "image-demo -c smoke.cfg --seed 3"},
      {"selftest", "selftest --goldens goldens.jsonl"},
  };
  std::array<fs::path, 2> dirs{g_work / "determinism-a", g_work / "determinism-b"};
  Outcome o;
  o.pass = true;
  std::string failures;
  for (const auto& d : dirs) {
    fs::remove_all(d);
    fs::create_directories(d);
    fs::copy_file(fs::path(SEMRL_CONFIG_DIR) / "smoke.cfg", d / "smoke.cfg");
    fs::copy_file(fs::path(SEMRL_TEST_DATA) / "metric_goldens.jsonl", d / "goldens.jsonl");
  }
  for (const auto& [name, args] : commands) {
    for (const auto& d : dirs) {
      const std::string cmd = "cd '" + d.string() + "' && '" + cli + "' " + args + " > '" + name + ".stdout' 2> '" +
                              name + ".stderr'";
      const int rc = run_shell(cmd);
      if (rc != 0) {
        o.pass = false;
        failures += name + " exited with " + std::to_string(rc) + "; ";
      }
    }
  }
  const auto sa = snapshot(dirs[0]), sb = snapshot(dirs[1]);
  size_t differing = 0;
  for (const auto& [path, bytes] : sa) {
    auto it = sb.find(path);
    if (it == sb.end() || it->second != bytes) {
      ++differing;
      failures += path + " differs; ";
    }
  }
  if (sa.size() != sb.size()) failures += "file sets differ; ";
  o.pass &= differing == 0 && sa.size() == sb.size() && sa.size() > 20;
  o.detail = fmt("%zu subcommand invocations run twice; %zu files compared (logs, reports, checkpoints, "
                 "stdout/stderr); %zu differ",
                 commands.size(), sa.size(), differing) +
             (failures.empty() ? "" : " | " + failures);
  o.data = {{"files", sa.size()}, {"differing", differing}};
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::path(SEMRL_WORK_DIR);
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      wanted.insert(std::atoi(a.c_str()));
    }
  }
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria = {
      {1, "metric oracle", metric_oracle},
      {2, "estimator unbiasedness", estimator_unbiased},
      {3, "variance reduction", variance_reduction},
      {4, "gradient checks", gradient_checks},
      {5, "channel statistics", channel_statistics},
      {6, "toy end-to-end trend", toy_trend},
      {7, "reward-mixture steering", reward_steering},
      {8, "fading robustness trend", fading_trend},
      {9, "pixel-RL invariants", pixel_invariants},
      {10, "determinism", determinism},
  };
  std::vector<std::string> summary;
  ojson results = ojson::array();
  bool all = true;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::printf("criterion %d (%s): running\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all &= o.pass;
    const std::string line = fmt("criterion %2d %-26s %s  ", c.id, c.name, o.pass ? "PASS" : "FAIL") + o.detail +
                             fmt(" [%.1f s]", secs);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary.push_back(line);
    results.push_back({{"criterion", c.id}, {"name", c.name}, {"pass", o.pass}, {"detail", o.detail},
                       {"seconds", secs}, {"data", o.data}});
  }
  std::printf("\n==== acceptance summary ====\n");
  for (const auto& s : summary) std::printf("%s\n", s.c_str());
  std::ofstream(g_work / "acceptance.json") << results.dump(2) << "\n";
  return all ? 0 : 1;
}
