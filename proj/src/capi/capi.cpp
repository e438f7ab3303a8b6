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

#include "semrl/semrl.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/harness.hpp"

struct semrl_config {
  semrl::ConfigText text;
  semrl::ExperimentConfig resolved;
};

struct semrl_idf {
  semrl::IdfTable table;
};

namespace {

thread_local std::string g_last_error;

semrl_status to_status(semrl::ErrorCode code) {
  switch (code) {
    case semrl::ErrorCode::Config: return SEMRL_ERR_CONFIG;
    case semrl::ErrorCode::Input: return SEMRL_ERR_INPUT;
    case semrl::ErrorCode::Format: return SEMRL_ERR_FORMAT;
    case semrl::ErrorCode::Corruption: return SEMRL_ERR_CORRUPTION;
    case semrl::ErrorCode::Degenerate: return SEMRL_ERR_DEGENERATE;
    case semrl::ErrorCode::Shape: return SEMRL_ERR_SHAPE;
    case semrl::ErrorCode::Contract: return SEMRL_ERR_CONTRACT;
    case semrl::ErrorCode::Divergence: return SEMRL_ERR_DIVERGENCE;
    case semrl::ErrorCode::Io: return SEMRL_ERR_IO;
    case semrl::ErrorCode::Load: return SEMRL_ERR_LOAD;
    case semrl::ErrorCode::Internal: return SEMRL_ERR_INTERNAL;
  }
  return SEMRL_ERR_INTERNAL;
}

semrl_status set_error(semrl_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

struct NullArgument {
  std::string what;
};

template <class F>
semrl_status guard(F&& body) {
  try {
    body();
    return SEMRL_OK;
  } catch (const NullArgument& e) {
    return set_error(SEMRL_ERR_ARGUMENT, e.what);
  } catch (const semrl::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SEMRL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SEMRL_ERR_INTERNAL, e.what());
  }
}

void require(const void* p, const char* name) {
  if (!p) throw NullArgument{std::string("argument '") + name + "' is NULL"};
}

semrl_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || cap < s.size() + 1)
    return set_error(SEMRL_ERR_BUFFER, "buffer holds " + std::to_string(cap) + " bytes, " +
                                           std::to_string(s.size() + 1) + " needed");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return SEMRL_OK;
}

semrl::LogSink sink(semrl_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

std::vector<semrl::ModelRef> model_refs(const char* const* models, size_t n) {
  if (n > 0) require(models, "models");
  std::vector<semrl::ModelRef> out;
  for (size_t i = 0; i < n; ++i) {
    require(models[i], "models[i]");
    out.push_back(semrl::parse_model_ref(models[i]));
  }
  return out;
}

std::vector<semrl::TokenId> ids(const int32_t* p, size_t n) {
  if (n > 0) require(p, "token ids");
  return std::vector<semrl::TokenId>(p, p + n);
}

}  // namespace

extern "C" {

const char* semrl_version(void) { return semrl::kCodeVersion; }

const char* semrl_last_error(void) { return g_last_error.c_str(); }

const char* semrl_status_name(semrl_status status) {
  switch (status) {
    case SEMRL_OK: return "ok";
    case SEMRL_ERR_CONFIG: return "config";
    case SEMRL_ERR_INPUT: return "input";
    case SEMRL_ERR_FORMAT: return "format";
    case SEMRL_ERR_CORRUPTION: return "corruption";
    case SEMRL_ERR_DEGENERATE: return "degenerate";
    case SEMRL_ERR_SHAPE: return "shape";
    case SEMRL_ERR_CONTRACT: return "contract";
    case SEMRL_ERR_DIVERGENCE: return "divergence";
    case SEMRL_ERR_IO: return "io";
    case SEMRL_ERR_LOAD: return "load";
    case SEMRL_ERR_BUFFER: return "buffer";
    case SEMRL_ERR_ARGUMENT: return "argument";
    case SEMRL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

semrl_status semrl_config_load(const char* path, semrl_config** out) {
  if (!path || !out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_load: NULL argument");
  *out = nullptr;
  return guard([&] {
    auto text = semrl::ConfigText::load(path);
    auto resolved = semrl::ExperimentConfig::from_text(text);
    *out = new semrl_config{std::move(text), std::move(resolved)};
  });
}

semrl_status semrl_config_parse(const char* text, semrl_config** out) {
  if (!text || !out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_parse: NULL argument");
  *out = nullptr;
  return guard([&] {
    auto t = semrl::ConfigText::parse(text);
    auto resolved = semrl::ExperimentConfig::from_text(t);
    *out = new semrl_config{std::move(t), std::move(resolved)};
  });
}

semrl_status semrl_config_set(semrl_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_set: NULL argument");
  return guard([&] {
    semrl::ConfigText t = cfg->text;
    t.set(key, value);
    cfg->resolved = semrl::ExperimentConfig::from_text(t);
    cfg->text = std::move(t);
  });
}

semrl_status semrl_config_hash(const semrl_config* cfg, uint64_t* out) {
  if (!cfg || !out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_hash: NULL argument");
  return guard([&] { *out = cfg->resolved.hash(); });
}

semrl_status semrl_config_dump(const semrl_config* cfg, char* buf, size_t cap, size_t* needed) {
  if (!cfg) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_dump: NULL config");
  std::string text;
  const auto s = guard([&] { text = cfg->resolved.to_string(); });
  return s != SEMRL_OK ? s : copy_out(text, buf, cap, needed);
}

semrl_status semrl_config_get(const semrl_config* cfg, const char* key, char* buf, size_t cap,
                              size_t* needed) {
  if (!cfg || !key) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_get: NULL argument");
  std::string value;
  const auto s = guard([&] {
    auto v = cfg->resolved.to_text().get(key);
    if (!v) semrl::fail(semrl::ErrorCode::Config, std::string("unknown key '") + key + "'");
    value = *v;
  });
  return s != SEMRL_OK ? s : copy_out(value, buf, cap, needed);
}

semrl_status semrl_config_seeds(const semrl_config* cfg, uint64_t* buf, size_t cap, size_t* count) {
  if (!cfg || !count) return set_error(SEMRL_ERR_ARGUMENT, "semrl_config_seeds: NULL argument");
  const auto& seeds = cfg->resolved.seeds;
  *count = seeds.size();
  if (cap < seeds.size() || (!buf && !seeds.empty()))
    return set_error(SEMRL_ERR_BUFFER, "seed buffer too small");
  for (size_t i = 0; i < seeds.size(); ++i) buf[i] = seeds[i];
  return SEMRL_OK;
}

void semrl_config_free(semrl_config* cfg) { delete cfg; }

semrl_status semrl_preprocess(const semrl_config* cfg, const char* out_dir, semrl_log_fn log,
                              void* user) {
  if (!cfg || !out_dir) return set_error(SEMRL_ERR_ARGUMENT, "semrl_preprocess: NULL argument");
  return guard([&] { semrl::run_preprocess(cfg->resolved, out_dir, sink(log, user)); });
}

semrl_status semrl_train(const semrl_config* cfg, uint64_t seed, char* run_dir, size_t cap,
                         semrl_log_fn log, void* user) {
  if (!cfg) return set_error(SEMRL_ERR_ARGUMENT, "semrl_train: NULL config");
  std::string dir;
  const auto s = guard([&] { dir = semrl::run_train(cfg->resolved, seed, sink(log, user)).run_dir.string(); });
  if (s != SEMRL_OK || !run_dir) return s;
  return copy_out(dir, run_dir, cap, nullptr);
}

semrl_status semrl_evaluate(const semrl_config* cfg, const char* const* models, size_t n_models,
                            const char* channel, double snr_db, size_t passes, uint64_t seed,
                            const char* out_dir, semrl_log_fn log, void* user) {
  if (!cfg || !channel || !out_dir) return set_error(SEMRL_ERR_ARGUMENT, "semrl_evaluate: NULL argument");
  return guard([&] {
    semrl::EvalSettings s;
    s.channel = semrl::parse_channel_kind(channel);
    s.snr_db = snr_db;
    s.passes = passes ? passes : cfg->resolved.eval_passes;
    s.seed = seed;
    semrl::run_evaluate(cfg->resolved, model_refs(models, n_models), s, out_dir, sink(log, user));
  });
}

semrl_status semrl_sweep_snr(const semrl_config* cfg, const char* const* models, size_t n_models,
                             const char* snrs, const char* channels, const char* out_dir,
                             semrl_log_fn log, void* user) {
  if (!cfg || !out_dir) return set_error(SEMRL_ERR_ARGUMENT, "semrl_sweep_snr: NULL argument");
  return guard([&] {
    semrl::ExperimentConfig c = cfg->resolved;
    semrl::ConfigText t = cfg->text;
    if (snrs) t.set("eval.snrs", snrs);
    if (channels) t.set("eval.channels", channels);
    c = semrl::ExperimentConfig::from_text(t);
    semrl::run_sweep(c, model_refs(models, n_models), c.eval_snrs, c.eval_channels, out_dir,
                     sink(log, user));
  });
}

semrl_status semrl_degradation(const semrl_config* cfg, const char* const* models, size_t n_models,
                               double snr_db, const char* out_dir, semrl_log_fn log, void* user) {
  if (!cfg || !out_dir) return set_error(SEMRL_ERR_ARGUMENT, "semrl_degradation: NULL argument");
  return guard([&] {
    semrl::run_degradation(cfg->resolved, model_refs(models, n_models), snr_db, out_dir, sink(log, user));
  });
}

semrl_status semrl_degradation_reports(const char* awgn_report, const char* fading_report,
                                       const char* out_dir) {
  if (!awgn_report || !fading_report || !out_dir)
    return set_error(SEMRL_ERR_ARGUMENT, "semrl_degradation_reports: NULL argument");
  return guard([&] { semrl::write_degradation_reports(awgn_report, fading_report, out_dir); });
}

semrl_status semrl_image_demo(const semrl_config* cfg, uint64_t seed, const char* out_dir,
                              semrl_log_fn log, void* user) {
  if (!cfg || !out_dir) return set_error(SEMRL_ERR_ARGUMENT, "semrl_image_demo: NULL argument");
  return guard([&] { semrl::run_image_demo(cfg->resolved, seed, out_dir, sink(log, user)); });
}

semrl_status semrl_selftest(const char* goldens, size_t* failed, semrl_log_fn log, void* user) {
  if (!failed) return set_error(SEMRL_ERR_ARGUMENT, "semrl_selftest: NULL argument");
  return guard([&] {
    const auto checks = semrl::run_selftest(goldens ? goldens : "", sink(log, user));
    *failed = 0;
    for (const auto& c : checks) *failed += !c.passed;
  });
}

semrl_status semrl_bleu(const int32_t* candidate, size_t n_candidate, const int32_t* reference,
                        size_t n_reference, int order, double* out) {
  if (!out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_bleu: NULL output");
  return guard([&] {
    *out = semrl::bleu_n(ids(candidate, n_candidate), ids(reference, n_reference), order).value;
  });
}

semrl_status semrl_wer(const int32_t* candidate, size_t n_candidate, const int32_t* reference,
                       size_t n_reference, double* out) {
  if (!out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_wer: NULL output");
  return guard([&] {
    *out = semrl::word_error_rate(ids(candidate, n_candidate), ids(reference, n_reference)).value;
  });
}

semrl_status semrl_idf_build(const int32_t* const* references, const size_t* lengths, size_t count,
                             semrl_idf** out) {
  if (!out || (count > 0 && (!references || !lengths)))
    return set_error(SEMRL_ERR_ARGUMENT, "semrl_idf_build: NULL argument");
  *out = nullptr;
  return guard([&] {
    std::vector<std::vector<semrl::TokenId>> refs;
    for (size_t i = 0; i < count; ++i) refs.push_back(ids(references[i], lengths[i]));
    *out = new semrl_idf{semrl::IdfTable::build(std::span<const std::vector<semrl::TokenId>>(refs))};
  });
}

semrl_status semrl_cider_d(const semrl_idf* idf, const int32_t* candidate, size_t n_candidate,
                           const int32_t* reference, size_t n_reference, double* out) {
  if (!idf || !out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_cider_d: NULL argument");
  return guard([&] {
    *out = semrl::cider_d(ids(candidate, n_candidate), ids(reference, n_reference), idf->table).value;
  });
}

void semrl_idf_free(semrl_idf* idf) { delete idf; }

semrl_status semrl_power_normalize(const double* x, size_t n, double* y) {
  if ((n > 0 && !x) || !y) return set_error(SEMRL_ERR_ARGUMENT, "semrl_power_normalize: NULL argument");
  return guard([&] {
    const auto out = semrl::power_normalize(std::span<const double>(x, n));
    std::copy(out.begin(), out.end(), y);
  });
}

semrl_status semrl_channel_transmit(const char* kind, double snr_db, uint64_t seed, const double* x,
                                    size_t n, double* y) {
  if (!kind || (n > 0 && (!x || !y)))
    return set_error(SEMRL_ERR_ARGUMENT, "semrl_channel_transmit: NULL argument");
  return guard([&] {
    semrl::ChannelConfig c{semrl::parse_channel_kind(kind), snr_db, seed};
    semrl::Rng rng(seed);
    const auto out = semrl::transmit(std::span<const double>(x, n), c, rng);
    std::copy(out.begin(), out.end(), y);
  });
}

semrl_status semrl_percent_degradation(double awgn, double fading, double* out) {
  if (!out) return set_error(SEMRL_ERR_ARGUMENT, "semrl_percent_degradation: NULL output");
  *out = semrl::percent_degradation(awgn, fading);
  return SEMRL_OK;
}

semrl_status semrl_format_percent(double percent, char* buf, size_t cap, size_t* needed) {
  return copy_out(semrl::format_percent(percent), buf, cap, needed);
}

}  // extern "C"
