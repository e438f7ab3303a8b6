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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semrl/semrl.h"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void print_log(const char* line, void* user) {
  if (!*static_cast<bool*>(user)) std::fprintf(stderr, "%s\n", line);
}

[[noreturn]] void die(semrl_status s) {
  std::fprintf(stderr, "error[%s]: %s\n", semrl_status_name(s), semrl_last_error());
  std::exit(static_cast<int>(s));
}

void check(semrl_status s) {
  if (s != SEMRL_OK) die(s);
}

// Owns a loaded config handle.
class Config {
 public:
  explicit Config(const Common& c) {
    check(semrl_config_load(c.config.c_str(), &cfg_));
    for (const auto& o : c.overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error[config]: --set expects key=value, got '%s'\n", o.c_str());
        std::exit(SEMRL_ERR_CONFIG);
      }
      check(semrl_config_set(cfg_, o.substr(0, eq).c_str(), o.substr(eq + 1).c_str()));
    }
  }
  ~Config() { semrl_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  const semrl_config* get() const { return cfg_; }

  std::string value(const char* key) const {
    size_t needed = 0;
    semrl_config_get(cfg_, key, nullptr, 0, &needed);
    std::string v(needed, '\0');
    check(semrl_config_get(cfg_, key, v.data(), v.size(), nullptr));
    v.pop_back();
    return v;
  }

  std::vector<uint64_t> seeds() const {
    size_t n = 0;
    semrl_config_seeds(cfg_, nullptr, 0, &n);
    std::vector<uint64_t> s(n);
    check(semrl_config_seeds(cfg_, s.data(), s.size(), &n));
    return s;
  }

 private:
  semrl_config* cfg_ = nullptr;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "Override a config key (section.key=value)");
  app->add_flag("-q,--quiet", c.quiet, "Suppress progress logs");
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic text transmission with self-critic reinforcement learning"};
  app.set_version_flag("--version", semrl_version());
  app.require_subcommand(1);

  Common common;
  std::string out;
  std::vector<uint64_t> seeds;
  std::vector<std::string> models;
  std::string channel = "awgn";
  double snr = 10.0;
  size_t passes = 0;
  uint64_t seed = 0;
  std::string snrs, channels, awgn_report, fading_report, goldens;

  auto* pre = app.add_subcommand("preprocess", "Normalize, split and build the vocabulary");
  add_common(pre, common);
  pre->add_option("-o,--out", out, "Output directory (default <output_dir>/data)");

  auto* train = app.add_subcommand("train", "Two-stage training; one run directory per seed");
  add_common(train, common);
  train->add_option("--seed", seeds, "Seeds (default: run.seeds)");

  auto* eval = app.add_subcommand("evaluate", "Greedy decoding over repeated channel passes");
  add_common(eval, common);
  eval->add_option("-m,--model", models, "Checkpoint as label=path")->required();
  eval->add_option("--channel", channel, "awgn or fading");
  eval->add_option("--snr", snr, "SNR in dB");
  eval->add_option("--passes", passes, "Channel passes (default: eval.passes)");
  eval->add_option("--seed", seed, "Channel noise seed (default: eval.seed)");
  eval->add_option("-o,--out", out, "Output directory (default <output_dir>/eval)");

  auto* sweep = app.add_subcommand("sweep-snr", "Metrics over an SNR grid per model and channel");
  add_common(sweep, common);
  sweep->add_option("-m,--model", models, "Checkpoint as label=path")->required();
  sweep->add_option("--snrs", snrs, "start:stop:step or a comma list (default: eval.snrs)");
  sweep->add_option("--channels", channels, "Comma list (default: eval.channels)");
  sweep->add_option("-o,--out", out, "Output directory (default <output_dir>/sweep)");

  auto* deg = app.add_subcommand("degradation", "AWGN to fading degradation table");
  deg->add_option("-c,--config", common.config, "Experiment config file")->check(CLI::ExistingFile);
  deg->add_option("--set", common.overrides, "Override a config key (section.key=value)");
  deg->add_flag("-q,--quiet", common.quiet, "Suppress progress logs");
  deg->add_option("-m,--model", models, "Checkpoint as label=path");
  deg->add_option("--snr", snr, "SNR in dB");
  deg->add_option("--awgn-report", awgn_report, "report.json from evaluate on awgn");
  deg->add_option("--fading-report", fading_report, "report.json from evaluate on fading");
  deg->add_option("-o,--out", out, "Output directory (default <output_dir>/degradation)");

  auto* image = app.add_subcommand("image-demo", "Per-pixel policy image transmission");
  add_common(image, common);
  image->add_option("--seed", seed, "Seed (default: first of run.seeds)");
  image->add_option("-o,--out", out, "Output directory (default <output_dir>/image)");

  auto* self = app.add_subcommand("selftest", "Run the built-in oracle checks");
  self->add_option("--goldens", goldens, "Golden metric file")->check(CLI::ExistingFile);
  self->add_flag("-q,--quiet", common.quiet, "Suppress progress logs");

  CLI11_PARSE(app, argc, argv);
  bool verbose_off = common.quiet;
  void* user = &verbose_off;

  if (*self) {
    size_t failed = 0;
    check(semrl_selftest(goldens.empty() ? nullptr : goldens.c_str(), &failed, print_log, user));
    std::printf("selftest: %s (%zu failing)\n", failed ? "FAIL" : "PASS", failed);
    return failed ? 1 : 0;
  }

  if (*deg && (!awgn_report.empty() || !fading_report.empty())) {
    if (awgn_report.empty() || fading_report.empty()) {
      std::fprintf(stderr, "error[config]: --awgn-report and --fading-report go together\n");
      return SEMRL_ERR_CONFIG;
    }
    if (out.empty()) out = "degradation";
    check(semrl_degradation_reports(awgn_report.c_str(), fading_report.c_str(), out.c_str()));
    std::printf("%s\n", out.c_str());
    return 0;
  }
  if (common.config.empty()) {
    std::fprintf(stderr, "error[config]: --config is required\n");
    return SEMRL_ERR_CONFIG;
  }

  Config cfg(common);
  auto out_or = [&](const char* sub) { return out.empty() ? cfg.value("run.output_dir") + "/" + sub : out; };
  const auto refs = c_strings(models);

  if (*pre) {
    const auto dir = out_or("data");
    check(semrl_preprocess(cfg.get(), dir.c_str(), print_log, user));
    std::printf("%s\n", dir.c_str());
  } else if (*train) {
    if (seeds.empty()) seeds = cfg.seeds();
    for (uint64_t s : seeds) {
      char dir[4096];
      check(semrl_train(cfg.get(), s, dir, sizeof dir, print_log, user));
      std::printf("%s\n", dir);
    }
  } else if (*eval) {
    const auto dir = out_or("eval");
    if (eval->count("--seed") == 0) seed = std::stoull(cfg.value("eval.seed"));
    check(semrl_evaluate(cfg.get(), refs.data(), refs.size(), channel.c_str(), snr, passes, seed,
                         dir.c_str(), print_log, user));
    std::printf("%s\n", dir.c_str());
  } else if (*sweep) {
    const auto dir = out_or("sweep");
    check(semrl_sweep_snr(cfg.get(), refs.data(), refs.size(), snrs.empty() ? nullptr : snrs.c_str(),
                          channels.empty() ? nullptr : channels.c_str(), dir.c_str(), print_log, user));
    std::printf("%s\n", dir.c_str());
  } else if (*deg) {
    if (models.empty()) {
      std::fprintf(stderr, "error[config]: give --model checkpoints or two reports\n");
      return SEMRL_ERR_CONFIG;
    }
    const auto dir = out_or("degradation");
    check(semrl_degradation(cfg.get(), refs.data(), refs.size(), snr, dir.c_str(), print_log, user));
    std::printf("%s\n", dir.c_str());
  } else if (*image) {
    const auto dir = out_or("image");
    if (image->count("--seed") == 0) seed = cfg.seeds().front();
    check(semrl_image_demo(cfg.get(), seed, dir.c_str(), print_log, user));
    std::printf("%s\n", dir.c_str());
  }
  return 0;
}
