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
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "semrl/semrl.h"

namespace fs = std::filesystem;

namespace {

const char* kTiny = R"([corpus]
synthetic_sentences = 120
min_count = 1
[model]
embed_dim = 6
hidden_dim = 6
latent_dim = 4
[train]
pretrain_epochs = 1
total_epochs = 2
batch_size = 32
samples = 2
max_len = 8
[eval]
passes = 1
transcripts = 0
)";

std::string dump(const semrl_config* cfg) {
  size_t needed = 0;
  REQUIRE(semrl_config_dump(cfg, nullptr, 0, &needed) == SEMRL_ERR_BUFFER);
  std::string s(needed, '\0');
  REQUIRE(semrl_config_dump(cfg, s.data(), s.size(), &needed) == SEMRL_OK);
  s.resize(std::strlen(s.c_str()));
  return s;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(semrl_version()).find("semrl") == 0);
  CHECK(std::string(semrl_status_name(SEMRL_ERR_CONFIG)) == "config");
  CHECK(std::string(semrl_status_name(SEMRL_OK)) == "ok");
}

TEST_CASE("config handles") {
  semrl_config* cfg = nullptr;
  REQUIRE(semrl_config_parse(kTiny, &cfg) == SEMRL_OK);
  CHECK(semrl_config_set(cfg, "train.batch_size", "16") == SEMRL_OK);
  CHECK(semrl_config_set(cfg, "train.nope", "1") == SEMRL_ERR_CONFIG);
  CHECK(std::string(semrl_last_error()).find("nope") != std::string::npos);
  char value[32];
  CHECK(semrl_config_get(cfg, "train.batch_size", value, sizeof value, nullptr) == SEMRL_OK);
  CHECK(std::string(value) == "16");
  uint64_t h1 = 0, h2 = 0;
  CHECK(semrl_config_hash(cfg, &h1) == SEMRL_OK);
  semrl_config* copy = nullptr;
  REQUIRE(semrl_config_parse(dump(cfg).c_str(), &copy) == SEMRL_OK);
  CHECK(semrl_config_hash(copy, &h2) == SEMRL_OK);
  CHECK(h1 == h2);
  uint64_t seeds[4];
  size_t count = 0;
  CHECK(semrl_config_seeds(cfg, seeds, 4, &count) == SEMRL_OK);
  CHECK(count == 1);
  semrl_config_free(copy);
  semrl_config_free(cfg);
  semrl_config_free(nullptr);

  semrl_config* bad = nullptr;
  CHECK(semrl_config_parse("[train]\nbatch_size = x\n", &bad) == SEMRL_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(semrl_config_parse(nullptr, &bad) == SEMRL_ERR_ARGUMENT);
  CHECK(semrl_config_load("/nonexistent.cfg", &bad) != SEMRL_OK);
}

TEST_CASE("metrics through the C API") {
  const int32_t cand[] = {4, 5, 6, 7};
  const int32_t ref[] = {4, 5, 8, 7};
  double v = 0.0;
  CHECK(semrl_bleu(cand, 4, ref, 4, 1, &v) == SEMRL_OK);
  CHECK(v == doctest::Approx(0.75));
  CHECK(semrl_bleu(cand, 4, ref, 4, 9, &v) == SEMRL_ERR_CONTRACT);
  CHECK(semrl_wer(cand, 4, ref, 4, &v) == SEMRL_OK);
  CHECK(v == doctest::Approx(0.25));

  const int32_t* refs[] = {ref, cand};
  const size_t lens[] = {4, 4};
  semrl_idf* idf = nullptr;
  REQUIRE(semrl_idf_build(refs, lens, 2, &idf) == SEMRL_OK);
  CHECK(semrl_cider_d(idf, cand, 4, cand, 4, &v) == SEMRL_OK);
  CHECK(v == doctest::Approx(10.0));
  CHECK(semrl_cider_d(nullptr, cand, 4, cand, 4, &v) == SEMRL_ERR_ARGUMENT);
  semrl_idf_free(idf);
}

TEST_CASE("channel and report helpers") {
  const double x[] = {3, 0, 0, 0};
  double y[4];
  CHECK(semrl_power_normalize(x, 4, y) == SEMRL_OK);
  CHECK(y[0] == doctest::Approx(2.0));
  const double zero[] = {0, 0};
  CHECK(semrl_power_normalize(zero, 2, y) != SEMRL_OK);
  double a[4], b[4];
  CHECK(semrl_channel_transmit("awgn", 10.0, 3, y, 4, a) == SEMRL_OK);
  CHECK(semrl_channel_transmit("awgn", 10.0, 3, y, 4, b) == SEMRL_OK);
  CHECK(std::memcmp(a, b, sizeof a) == 0);
  CHECK(semrl_channel_transmit("rician", 10.0, 3, y, 4, a) == SEMRL_ERR_CONFIG);
  CHECK(semrl_channel_transmit("fading", INFINITY, 3, y, 4, a) == SEMRL_OK);

  double p = 0.0;
  CHECK(semrl_percent_degradation(0.876, 0.744, &p) == SEMRL_OK);
  char buf[16];
  CHECK(semrl_format_percent(p, buf, sizeof buf, nullptr) == SEMRL_OK);
  CHECK(std::string(buf) == "15.1%");
  char tiny[3];
  size_t needed = 0;
  CHECK(semrl_format_percent(p, tiny, sizeof tiny, &needed) == SEMRL_ERR_BUFFER);
  CHECK(needed == 6);
}

namespace {
void count_lines(const char*, void* user) { ++*static_cast<size_t*>(user); }
}  // namespace

TEST_CASE("train and evaluate through the C API") {
  const auto out = fs::temp_directory_path() / "semrl-test-capi";
  fs::remove_all(out);
  semrl_config* cfg = nullptr;
  REQUIRE(semrl_config_parse(kTiny, &cfg) == SEMRL_OK);
  REQUIRE(semrl_config_set(cfg, "run.output_dir", out.c_str()) == SEMRL_OK);
  char run_dir[512];
  size_t lines = 0;
  REQUIRE(semrl_train(cfg, 3, run_dir, sizeof run_dir, count_lines, &lines) == SEMRL_OK);
  CHECK(lines > 0);
  const std::string ckpt = std::string("rl=") + run_dir + "/rl.ckpt";
  const char* models[] = {ckpt.c_str()};
  const auto eval_dir = out / "eval";
  CHECK(semrl_evaluate(cfg, models, 1, "awgn", 10.0, 0, 1, eval_dir.c_str(), nullptr, nullptr) == SEMRL_OK);
  CHECK(fs::exists(eval_dir / "report.json"));
  CHECK(semrl_evaluate(cfg, models, 1, "laser", 10.0, 0, 1, eval_dir.c_str(), nullptr, nullptr) ==
        SEMRL_ERR_CONFIG);
  const char* missing[] = {"/nonexistent/rl.ckpt"};
  CHECK(semrl_evaluate(cfg, missing, 1, "awgn", 10.0, 0, 1, eval_dir.c_str(), nullptr, nullptr) ==
        SEMRL_ERR_LOAD);
  const auto sweep_dir = out / "sweep";
  CHECK(semrl_sweep_snr(cfg, models, 1, "0:20:10", "awgn", sweep_dir.c_str(), nullptr, nullptr) == SEMRL_OK);
  CHECK(fs::exists(sweep_dir / "sweep.csv"));
  semrl_config_free(cfg);
}
