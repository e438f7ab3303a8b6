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

#include <filesystem>
#include <functional>
#include <fstream>

#include "core/config.hpp"

using namespace semrl;

namespace {

const char* kToy = R"(# toy run
[corpus]
synthetic_sentences = 200
min_count = 1

[model]
embed_dim = 8
hidden_dim = 8
latent_dim = 4

[train]
pretrain_epochs = 2
total_epochs = 3
reward = cider_d:1.0
variants = rl,ce
)";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("parsing and defaults") {
  auto cfg = ExperimentConfig::from_text(ConfigText::parse(kToy));
  CHECK(cfg.synthetic_sentences == 200);
  CHECK(cfg.dims.latent_dim == 4);
  CHECK(cfg.schedule.pretrain_epochs == 2);
  CHECK(cfg.variants == std::vector<SecondStage>{SecondStage::Rl, SecondStage::Ce});
  // Untouched keys keep the full-scale defaults.
  CHECK(cfg.schedule.batch_size == 64);
  CHECK(cfg.schedule.samples_per_input == 5);
  CHECK(cfg.preprocess.max_len == 20);
  CHECK(cfg.eval_passes == 3);
  CHECK(cfg.eval_snrs.points.size() == 11);
}

TEST_CASE("errors name the origin and line") {
  try {
    (void)ConfigText::parse("[train]\nbatch_size = 4\nbogus = 1\n", "x.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("x.cfg:3") != std::string::npos);
  }
  CHECK(code_of([] { (void)ConfigText::parse("[nosuch]\n"); }) == ErrorCode::Config);
  CHECK(code_of([] { (void)ConfigText::parse("[train]\nbatch_size = 1\nbatch_size = 2\n"); }) ==
        ErrorCode::Config);
  CHECK(code_of([] { (void)ConfigText::parse("no_section = 1\n"); }) == ErrorCode::Config);
  CHECK(code_of([] {
          (void)ExperimentConfig::from_text(ConfigText::parse("[train]\nbatch_size = many\n"));
        }) == ErrorCode::Config);
  CHECK(code_of([] {
          (void)ExperimentConfig::from_text(ConfigText::parse("[train]\npretrain_epochs = 300\n"));
        }) == ErrorCode::Config);
  CHECK(code_of([] { (void)ConfigText::load("/nonexistent/semrl.cfg"); }) != ErrorCode::Internal);
}

TEST_CASE("overrides and round trip") {
  auto dir = std::filesystem::temp_directory_path() / "semrl-test-config";
  std::filesystem::create_directories(dir);
  const auto path = dir / "toy.cfg";
  std::ofstream(path) << kToy;
  auto cfg = ExperimentConfig::load(path, {"train.batch_size=16", "channel.kind=fading"});
  CHECK(cfg.schedule.batch_size == 16);
  CHECK(cfg.channel == ChannelKind::PhaseInvariantFading);
  CHECK_THROWS_AS(ExperimentConfig::load(path, {"train.nope=1"}), Error);
  CHECK_THROWS_AS(ExperimentConfig::load(path, {"missing_equals"}), Error);

  auto text = cfg.to_string();
  auto back = ExperimentConfig::from_text(ConfigText::parse(text));
  CHECK(back.to_string() == text);
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("hash covers training inputs only") {
  auto base = ExperimentConfig::from_text(ConfigText::parse(kToy));
  auto text = ConfigText::parse(kToy);
  text.set("eval.passes", "7");
  text.set("run.output_dir", "elsewhere");
  CHECK(ExperimentConfig::from_text(text).hash() == base.hash());
  text.set("train.samples", "3");
  CHECK(ExperimentConfig::from_text(text).hash() != base.hash());
  CHECK(hash_hex(0xabcull) == "0000000000000abc");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("SNR grids") {
  auto g = SnrGrid::parse("0:20:2");
  CHECK(g.points.size() == 11);
  CHECK(g.points.front() == 0.0);
  CHECK(g.points.back() == 20.0);
  CHECK(SnrGrid::parse("10,0,5,5").points == std::vector<double>{0, 5, 10});
  CHECK(SnrGrid::parse("-4:4:4").points == std::vector<double>{-4, 0, 4});
  CHECK_THROWS_AS(SnrGrid::parse("0:20:0"), Error);
  CHECK_THROWS_AS(SnrGrid::parse("x"), Error);
  CHECK_THROWS_AS(SnrGrid::parse(""), Error);
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-3) == "0.001");
  CHECK(format_double(20.0) == "20");
  CHECK(format_double(kNoiselessSnr) == "inf");
}
