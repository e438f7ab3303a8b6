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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/channel.hpp"
#include "core/corpus.hpp"
#include "core/metrics.hpp"
#include "core/pixelrl.hpp"
#include "core/rltrain.hpp"
#include "core/seq2seq.hpp"

namespace semrl {

inline constexpr const char* kCodeVersion = "semrl 0.1.0";

// Sectioned key=value text:
//
//   # comment
//   [train]
//   pretrain_epochs = 30
//
// Keys are addressed as "section.key". Unknown sections or keys are errors.
class ConfigText {
 public:
  static ConfigText parse(std::string_view text, std::string_view origin = "<config>");
  static ConfigText load(const std::filesystem::path& path);

  const std::map<std::string, std::string>& values() const { return values_; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value);
  // Line where a key was defined, 0 if unknown or overridden.
  size_t line_of(const std::string& key) const;
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, size_t> lines_;
  std::string origin_;
};

struct SnrGrid {
  std::vector<double> points;
  // "0:20:2" (inclusive range) or "0,5,10".
  static SnrGrid parse(std::string_view spec);
};

struct ImageSettings {
  PixelDims dims;
  PixelTrainConfig train;
  size_t train_images = 256;
  size_t test_images = 64;
  uint64_t image_seed = 1;
  std::string input_dir;  // optional directory of PGM images
  ChannelKind test_channel = ChannelKind::PhaseInvariantFading;
  size_t demo_images = 4;
};

struct ExperimentConfig {
  // corpus
  std::string corpus_path;  // empty: synthetic grammar corpus
  size_t synthetic_sentences = 2000;
  size_t synthetic_min_len = 3;
  size_t synthetic_max_len = 8;
  uint64_t synthetic_seed = 1;
  PreprocessConfig preprocess;

  // model
  ModelDims dims;  // vocab_size comes from the data

  // channel
  ChannelKind channel = ChannelKind::Awgn;
  double snr_db = 10.0;

  TrainSchedule schedule;
  std::vector<SecondStage> variants{SecondStage::Rl};

  // eval
  size_t eval_passes = 3;
  SnrGrid eval_snrs{{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20}};
  std::vector<ChannelKind> eval_channels{ChannelKind::Awgn, ChannelKind::PhaseInvariantFading};
  size_t transcripts = 10;
  uint64_t eval_seed = 2024;

  // run
  std::string output_dir = "runs";
  std::vector<uint64_t> seeds{1};
  bool log_wall_time = false;

  ImageSettings image;

  static ExperimentConfig from_text(const ConfigText& text);
  static ExperimentConfig load(const std::filesystem::path& path,
                               const std::vector<std::string>& overrides = {});
  // Every key with its resolved value, in canonical order.
  ConfigText to_text() const;
  std::string to_string() const;
  // FNV-1a 64 over the canonical corpus/model/channel/train sections.
  uint64_t hash() const;
  uint64_t image_hash() const;
};

std::string format_config(const ConfigText& text);
std::string hash_hex(uint64_t h);
uint64_t fnv1a64(std::string_view data);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace semrl
