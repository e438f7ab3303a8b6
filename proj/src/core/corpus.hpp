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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semrl {

using TokenId = int32_t;
using TokenList = std::vector<std::string>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kNumSpecials = 4;

// PAD, SOS and EOS never count as words; UNK does.
inline bool is_control(TokenId id) { return id == kPad || id == kSos || id == kEos; }

struct SplitRatio {
  size_t train_parts = 4;
  size_t test_parts = 1;
};

struct PreprocessConfig {
  size_t min_len = 3;
  size_t max_len = 20;
  size_t min_count = 5;
  SplitRatio ratio;
  uint64_t seed = 0;
};

// Lowercase, strip Unicode punctuation (categories P*), split on whitespace.
// Throws ErrorCode::Format naming `line_number` on malformed UTF-8.
TokenList normalize_line(std::string_view line, size_t line_number);

// Normalizes every line and keeps those whose token count lies in
// [min_len, max_len].
std::vector<TokenList> preprocess_corpus(std::span<const std::string> raw_lines,
                                         const PreprocessConfig& cfg);

class Vocabulary {
 public:
  static constexpr int kFileVersion = 1;

  // Specials occupy ids 0..3 (PAD, SOS, EOS, UNK); remaining tokens with
  // count >= min_count follow in descending frequency, ties lexicographic.
  static Vocabulary build(std::span<const TokenList> token_lists, size_t min_count);
  static Vocabulary specials_only();

  size_t size() const { return id_to_token_.size(); }
  bool contains(std::string_view token) const;
  // Unknown tokens resolve to kUnk.
  TokenId id(std::string_view token) const;
  // Throws ErrorCode::Corruption for ids outside [0, size()).
  const std::string& token(TokenId id) const;

  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  void insert(std::string token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

const std::string& special_token_text(TokenId id);

// Integer-coded sentence. Targets carry a trailing EOS.
struct TokenSequence {
  std::vector<TokenId> ids;
  size_t length() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

TokenSequence encode(const TokenList& tokens, const Vocabulary& vocab);
// Stops at the first EOS, skips PAD and SOS.
TokenList decode(const TokenSequence& seq, const Vocabulary& vocab);

// Surface tokens only: everything before the first EOS, without PAD/SOS.
std::vector<TokenId> surface_ids(std::span<const TokenId> ids);

enum class SplitTag { Train, Test };

struct Corpus {
  std::vector<TokenSequence> sentences;
  SplitTag split = SplitTag::Train;
  size_t size() const { return sentences.size(); }
};

// Fisher-Yates permutation of [0, n) driven by `rng`.
std::vector<size_t> seeded_permutation(size_t n, Rng& rng);

size_t train_count_for(size_t n, SplitRatio ratio);

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& items,
                                                           SplitRatio ratio, uint64_t seed) {
  if (ratio.train_parts < 1 || ratio.test_parts < 1)
    fail(ErrorCode::Config, "split ratio parts must both be >= 1");
  if (items.size() < ratio.train_parts + ratio.test_parts)
    fail(ErrorCode::Input, "split_train_test: " + std::to_string(items.size()) +
                               " sentences cannot be split into " +
                               std::to_string(ratio.train_parts + ratio.test_parts) + " parts");
  Rng rng(seed);
  const auto order = seeded_permutation(items.size(), rng);
  const size_t n_train = train_count_for(items.size(), ratio);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(n_train);
  out.second.reserve(items.size() - n_train);
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(items[order[i]]);
  return out;
}

Corpus make_corpus(std::span<const TokenList> token_lists, const Vocabulary& vocab, SplitTag tag);

// A padded mini-batch: `rows` sentences, each right-padded with PAD to
// `width` tokens (row-major), plus the true lengths.
struct Batch {
  size_t rows = 0;
  size_t width = 0;
  std::vector<TokenId> ids;
  std::vector<size_t> lengths;
  std::vector<size_t> indices;

  TokenId at(size_t row, size_t col) const { return ids[row * width + col]; }
  TokenSequence sequence(size_t row) const;
};

class BatchIterator {
 public:
  BatchIterator(const Corpus& corpus, size_t batch_size, uint64_t seed);

  // Reshuffles for `epoch`; the order depends only on (seed, epoch).
  void begin_epoch(uint64_t epoch);
  std::optional<Batch> next();
  size_t batches_per_epoch() const;

 private:
  const Corpus& corpus_;
  size_t batch_size_;
  uint64_t seed_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

Batch make_batch(const Corpus& corpus, std::span<const size_t> indices);

struct PreparedData {
  Vocabulary vocab;
  std::vector<TokenList> train_tokens;
  std::vector<TokenList> test_tokens;
  Corpus train;
  Corpus test;
  size_t raw_lines = 0;
  size_t retained = 0;
};

// Preprocess, split, then count frequencies on the training split only.
PreparedData prepare_corpus(std::span<const std::string> raw_lines, const PreprocessConfig& cfg);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace semrl
