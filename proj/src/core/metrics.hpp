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

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/corpus.hpp"

namespace semrl {

inline constexpr int kMaxNGramOrder = 4;

// Contiguous n-gram counts of one sentence. Keys pack up to four 16-bit
// token ids.
struct NGramCounts {
  int order = 1;
  std::map<uint64_t, int> counts;

  int total() const;
  int count(uint64_t key) const;
};

uint64_t pack_ngram(std::span<const TokenId> tokens);

// Counts n-grams of the surface tokens (PAD/SOS dropped, truncated at EOS).
NGramCounts count_ngrams(std::span<const TokenId> seq, int n);

// A metric value plus whether the inputs were degenerate (e.g. empty).
struct Score {
  double value = 0.0;
  bool degenerate = false;
};

inline constexpr double kDefaultBleuEpsilon = 1e-9;

// Sentence-level BLEU-n with an epsilon floor on zero match counts.
// Orders above the candidate length are left out of the geometric mean.
Score bleu_n(std::span<const TokenId> candidate, std::span<const TokenId> reference, int n,
             double smoothing_epsilon = kDefaultBleuEpsilon);

// Pooled-count BLEU over a set of pairs, no smoothing.
class CorpusBleu {
 public:
  void add(std::span<const TokenId> candidate, std::span<const TokenId> reference);
  double score(int n) const;

 private:
  std::array<long long, kMaxNGramOrder> matches_{};
  std::array<long long, kMaxNGramOrder> totals_{};
  long long cand_len_ = 0;
  long long ref_len_ = 0;
};

class IdfTable {
 public:
  static IdfTable build(std::span<const std::vector<TokenId>> references);
  static IdfTable build(std::span<const TokenSequence> references);

  // ln(N / df) with df floored at 1 for unseen n-grams.
  double idf(int order, uint64_t key) const;
  size_t document_count() const { return document_count_; }
  double log_document_count() const { return log_n_; }
  size_t document_frequency(int order, uint64_t key) const;

 private:
  size_t document_count_ = 0;
  double log_n_ = 0.0;
  std::array<std::unordered_map<uint64_t, uint32_t>, kMaxNGramOrder> df_;
};

inline constexpr double kCiderSigma = 6.0;

// CIDEr-D against a single reference: per-order cosine of clipped tf-idf
// vectors, Gaussian length penalty, averaged over orders 1..4, times 10.
Score cider_d(std::span<const TokenId> candidate, std::span<const TokenId> reference,
              const IdfTable& idf, double sigma = kCiderSigma);

// 1 - (position-wise matches) / max(|cand|, |ref|).
Score word_error_rate(std::span<const TokenId> candidate, std::span<const TokenId> reference);

enum class Metric { Bleu1, Bleu2, Bleu3, Bleu4, CiderD };

// Accepts "bleu1".."bleu4", "cider_d" and spellings like "BLEU-3", "CIDEr-D".
Metric parse_metric(std::string_view name);
std::string metric_name(Metric m);

// Weighted metric mixture, parsed from "cider_d:1.0" or "bleu1:0.5,bleu3:0.5".
struct RewardSpec {
  std::vector<std::pair<Metric, double>> terms;

  static RewardSpec parse(std::string_view text);
  static RewardSpec from_weights(const std::map<std::string, double>& weights);
  std::string to_string() const;
  bool needs_idf() const;
};

// `idf` may be null when the spec has no CIDEr-D term.
double mixture_reward(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                      const RewardSpec& spec, const IdfTable* idf);

struct MetricReport {
  std::array<double, kMaxNGramOrder> bleu{};
  double cider_d = 0.0;
  double wer = 0.0;
  size_t count = 0;
  size_t degenerate = 0;
};

MetricReport evaluate_pairs(std::span<const std::vector<TokenId>> candidates,
                            std::span<const std::vector<TokenId>> references, const IdfTable& idf);

}  // namespace semrl
