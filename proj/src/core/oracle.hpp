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

// Brute-force reference implementations used by the test suites and by
// `selftest`. They share no code with metrics.cpp or rltrain.cpp: n-grams are
// compared element by element and counts come from linear scans.

#include <map>
#include <vector>

#include "core/corpus.hpp"
#include "core/rltrain.hpp"

namespace semrl::oracle {

using Seq = std::vector<TokenId>;

// Every sequence over `alphabet` with length 0..max_len, shortest first.
std::vector<Seq> all_sequences(const Seq& alphabet, size_t max_len);

double bleu(const Seq& candidate, const Seq& reference, int n, double epsilon = 1e-9);
double corpus_bleu(const std::vector<Seq>& candidates, const std::vector<Seq>& references, int n);
double wer(const Seq& candidate, const Seq& reference);

class DocumentFrequency {
 public:
  explicit DocumentFrequency(std::vector<Seq> documents) : docs_(std::move(documents)) {}
  size_t documents() const { return docs_.size(); }
  // Number of documents containing `gram` anywhere.
  size_t count(const Seq& gram) const;

 private:
  std::vector<Seq> docs_;
  mutable std::map<Seq, size_t> memo_;
};

double cider_d(const Seq& candidate, const Seq& reference, const DocumentFrequency& df,
               double sigma = 6.0);

// E over all M-tuples of trajectories (drawn i.i.d. from the enumerated
// policy) of the self-critic estimate (1/M) sum_i A_i grad log P(m_i).
std::vector<double> expected_self_critic_gradient(const ExactPolicyGradient& exact, size_t m);

}  // namespace semrl::oracle
