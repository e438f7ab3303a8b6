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

#include "core/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace semrl::oracle {
namespace {

Seq gram_at(const Seq& s, size_t pos, int n) {
  return Seq(s.begin() + static_cast<long>(pos), s.begin() + static_cast<long>(pos) + n);
}

size_t positions(const Seq& s, int n) {
  return s.size() >= static_cast<size_t>(n) ? s.size() - static_cast<size_t>(n) + 1 : 0;
}

size_t occurrences(const Seq& s, const Seq& gram) {
  size_t c = 0;
  const int n = static_cast<int>(gram.size());
  for (size_t p = 0; p < positions(s, n); ++p) {
    bool same = true;
    for (int k = 0; k < n; ++k) same = same && s[p + k] == gram[k];
    c += same;
  }
  return c;
}

// Distinct n-grams of s in first-occurrence order.
std::vector<Seq> distinct(const Seq& s, int n) {
  std::vector<Seq> out;
  for (size_t p = 0; p < positions(s, n); ++p) {
    Seq g = gram_at(s, p, n);
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(std::move(g));
  }
  return out;
}

size_t clipped_matches(const Seq& cand, const Seq& ref, int n) {
  size_t m = 0;
  for (const auto& g : distinct(cand, n)) m += std::min(occurrences(cand, g), occurrences(ref, g));
  return m;
}

}  // namespace

std::vector<Seq> all_sequences(const Seq& alphabet, size_t max_len) {
  std::vector<Seq> out{{}};
  size_t begin = 0;
  for (size_t len = 1; len <= max_len; ++len) {
    const size_t end = out.size();
    for (size_t i = begin; i < end; ++i)
      for (TokenId a : alphabet) {
        Seq s = out[i];
        s.push_back(a);
        out.push_back(std::move(s));
      }
    begin = end;
  }
  return out;
}

double bleu(const Seq& candidate, const Seq& reference, int n, double epsilon) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const int usable = std::min(n, static_cast<int>(candidate.size()));
  double product = 1.0;
  for (int k = 1; k <= usable; ++k) {
    const double p = std::max(static_cast<double>(clipped_matches(candidate, reference, k)), epsilon) /
                     static_cast<double>(positions(candidate, k));
    product *= p;
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::pow(product, 1.0 / usable);
}

double corpus_bleu(const std::vector<Seq>& candidates, const std::vector<Seq>& references, int n) {
  double c = 0.0, r = 0.0;
  std::vector<double> matched(static_cast<size_t>(n), 0.0), total(static_cast<size_t>(n), 0.0);
  for (size_t i = 0; i < candidates.size(); ++i) {
    c += static_cast<double>(candidates[i].size());
    r += static_cast<double>(references[i].size());
    for (int k = 1; k <= n; ++k) {
      matched[k - 1] += static_cast<double>(clipped_matches(candidates[i], references[i], k));
      total[k - 1] += static_cast<double>(positions(candidates[i], k));
    }
  }
  if (c == 0.0) return 0.0;
  double product = 1.0;
  for (int k = 0; k < n; ++k) {
    if (matched[k] == 0.0) return 0.0;
    product *= matched[k] / total[k];
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::pow(product, 1.0 / n);
}

double wer(const Seq& candidate, const Seq& reference) {
  const size_t longer = std::max(candidate.size(), reference.size());
  if (longer == 0) return 0.0;
  size_t same = 0;
  for (size_t i = 0; i < std::min(candidate.size(), reference.size()); ++i)
    same += candidate[i] == reference[i];
  return 1.0 - static_cast<double>(same) / static_cast<double>(longer);
}

size_t DocumentFrequency::count(const Seq& gram) const {
  if (auto it = memo_.find(gram); it != memo_.end()) return it->second;
  size_t c = 0;
  for (const auto& d : docs_) c += occurrences(d, gram) > 0;
  memo_.emplace(gram, c);
  return c;
}

double cider_d(const Seq& candidate, const Seq& reference, const DocumentFrequency& df,
               double sigma) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double log_n = std::log(static_cast<double>(df.documents()));
  const double diff = static_cast<double>(candidate.size()) - static_cast<double>(reference.size());
  double score = 0.0;
  for (int n = 1; n <= 4; ++n) {
    auto weight = [&](const Seq& s, const Seq& g) {
      const double d = static_cast<double>(std::max<size_t>(df.count(g), 1));
      return static_cast<double>(occurrences(s, g)) * (log_n - std::log(d));
    };
    double nc = 0.0, nr = 0.0, dot = 0.0;
    for (const auto& g : distinct(candidate, n)) nc += std::pow(weight(candidate, g), 2);
    for (const auto& g : distinct(reference, n)) {
      const double wr = weight(reference, g);
      nr += wr * wr;
      if (occurrences(candidate, g) > 0) dot += std::min(weight(candidate, g), wr) * wr;
    }
    if (nc > 0.0 && nr > 0.0)
      score += dot / (std::sqrt(nc) * std::sqrt(nr)) * std::exp(-diff * diff / (2 * sigma * sigma));
  }
  return score * 10.0 / 4.0;
}

std::vector<double> expected_self_critic_gradient(const ExactPolicyGradient& exact, size_t m) {
  const size_t k = exact.trajectories.size();
  const size_t dim = exact.grad_j.size();
  std::vector<double> out(dim, 0.0);
  std::vector<size_t> tuple(m, 0);
  std::vector<double> contribution(dim);
  while (true) {
    double p = 1.0, total = 0.0;
    for (size_t i = 0; i < m; ++i) {
      p *= exact.probabilities[tuple[i]];
      total += exact.rewards[tuple[i]];
    }
    std::fill(contribution.begin(), contribution.end(), 0.0);
    for (size_t i = 0; i < m; ++i) {
      const double r = exact.rewards[tuple[i]];
      const double advantage = r - (total - r) / static_cast<double>(m - 1);
      const auto& g = exact.grad_logprob[tuple[i]];
      for (size_t d = 0; d < dim; ++d) contribution[d] += advantage * g[d];
    }
    for (size_t d = 0; d < dim; ++d) out[d] += p * contribution[d] / static_cast<double>(m);
    size_t pos = 0;
    while (pos < m && ++tuple[pos] == k) tuple[pos++] = 0;
    if (pos == m) break;
  }
  return out;
}

}  // namespace semrl::oracle
