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

#include "core/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace semrl {
namespace {

void check_order(int n) {
  if (n < 1 || n > kMaxNGramOrder)
    fail(ErrorCode::Contract, "n-gram order " + std::to_string(n) + " outside 1..4");
}

NGramCounts count_surface(std::span<const TokenId> surface, int n) {
  NGramCounts out;
  out.order = n;
  if (surface.size() < static_cast<size_t>(n)) return out;
  for (size_t i = 0; i + static_cast<size_t>(n) <= surface.size(); ++i)
    ++out.counts[pack_ngram(surface.subspan(i, static_cast<size_t>(n)))];
  return out;
}

}  // namespace

int NGramCounts::total() const {
  int t = 0;
  for (const auto& [k, c] : counts) t += c;
  return t;
}

int NGramCounts::count(uint64_t key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

uint64_t pack_ngram(std::span<const TokenId> tokens) {
  if (tokens.empty() || tokens.size() > static_cast<size_t>(kMaxNGramOrder))
    fail(ErrorCode::Contract, "pack_ngram: arity outside 1..4");
  uint64_t key = 0;
  for (TokenId id : tokens) {
    if (id < 0 || id > 0xFFFF)
      fail(ErrorCode::Contract, "token id " + std::to_string(id) + " does not fit n-gram key");
    key = (key << 16) | static_cast<uint64_t>(id);
  }
  return key;
}

NGramCounts count_ngrams(std::span<const TokenId> seq, int n) {
  check_order(n);
  const auto surface = surface_ids(seq);
  return count_surface(surface, n);
}

Score bleu_n(std::span<const TokenId> candidate, std::span<const TokenId> reference, int n,
             double smoothing_epsilon) {
  check_order(n);
  const auto cand = surface_ids(candidate);
  const auto ref = surface_ids(reference);
  if (cand.empty() || ref.empty()) return {0.0, true};
  const int orders = std::min<int>(n, static_cast<int>(cand.size()));
  double log_sum = 0.0;
  for (int k = 1; k <= orders; ++k) {
    const auto cc = count_surface(cand, k);
    const auto rc = count_surface(ref, k);
    int matched = 0;
    for (const auto& [key, c] : cc.counts) matched += std::min(c, rc.count(key));
    const double total = static_cast<double>(cand.size()) - k + 1;
    log_sum += std::log(std::max(static_cast<double>(matched), smoothing_epsilon) / total);
  }
  const double geo = std::exp(log_sum / orders);
  const double bp = std::min(
      1.0, std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  return {geo * bp, false};
}

void CorpusBleu::add(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  const auto cand = surface_ids(candidate);
  const auto ref = surface_ids(reference);
  cand_len_ += static_cast<long long>(cand.size());
  ref_len_ += static_cast<long long>(ref.size());
  for (int k = 1; k <= kMaxNGramOrder; ++k) {
    const auto cc = count_surface(cand, k);
    const auto rc = count_surface(ref, k);
    for (const auto& [key, c] : cc.counts) matches_[k - 1] += std::min(c, rc.count(key));
    totals_[k - 1] += cc.total();
  }
}

double CorpusBleu::score(int n) const {
  check_order(n);
  if (cand_len_ == 0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (totals_[k] == 0 || matches_[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches_[k]) / static_cast<double>(totals_[k]));
  }
  const double bp = std::min(
      1.0, std::exp(1.0 - static_cast<double>(ref_len_) / static_cast<double>(cand_len_)));
  return bp * std::exp(log_sum / n);
}

IdfTable IdfTable::build(std::span<const std::vector<TokenId>> references) {
  if (references.empty()) fail(ErrorCode::Input, "build_idf: empty reference corpus");
  IdfTable t;
  t.document_count_ = references.size();
  t.log_n_ = std::log(static_cast<double>(t.document_count_));
  for (const auto& doc : references) {
    const auto surface = surface_ids(doc);
    for (int k = 1; k <= kMaxNGramOrder; ++k) {
      const auto counts = count_surface(surface, k);
      for (const auto& [key, c] : counts.counts) ++t.df_[k - 1][key];
    }
  }
  return t;
}

IdfTable IdfTable::build(std::span<const TokenSequence> references) {
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(references.size());
  for (const auto& s : references) docs.push_back(s.ids);
  return build(std::span<const std::vector<TokenId>>(docs));
}

size_t IdfTable::document_frequency(int order, uint64_t key) const {
  check_order(order);
  auto it = df_[order - 1].find(key);
  return it == df_[order - 1].end() ? 0 : it->second;
}

double IdfTable::idf(int order, uint64_t key) const {
  const size_t df = std::max<size_t>(1, document_frequency(order, key));
  return log_n_ - std::log(static_cast<double>(df));
}

Score cider_d(std::span<const TokenId> candidate, std::span<const TokenId> reference,
              const IdfTable& idf, double sigma) {
  const auto cand = surface_ids(candidate);
  const auto ref = surface_ids(reference);
  if (cand.empty() || ref.empty()) return {0.0, true};
  const double delta = static_cast<double>(cand.size()) - static_cast<double>(ref.size());
  const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
  double sum = 0.0;
  for (int k = 1; k <= kMaxNGramOrder; ++k) {
    const auto cc = count_surface(cand, k);
    const auto rc = count_surface(ref, k);
    std::map<uint64_t, double> vc, vr;
    double norm_c = 0.0, norm_r = 0.0;
    for (const auto& [key, c] : cc.counts) {
      const double v = c * idf.idf(k, key);
      vc[key] = v;
      norm_c += v * v;
    }
    for (const auto& [key, c] : rc.counts) {
      const double v = c * idf.idf(k, key);
      vr[key] = v;
      norm_r += v * v;
    }
    if (norm_c == 0.0 || norm_r == 0.0) continue;
    double dot = 0.0;
    for (const auto& [key, v] : vc) {
      auto it = vr.find(key);
      if (it != vr.end()) dot += std::min(v, it->second) * it->second;
    }
    sum += dot / (std::sqrt(norm_c) * std::sqrt(norm_r)) * penalty;
  }
  return {10.0 * sum / kMaxNGramOrder, false};
}

Score word_error_rate(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  const auto cand = surface_ids(candidate);
  const auto ref = surface_ids(reference);
  if (cand.empty() && ref.empty()) return {0.0, true};
  const size_t shorter = std::min(cand.size(), ref.size());
  const size_t longer = std::max(cand.size(), ref.size());
  size_t matches = 0;
  for (size_t i = 0; i < shorter; ++i) matches += (cand[i] == ref[i]);
  return {1.0 - static_cast<double>(matches) / static_cast<double>(longer), false};
}

Metric parse_metric(std::string_view name) {
  std::string key;
  for (char ch : name)
    if (ch != '-' && ch != '_' && ch != ' ')
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (key == "bleu1") return Metric::Bleu1;
  if (key == "bleu2") return Metric::Bleu2;
  if (key == "bleu3") return Metric::Bleu3;
  if (key == "bleu4") return Metric::Bleu4;
  if (key == "ciderd" || key == "cider") return Metric::CiderD;
  fail(ErrorCode::Config, "unknown metric '" + std::string(name) + "'");
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::Bleu1: return "bleu1";
    case Metric::Bleu2: return "bleu2";
    case Metric::Bleu3: return "bleu3";
    case Metric::Bleu4: return "bleu4";
    case Metric::CiderD: return "cider_d";
  }
  return "?";
}

namespace {

void validate(const RewardSpec& spec) {
  if (spec.terms.empty()) fail(ErrorCode::Config, "reward spec has no terms");
  bool positive = false;
  std::set<Metric> seen;
  for (const auto& [m, w] : spec.terms) {
    if (!std::isfinite(w) || w < 0.0)
      fail(ErrorCode::Config, "reward weight for " + metric_name(m) + " must be non-negative");
    if (!seen.insert(m).second)
      fail(ErrorCode::Config, "reward metric " + metric_name(m) + " listed twice");
    positive |= w > 0.0;
  }
  if (!positive) fail(ErrorCode::Config, "reward spec needs at least one positive weight");
}

}  // namespace

RewardSpec RewardSpec::parse(std::string_view text) {
  RewardSpec spec;
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      fail(ErrorCode::Config, "reward term '" + item + "' must look like metric:weight");
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string name = trim(item.substr(0, colon));
    const std::string weight = trim(item.substr(colon + 1));
    double w = 0.0;
    try {
      size_t used = 0;
      w = std::stod(weight, &used);
      if (used != weight.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorCode::Config, "reward weight '" + weight + "' is not a number");
    }
    spec.terms.emplace_back(parse_metric(name), w);
  }
  validate(spec);
  return spec;
}

RewardSpec RewardSpec::from_weights(const std::map<std::string, double>& weights) {
  RewardSpec spec;
  for (const auto& [name, w] : weights) spec.terms.emplace_back(parse_metric(name), w);
  validate(spec);
  return spec;
}

std::string RewardSpec::to_string() const {
  std::ostringstream out;
  out.precision(17);
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) out << ',';
    out << metric_name(terms[i].first) << ':' << terms[i].second;
  }
  return out.str();
}

bool RewardSpec::needs_idf() const {
  for (const auto& [m, w] : terms)
    if (m == Metric::CiderD) return true;
  return false;
}

double mixture_reward(std::span<const TokenId> candidate, std::span<const TokenId> reference,
                      const RewardSpec& spec, const IdfTable* idf) {
  double total = 0.0;
  for (const auto& [m, w] : spec.terms) {
    double v = 0.0;
    switch (m) {
      case Metric::Bleu1: v = bleu_n(candidate, reference, 1).value; break;
      case Metric::Bleu2: v = bleu_n(candidate, reference, 2).value; break;
      case Metric::Bleu3: v = bleu_n(candidate, reference, 3).value; break;
      case Metric::Bleu4: v = bleu_n(candidate, reference, 4).value; break;
      case Metric::CiderD:
        if (!idf) fail(ErrorCode::Config, "cider_d reward requires an idf table");
        v = cider_d(candidate, reference, *idf).value;
        break;
    }
    total += w * v;
  }
  return total;
}

MetricReport evaluate_pairs(std::span<const std::vector<TokenId>> candidates,
                            std::span<const std::vector<TokenId>> references, const IdfTable& idf) {
  if (candidates.size() != references.size())
    fail(ErrorCode::Contract, "evaluate_pairs: candidate/reference count mismatch");
  MetricReport r;
  r.count = candidates.size();
  if (r.count == 0) return r;
  CorpusBleu corpus;
  double cider_sum = 0.0, wer_sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    corpus.add(candidates[i], references[i]);
    const auto c = cider_d(candidates[i], references[i], idf);
    const auto w = word_error_rate(candidates[i], references[i]);
    cider_sum += c.value;
    wer_sum += w.value;
    r.degenerate += c.degenerate;
  }
  for (int k = 1; k <= kMaxNGramOrder; ++k) r.bleu[k - 1] = corpus.score(k);
  r.cider_d = cider_sum / static_cast<double>(r.count);
  r.wer = wer_sum / static_cast<double>(r.count);
  return r;
}

}  // namespace semrl
