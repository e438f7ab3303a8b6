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

#include "core/synth.hpp"

#include <array>
#include <span>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semrl {
namespace {

constexpr std::array<const char*, 4> kDet = {"the", "a", "every", "some"};
constexpr std::array<const char*, 8> kAnimate = {"cat",   "dog",    "bird",    "child",
                                                 "horse", "farmer", "teacher", "fox"};
constexpr std::array<const char*, 8> kThing = {"ball", "book", "apple", "river",
                                               "house", "tree", "stone", "car"};
// Adjectives 0..3 go with animate nouns, 4..7 with things.
constexpr std::array<const char*, 8> kAdj = {"young", "happy", "hungry", "tired",
                                             "red",   "old",   "heavy",  "green"};
constexpr std::array<const char*, 6> kTransitive = {"sees",    "likes",   "finds",
                                                    "carries", "watches", "follows"};
constexpr std::array<const char*, 4> kIntransitive = {"sleeps", "runs", "sings", "waits"};
constexpr std::array<const char*, 4> kPrep = {"near", "under", "behind", "beside"};
constexpr std::array<const char*, 4> kAdv = {"slowly", "today", "quietly", "again"};
constexpr std::array<const char*, 4> kExtra = {"and", "then", "now", "there"};

template <size_t N>
const char* pick(const std::array<const char*, N>& words, Rng& rng) {
  return words[rng.index(N)];
}

void noun_phrase(std::vector<std::string>& out, bool animate, Rng& rng) {
  out.push_back(pick(kDet, rng));
  if (rng.uniform() < 0.4) out.push_back(kAdj[rng.index(4) + (animate ? 0 : 4)]);
  out.push_back(animate ? pick(kAnimate, rng) : pick(kThing, rng));
}

std::vector<std::string> sentence(Rng& rng) {
  std::vector<std::string> s;
  noun_phrase(s, true, rng);
  if (rng.uniform() < 0.6) {
    s.push_back(pick(kTransitive, rng));
    noun_phrase(s, rng.uniform() < 0.5, rng);
  } else {
    s.push_back(pick(kIntransitive, rng));
    if (rng.uniform() < 0.5) s.push_back(pick(kAdv, rng));
  }
  const double tail = rng.uniform();
  if (tail < 0.35) {
    s.push_back(pick(kPrep, rng));
    noun_phrase(s, false, rng);
  } else if (tail < 0.45) {
    s.push_back(pick(kExtra, rng));
    s.push_back(pick(kIntransitive, rng));
  }
  return s;
}

}  // namespace

std::vector<std::string> generate_grammar_corpus(const GrammarConfig& cfg) {
  if (cfg.min_len < 1 || cfg.min_len > cfg.max_len)
    fail(ErrorCode::Config, "grammar corpus needs 1 <= min_len <= max_len");
  if (cfg.max_len < 3) fail(ErrorCode::Config, "grammar sentences have at least 3 words");
  Rng rng(cfg.seed);
  std::vector<std::string> lines;
  lines.reserve(cfg.sentences);
  while (lines.size() < cfg.sentences) {
    const auto words = sentence(rng);
    if (words.size() < cfg.min_len || words.size() > cfg.max_len) continue;
    std::string line;
    for (const auto& w : words) {
      if (!line.empty()) line += ' ';
      line += w;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> grammar_vocabulary() {
  std::vector<std::string> v;
  auto add = [&](std::span<const char* const> words) { v.insert(v.end(), words.begin(), words.end()); };
  add(kDet);
  add(kAnimate);
  add(kThing);
  add(kAdj);
  add(kTransitive);
  add(kIntransitive);
  add(kPrep);
  add(kAdv);
  add(kExtra);
  return v;
}

}  // namespace semrl
