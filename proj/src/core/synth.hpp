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
#include <string>
#include <vector>

namespace semrl {

struct GrammarConfig {
  size_t sentences = 2000;
  size_t min_len = 3;
  size_t max_len = 8;
  uint64_t seed = 1;
};

// Sentences from a small agreement grammar (determiners, adjectives, nouns
// split into animate and inanimate classes, transitive and intransitive
// verbs, prepositional tails). The vocabulary has 50 words.
std::vector<std::string> generate_grammar_corpus(const GrammarConfig& cfg);

// Every word the grammar can emit.
std::vector<std::string> grammar_vocabulary();

}  // namespace semrl
