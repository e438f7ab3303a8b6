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

#include "core/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace semrl {
namespace {

struct CodeRange {
  char32_t lo;
  char32_t hi;
};
struct CodeMap {
  char32_t from;
  char32_t to;
};

#include "core/unicode_tables.inc"

template <size_t N>
bool in_ranges(const CodeRange (&table)[N], char32_t cp) {
  auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                             [](char32_t v, const CodeRange& r) { return v < r.lo; });
  if (it == std::begin(table)) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  auto it = std::lower_bound(std::begin(kLowercaseMap), std::end(kLowercaseMap), cp,
                             [](const CodeMap& m, char32_t v) { return m.from < v; });
  if (it != std::end(kLowercaseMap) && it->from == cp) return it->to;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Returns false on malformed input (truncation, overlong form, surrogate,
// out-of-range code point).
bool next_code_point(std::string_view s, size_t& pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  size_t extra;
  char32_t min_value;
  if (b0 < 0x80) {
    cp = b0;
    ++pos;
    return true;
  } else if ((b0 & 0xE0) == 0xC0) {
    extra = 1, cp = b0 & 0x1F, min_value = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2, cp = b0 & 0x0F, min_value = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3, cp = b0 & 0x07, min_value = 0x10000;
  } else {
    return false;
  }
  if (pos + extra >= s.size()) return false;
  for (size_t k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min_value || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
  pos += extra + 1;
  return true;
}

}  // namespace

TokenList normalize_line(std::string_view line, size_t line_number) {
  TokenList tokens;
  std::string current;
  size_t pos = 0;
  while (pos < line.size()) {
    char32_t cp;
    const size_t start = pos;
    if (!next_code_point(line, pos, cp))
      fail(ErrorCode::Format, "line " + std::to_string(line_number) +
                                  ": invalid UTF-8 at byte " + std::to_string(start));
    if (in_ranges(kWhitespaceRanges, cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (in_ranges(kPunctuationRanges, cp)) continue;
    append_utf8(current, to_lower(cp));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<TokenList> preprocess_corpus(std::span<const std::string> raw_lines,
                                         const PreprocessConfig& cfg) {
  if (cfg.min_len > cfg.max_len) fail(ErrorCode::Config, "min_len exceeds max_len");
  std::vector<TokenList> out;
  for (size_t i = 0; i < raw_lines.size(); ++i) {
    auto tokens = normalize_line(raw_lines[i], i + 1);
    if (tokens.empty() || tokens.size() < cfg.min_len || tokens.size() > cfg.max_len) continue;
    out.push_back(std::move(tokens));
  }
  return out;
}

const std::string& special_token_text(TokenId id) {
  static const std::string names[kNumSpecials] = {"<PAD>", "<SOS>", "<EOS>", "<UNK>"};
  if (id < 0 || id >= kNumSpecials) fail(ErrorCode::Contract, "not a special token id");
  return names[id];
}

void Vocabulary::insert(std::string token) {
  const auto id = static_cast<TokenId>(id_to_token_.size());
  if (!token_to_id_.emplace(token, id).second)
    fail(ErrorCode::Corruption, "duplicate vocabulary token '" + token + "'");
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::specials_only() {
  Vocabulary v;
  for (TokenId id = 0; id < kNumSpecials; ++id) v.insert(special_token_text(id));
  return v;
}

Vocabulary Vocabulary::build(std::span<const TokenList> token_lists, size_t min_count) {
  if (min_count < 1) fail(ErrorCode::Config, "min_count must be >= 1");
  if (token_lists.empty()) fail(ErrorCode::Input, "build_vocabulary: no sentences");
  std::map<std::string, size_t> counts;
  for (const auto& sentence : token_lists)
    for (const auto& tok : sentence) ++counts[tok];
  std::vector<std::pair<std::string, size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n < min_count) continue;
    bool clash = false;
    for (TokenId id = 0; id < kNumSpecials; ++id) clash |= (tok == special_token_text(id));
    if (!clash) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v = specials_only();
  for (auto& [tok, n] : kept) v.insert(tok);
  return v;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.find(std::string(token)) != token_to_id_.end();
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_token_.size())
    fail(ErrorCode::Corruption, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                    std::to_string(id_to_token_.size()));
  return id_to_token_[static_cast<size_t>(id)];
}

std::string Vocabulary::serialize() const {
  std::string out = "semrl-vocab\t" + std::to_string(kFileVersion) + "\t" +
                    std::to_string(id_to_token_.size()) + "\n";
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    out += id_to_token_[i] + "\t" + std::to_string(i) + "\n";
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Format, "vocabulary: missing header");
  std::istringstream header(line);
  std::string magic;
  int version = 0;
  size_t declared = 0;
  if (!(header >> magic >> version >> declared) || magic != "semrl-vocab")
    fail(ErrorCode::Format, "vocabulary: malformed header '" + line + "'");
  if (version != kFileVersion)
    fail(ErrorCode::Format, "vocabulary: unsupported version " + std::to_string(version));
  Vocabulary v;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      fail(ErrorCode::Format, "vocabulary line " + std::to_string(line_no) + ": missing TAB");
    const std::string tok = line.substr(0, tab);
    size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::Format, "vocabulary line " + std::to_string(line_no) + ": bad id");
    }
    if (id != v.size())
      fail(ErrorCode::Corruption, "vocabulary line " + std::to_string(line_no) +
                                      ": ids must be dense and ascending");
    v.insert(tok);
  }
  if (v.size() != declared)
    fail(ErrorCode::Corruption, "vocabulary: header declares " + std::to_string(declared) +
                                    " entries, file has " + std::to_string(v.size()));
  if (v.size() < static_cast<size_t>(kNumSpecials))
    fail(ErrorCode::Corruption, "vocabulary: special tokens missing");
  for (TokenId id = 0; id < kNumSpecials; ++id)
    if (v.id_to_token_[id] != special_token_text(id))
      fail(ErrorCode::Corruption, "vocabulary: special tokens out of order");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

TokenSequence encode(const TokenList& tokens, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.reserve(tokens.size() + 1);
  for (const auto& tok : tokens) seq.ids.push_back(vocab.id(tok));
  seq.ids.push_back(kEos);
  return seq;
}

TokenList decode(const TokenSequence& seq, const Vocabulary& vocab) {
  TokenList out;
  for (TokenId id : seq.ids) {
    const std::string& text = vocab.token(id);
    if (id == kEos) break;
    if (id == kPad || id == kSos) continue;
    out.push_back(text);
  }
  return out;
}

std::vector<TokenId> surface_ids(std::span<const TokenId> ids) {
  std::vector<TokenId> out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kSos) continue;
    out.push_back(id);
  }
  return out;
}

std::vector<size_t> seeded_permutation(size_t n, Rng& rng) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

size_t train_count_for(size_t n, SplitRatio ratio) {
  const size_t parts = ratio.train_parts + ratio.test_parts;
  // Round half up: n * train / parts.
  return (2 * n * ratio.train_parts + parts) / (2 * parts);
}

Corpus make_corpus(std::span<const TokenList> token_lists, const Vocabulary& vocab, SplitTag tag) {
  Corpus c;
  c.split = tag;
  c.sentences.reserve(token_lists.size());
  for (const auto& tl : token_lists) c.sentences.push_back(encode(tl, vocab));
  return c;
}

TokenSequence Batch::sequence(size_t row) const {
  TokenSequence s;
  s.ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(row * width),
               ids.begin() + static_cast<std::ptrdiff_t>(row * width + lengths[row]));
  return s;
}

Batch make_batch(const Corpus& corpus, std::span<const size_t> indices) {
  Batch b;
  b.rows = indices.size();
  for (size_t idx : indices) b.width = std::max(b.width, corpus.sentences.at(idx).length());
  b.ids.assign(b.rows * b.width, kPad);
  for (size_t r = 0; r < b.rows; ++r) {
    const auto& s = corpus.sentences[indices[r]];
    std::copy(s.ids.begin(), s.ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * b.width));
    b.lengths.push_back(s.length());
    b.indices.push_back(indices[r]);
  }
  return b;
}

BatchIterator::BatchIterator(const Corpus& corpus, size_t batch_size, uint64_t seed)
    : corpus_(corpus), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) fail(ErrorCode::Config, "batch_size must be >= 1");
  if (corpus.sentences.empty()) fail(ErrorCode::Input, "batch_iterator: empty corpus");
  begin_epoch(0);
}

void BatchIterator::begin_epoch(uint64_t epoch) {
  Rng rng = Rng(seed_).fork(epoch);
  order_ = seeded_permutation(corpus_.size(), rng);
  cursor_ = 0;
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const size_t end = std::min(order_.size(), cursor_ + batch_size_);
  auto b = make_batch(corpus_, std::span<const size_t>(order_.data() + cursor_, end - cursor_));
  cursor_ = end;
  return b;
}

size_t BatchIterator::batches_per_epoch() const {
  return (corpus_.size() + batch_size_ - 1) / batch_size_;
}

PreparedData prepare_corpus(std::span<const std::string> raw_lines, const PreprocessConfig& cfg) {
  PreparedData d;
  d.raw_lines = raw_lines.size();
  auto kept = preprocess_corpus(raw_lines, cfg);
  d.retained = kept.size();
  auto [train, test] = split_train_test(kept, cfg.ratio, cfg.seed);
  d.train_tokens = std::move(train);
  d.test_tokens = std::move(test);
  d.vocab = Vocabulary::build(d.train_tokens, cfg.min_count);
  d.train = make_corpus(d.train_tokens, d.vocab, SplitTag::Train);
  d.test = make_corpus(d.test_tokens, d.vocab, SplitTag::Test);
  return d;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace semrl
