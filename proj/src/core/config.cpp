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

#include "core/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "core/error.hpp"

namespace semrl {
namespace {

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::Config, "key '" + key + "': '" + value + "' is not " + expected);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad_value(key, v, "a non-negative integer");
  return out;
}

size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return kNoiselessSnr;
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<size_t> out;
  for (const auto& item : split_list(v, ',')) out.push_back(to_size(key, item));
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ",") + i;
  return s;
}

template <class T, class F>
std::string join_map(const std::vector<T>& items, F f) {
  std::vector<std::string> s;
  for (const auto& i : items) s.push_back(f(i));
  return join(s);
}

std::string stage_name(SecondStage s) { return s == SecondStage::Rl ? "rl" : "ce"; }

SecondStage parse_stage(const std::string& key, const std::string& v) {
  if (v == "rl") return SecondStage::Rl;
  if (v == "ce") return SecondStage::Ce;
  bad_value(key, v, "'rl' or 'ce'");
}

ChannelKind to_channel(const std::string& key, const std::string& v) {
  try {
    return parse_channel_kind(v);
  } catch (const Error&) {
    bad_value(key, v, "a channel kind (awgn, fading)");
  }
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SIZE_FIELD(name, member)                                                                  \
  Field {                                                                                         \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = to_size(k, v);                                                                   \
    },                                                                                            \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                        \
  }
#define U64_FIELD(name, member)                                                                   \
  Field {                                                                                         \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = to_u64(k, v);                                                                    \
    },                                                                                            \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                        \
  }
#define DOUBLE_FIELD(name, member)                                                                \
  Field {                                                                                         \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = to_double(k, v);                                                                 \
    },                                                                                            \
        [](const ExperimentConfig& c) { return format_double(c.member); }                         \
  }
#define CHANNEL_FIELD(name, member)                                                               \
  Field {                                                                                         \
    name, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                   \
      c.member = to_channel(k, v);                                                                \
    },                                                                                            \
        [](const ExperimentConfig& c) { return channel_kind_name(c.member); }                     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"corpus.path", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.corpus_path = v; },
       [](const ExperimentConfig& c) { return c.corpus_path; }},
      SIZE_FIELD("corpus.synthetic_sentences", synthetic_sentences),
      SIZE_FIELD("corpus.synthetic_min_len", synthetic_min_len),
      SIZE_FIELD("corpus.synthetic_max_len", synthetic_max_len),
      U64_FIELD("corpus.synthetic_seed", synthetic_seed),
      SIZE_FIELD("corpus.min_len", preprocess.min_len),
      SIZE_FIELD("corpus.max_len", preprocess.max_len),
      SIZE_FIELD("corpus.min_count", preprocess.min_count),
      {"corpus.split",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const auto parts = split_list(v, ':');
         if (parts.size() != 2) bad_value(k, v, "a ratio like 4:1");
         c.preprocess.ratio = {to_size(k, parts[0]), to_size(k, parts[1])};
         if (c.preprocess.ratio.train_parts == 0 || c.preprocess.ratio.test_parts == 0)
           bad_value(k, v, "a ratio with positive parts");
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.preprocess.ratio.train_parts) + ":" +
                std::to_string(c.preprocess.ratio.test_parts);
       }},
      U64_FIELD("corpus.split_seed", preprocess.seed),

      SIZE_FIELD("model.embed_dim", dims.embed_dim),
      SIZE_FIELD("model.hidden_dim", dims.hidden_dim),
      SIZE_FIELD("model.latent_dim", dims.latent_dim),

      CHANNEL_FIELD("channel.kind", channel),
      DOUBLE_FIELD("channel.snr_db", snr_db),

      SIZE_FIELD("train.pretrain_epochs", schedule.pretrain_epochs),
      SIZE_FIELD("train.total_epochs", schedule.total_epochs),
      SIZE_FIELD("train.batch_size", schedule.batch_size),
      SIZE_FIELD("train.samples", schedule.samples_per_input),
      DOUBLE_FIELD("train.ce_lr", schedule.ce_lr.initial),
      {"train.ce_lr_drops",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.schedule.ce_lr.drop_epochs = to_size_list(k, v);
       },
       [](const ExperimentConfig& c) {
         return join_map(c.schedule.ce_lr.drop_epochs, [](size_t e) { return std::to_string(e); });
       }},
      DOUBLE_FIELD("train.rl_lr", schedule.rl_lr.initial),
      {"train.rl_lr_drops",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.schedule.rl_lr.drop_epochs = to_size_list(k, v);
       },
       [](const ExperimentConfig& c) {
         return join_map(c.schedule.rl_lr.drop_epochs, [](size_t e) { return std::to_string(e); });
       }},
      {"train.lr_factor",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.schedule.ce_lr.factor = c.schedule.rl_lr.factor = to_double(k, v);
       },
       [](const ExperimentConfig& c) { return format_double(c.schedule.ce_lr.factor); }},
      {"train.reward",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.schedule.reward = RewardSpec::parse(v);
         } catch (const Error& e) {
           fail(ErrorCode::Config, "key '" + k + "': " + e.what());
         }
       },
       [](const ExperimentConfig& c) { return c.schedule.reward.to_string(); }},
      {"train.variants",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.variants.clear();
         for (const auto& item : split_list(v, ',')) {
           const auto s = parse_stage(k, item);
           if (std::find(c.variants.begin(), c.variants.end(), s) != c.variants.end())
             bad_value(k, v, "a list without duplicates");
           c.variants.push_back(s);
         }
         if (c.variants.empty()) bad_value(k, v, "a non-empty list of rl/ce");
       },
       [](const ExperimentConfig& c) { return join_map(c.variants, stage_name); }},
      {"train.optimizer",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.schedule.optimizer = parse_optimizer_kind(v);
         } catch (const Error&) {
           bad_value(k, v, "an optimizer (adam, sgd)");
         }
       },
       [](const ExperimentConfig& c) { return optimizer_kind_name(c.schedule.optimizer); }},
      DOUBLE_FIELD("train.clip_norm", schedule.clip_norm),
      SIZE_FIELD("train.max_len", schedule.max_len),
      SIZE_FIELD("train.checkpoint_every", schedule.checkpoint_every),
      SIZE_FIELD("train.eval_every", schedule.eval_every),
      SIZE_FIELD("train.eval_passes", schedule.eval_passes),

      SIZE_FIELD("eval.passes", eval_passes),
      {"eval.snrs",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         try {
           c.eval_snrs = SnrGrid::parse(v);
         } catch (const Error& e) {
           fail(ErrorCode::Config, "key '" + k + "': " + e.what());
         }
       },
       [](const ExperimentConfig& c) { return join_map(c.eval_snrs.points, format_double); }},
      {"eval.channels",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.eval_channels.clear();
         for (const auto& item : split_list(v, ',')) c.eval_channels.push_back(to_channel(k, item));
         if (c.eval_channels.empty()) bad_value(k, v, "a non-empty channel list");
       },
       [](const ExperimentConfig& c) { return join_map(c.eval_channels, channel_kind_name); }},
      SIZE_FIELD("eval.transcripts", transcripts),
      U64_FIELD("eval.seed", eval_seed),

      {"run.output_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
       [](const ExperimentConfig& c) { return c.output_dir; }},
      {"run.seeds",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.seeds.clear();
         for (const auto& item : split_list(v, ',')) c.seeds.push_back(to_u64(k, item));
         if (c.seeds.empty()) bad_value(k, v, "a non-empty seed list");
       },
       [](const ExperimentConfig& c) {
         return join_map(c.seeds, [](uint64_t s) { return std::to_string(s); });
       }},
      {"run.log_wall_time",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.log_wall_time = to_bool(k, v); },
       [](const ExperimentConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); }},

      SIZE_FIELD("image.height", image.dims.height),
      SIZE_FIELD("image.width", image.dims.width),
      SIZE_FIELD("image.encoder_hidden", image.dims.encoder_hidden),
      SIZE_FIELD("image.latent_dim", image.dims.latent_dim),
      SIZE_FIELD("image.policy_hidden", image.dims.policy_hidden),
      SIZE_FIELD("image.train_images", image.train_images),
      SIZE_FIELD("image.test_images", image.test_images),
      U64_FIELD("image.seed", image.image_seed),
      {"image.input_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.image.input_dir = v; },
       [](const ExperimentConfig& c) { return c.image.input_dir; }},
      SIZE_FIELD("image.pretrain_epochs", image.train.pretrain_epochs),
      SIZE_FIELD("image.rl_epochs", image.train.rl_epochs),
      SIZE_FIELD("image.batch_size", image.train.batch_size),
      SIZE_FIELD("image.samples", image.train.samples_per_input),
      DOUBLE_FIELD("image.ce_lr", image.train.ce_lr),
      DOUBLE_FIELD("image.rl_lr", image.train.rl_lr),
      DOUBLE_FIELD("image.gamma", image.train.gamma),
      DOUBLE_FIELD("image.clip_norm", image.train.clip_norm),
      CHANNEL_FIELD("image.train_channel", image.train.channel),
      DOUBLE_FIELD("image.snr_db", image.train.snr_db),
      CHANNEL_FIELD("image.test_channel", image.test_channel),
      SIZE_FIELD("image.demo_images", image.demo_images),
  };
  return f;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

bool known_section(std::string_view s) {
  for (const auto& f : fields()) {
    std::string_view k = f.key;
    if (k.substr(0, k.find('.')) == s) return true;
  }
  return false;
}

void validate(const ExperimentConfig& c) {
  if (c.dims.embed_dim == 0 || c.dims.hidden_dim == 0 || c.dims.latent_dim == 0)
    fail(ErrorCode::Config, "model dimensions must be positive");
  if (c.preprocess.min_len < 1 || c.preprocess.min_len > c.preprocess.max_len)
    fail(ErrorCode::Config, "corpus.min_len must be in 1..corpus.max_len");
  if (c.eval_passes < 1) fail(ErrorCode::Config, "eval.passes must be >= 1");
  c.schedule.validate();
  c.image.train.validate();
  if (c.image.dims.height == 0 || c.image.dims.width == 0)
    fail(ErrorCode::Config, "image dimensions must be positive");
}

std::string section_text(const ConfigText& text, const std::vector<std::string>& sections) {
  std::string out;
  for (const auto& [k, v] : text.values()) {
    const std::string section = k.substr(0, k.find('.'));
    if (std::find(sections.begin(), sections.end(), section) != sections.end())
      out += k + "=" + v + "\n";
  }
  return out;
}

}  // namespace

ConfigText ConfigText::parse(std::string_view text, std::string_view origin) {
  ConfigText c;
  c.origin_ = origin;
  std::string section;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::Config, where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!known_section(section)) fail(ErrorCode::Config, where + "unknown section [" + section + "]");
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorCode::Config, where + "expected key = value");
      if (section.empty()) fail(ErrorCode::Config, where + "key outside of a [section]");
      const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
      if (!find_field(key)) fail(ErrorCode::Config, where + "unknown key '" + key + "'");
      if (c.values_.count(key)) fail(ErrorCode::Config, where + "duplicate key '" + key + "'");
      c.values_[key] = trim(std::string_view(line).substr(eq + 1));
      c.lines_[key] = line_no;
    }
    if (end == text.size()) break;
  }
  return c;
}

ConfigText ConfigText::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> ConfigText::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void ConfigText::set(const std::string& key, std::string value) {
  if (!find_field(key)) fail(ErrorCode::Config, "unknown key '" + key + "'");
  values_[key] = trim(value);
  lines_.erase(key);
}

size_t ConfigText::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

SnrGrid SnrGrid::parse(std::string_view spec) {
  const std::string s = trim(spec);
  SnrGrid g;
  if (s.find(':') != std::string::npos) {
    const auto parts = split_list(s, ':');
    if (parts.size() != 3) fail(ErrorCode::Config, "SNR range '" + s + "' is not start:stop:step");
    const double a = to_double("snrs", parts[0]), b = to_double("snrs", parts[1]),
                 step = to_double("snrs", parts[2]);
    if (!(step > 0.0) || b < a) fail(ErrorCode::Config, "SNR range '" + s + "' is empty or has step <= 0");
    const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    for (long long i = 0; i <= n; ++i) g.points.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& item : split_list(s, ',')) g.points.push_back(to_double("snrs", item));
  }
  if (g.points.empty()) fail(ErrorCode::Config, "SNR grid is empty");
  std::sort(g.points.begin(), g.points.end());
  g.points.erase(std::unique(g.points.begin(), g.points.end()), g.points.end());
  return g;
}

ExperimentConfig ExperimentConfig::from_text(const ConfigText& text) {
  ExperimentConfig c;
  for (const auto& [key, value] : text.values()) {
    const Field* f = find_field(key);
    try {
      f->set(c, key, value);
    } catch (const Error& e) {
      const size_t line = text.line_of(key);
      fail(ErrorCode::Config,
           line ? text.origin() + ":" + std::to_string(line) + ": " + e.what() : std::string(e.what()));
    }
  }
  validate(c);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides) {
  ConfigText text = ConfigText::load(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, "override '" + o + "' is not key=value");
    text.set(trim(std::string_view(o).substr(0, eq)), o.substr(eq + 1));
  }
  return from_text(text);
}

ConfigText ExperimentConfig::to_text() const {
  ConfigText t;
  for (const auto& f : fields()) t.set(f.key, f.get(*this));
  return t;
}

std::string format_config(const ConfigText& text) {
  std::string out, section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    auto v = text.get(key);
    if (!v) continue;
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (out.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += key.substr(dot + 1) + " = " + *v + "\n";
  }
  return out;
}

std::string ExperimentConfig::to_string() const { return format_config(to_text()); }

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t ExperimentConfig::hash() const {
  return fnv1a64(section_text(to_text(), {"corpus", "model", "channel", "train"}));
}

uint64_t ExperimentConfig::image_hash() const { return fnv1a64(section_text(to_text(), {"image"})); }

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) fail(ErrorCode::Internal, "format_double failed");
  return std::string(buf, p);
}

}  // namespace semrl
