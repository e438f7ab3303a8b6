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

#include "core/pixelrl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/rltrain.hpp"
#include "core/seq2seq.hpp"

namespace semrl {
namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* who) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size())
    fail(ErrorCode::Shape, std::string(who) + ": grid shapes differ (" + std::to_string(a.height) +
                               "x" + std::to_string(a.width) + " vs " + std::to_string(b.height) +
                               "x" + std::to_string(b.width) + ")");
}

int delta(PixelAction a) { return static_cast<int>(a) - 1; }

}  // namespace

ImageGrid quantize_image(std::span<const double> raw, size_t height, size_t width) {
  if (raw.size() != height * width)
    fail(ErrorCode::Input, "quantize_image: " + std::to_string(raw.size()) + " values for a " +
                               std::to_string(height) + "x" + std::to_string(width) + " grid");
  ImageGrid g{height, width, std::vector<int>(raw.size())};
  for (size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (!(v >= 0.0 && v <= 255.0))
      fail(ErrorCode::Input, "quantize_image: value " + std::to_string(v) + " at index " +
                                 std::to_string(i) + " is outside [0, 255]");
    g.levels[i] = std::clamp(static_cast<int>(std::floor(v / 25.5)), 0, kPixelLevels - 1);
  }
  return g;
}

ImageGrid init_canvas(size_t height, size_t width) {
  return {height, width, std::vector<int>(height * width, kInitLevel)};
}

ImageGrid apply_action(const ImageGrid& canvas, std::span<const PixelAction> actions) {
  if (actions.size() != canvas.size())
    fail(ErrorCode::Shape, "apply_action: " + std::to_string(actions.size()) + " actions for " +
                               std::to_string(canvas.size()) + " pixels");
  ImageGrid next = canvas;
  for (size_t i = 0; i < actions.size(); ++i)
    next.levels[i] = std::clamp(canvas.levels[i] + delta(actions[i]), 0, kPixelLevels - 1);
  return next;
}

std::vector<int> step_reward_hundredths(const ImageGrid& target, const ImageGrid& before,
                                        const ImageGrid& after) {
  require_same_shape(target, before, "step_reward");
  require_same_shape(target, after, "step_reward");
  std::vector<int> r(target.size());
  for (size_t i = 0; i < r.size(); ++i) {
    const int d0 = target.levels[i] - before.levels[i];
    const int d1 = target.levels[i] - after.levels[i];
    r[i] = d0 * d0 - d1 * d1;
  }
  return r;
}

std::vector<double> step_reward(const ImageGrid& target, const ImageGrid& before,
                                const ImageGrid& after) {
  const auto h = step_reward_hundredths(target, before, after);
  std::vector<double> r(h.size());
  for (size_t i = 0; i < h.size(); ++i) r[i] = h[i] / 100.0;
  return r;
}

double mse(const ImageGrid& a, const ImageGrid& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) return 0.0;
  long long sq = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const int d = a.levels[i] - b.levels[i];
    sq += d * d;
  }
  return static_cast<double>(sq) / 100.0 / static_cast<double>(a.size());
}

namespace {

void fill_returns(PixelEpisode& ep, size_t pixels, double gamma) {
  const size_t steps = ep.reward_hundredths.size();
  ep.returns.assign(steps, std::vector<double>(pixels, 0.0));
  std::vector<double> r(steps);
  for (size_t i = 0; i < pixels; ++i) {
    for (size_t t = 0; t < steps; ++t) r[t] = ep.reward(t, i);
    const auto g = episode_return(r, gamma);
    for (size_t t = 0; t < steps; ++t) ep.returns[t][i] = g[t];
  }
}

}  // namespace

PixelEpisode run_episode(const ImageGrid& target, const ActionChooser& choose, double gamma) {
  PixelEpisode ep;
  ep.canvases.push_back(init_canvas(target.height, target.width));
  for (size_t t = 0; t < kEpisodeSteps; ++t) {
    auto actions = choose(ep.canvases.back(), t);
    ImageGrid next = apply_action(ep.canvases.back(), actions);
    ep.reward_hundredths.push_back(step_reward_hundredths(target, ep.canvases.back(), next));
    ep.actions.push_back(std::move(actions));
    ep.canvases.push_back(std::move(next));
  }
  fill_returns(ep, target.size(), gamma);
  return ep;
}

std::vector<PixelAction> oracle_greedy_actions(const ImageGrid& target, const ImageGrid& canvas) {
  require_same_shape(target, canvas, "oracle_greedy_actions");
  std::vector<PixelAction> a(target.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const int d = target.levels[i] - canvas.levels[i];
    a[i] = d > 0 ? PixelAction::Increase : d < 0 ? PixelAction::Decrease : PixelAction::Keep;
  }
  return a;
}

std::vector<ImageGrid> synthetic_stroke_images(size_t count, size_t height, size_t width,
                                               uint64_t seed) {
  if (height < 2 || width < 2) fail(ErrorCode::Config, "stroke images need at least 2x2 pixels");
  Rng rng(seed);
  std::vector<ImageGrid> out;
  out.reserve(count);
  for (size_t n = 0; n < count; ++n) {
    ImageGrid g{height, width, std::vector<int>(height * width)};
    for (auto& l : g.levels) l = static_cast<int>(rng.index(2));
    const size_t strokes = 1 + rng.index(2);
    for (size_t s = 0; s < strokes; ++s) {
      const int level = 6 + static_cast<int>(rng.index(4));
      const bool horizontal = rng.index(2) == 0;
      const size_t len = 3 + rng.index((horizontal ? width : height) - 2);
      const size_t r0 = rng.index(height), c0 = rng.index(width);
      for (size_t k = 0; k < len; ++k) {
        const size_t r = horizontal ? r0 : (r0 + k) % height;
        const size_t c = horizontal ? (c0 + k) % width : c0;
        g.levels[r * width + c] = level;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

ImageGrid parse_pgm(const std::string& text) {
  std::istringstream in;
  std::string cleaned;
  // Strip comments before tokenizing.
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    cleaned += line;
    cleaned += '\n';
  }
  in.str(cleaned);
  std::string magic;
  long long w = 0, h = 0, maxval = 0;
  if (!(in >> magic) || magic != "P2") fail(ErrorCode::Format, "pgm: expected plain P2 magic");
  if (!(in >> w >> h >> maxval) || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    fail(ErrorCode::Format, "pgm: bad header");
  std::vector<double> raw;
  raw.reserve(static_cast<size_t>(w * h));
  for (long long i = 0; i < w * h; ++i) {
    long long v;
    if (!(in >> v)) fail(ErrorCode::Format, "pgm: expected " + std::to_string(w * h) + " samples");
    if (v < 0 || v > maxval)
      fail(ErrorCode::Format, "pgm: sample " + std::to_string(v) + " outside [0, maxval]");
    raw.push_back(static_cast<double>(v) * 255.0 / static_cast<double>(maxval));
  }
  std::string extra;
  if (in >> extra) fail(ErrorCode::Format, "pgm: trailing data after samples");
  return quantize_image(raw, static_cast<size_t>(h), static_cast<size_t>(w));
}

std::string format_pgm(const ImageGrid& image) {
  std::ostringstream out;
  out << "P2\n" << image.width << ' ' << image.height << "\n" << (kPixelLevels - 1) << "\n";
  for (size_t r = 0; r < image.height; ++r) {
    for (size_t c = 0; c < image.width; ++c)
      out << (c ? " " : "") << image.levels[r * image.width + c];
    out << '\n';
  }
  return out.str();
}

ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pgm(ss.str());
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << format_pgm(image);
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Model

namespace {

struct Shape {
  const char* name;
  size_t rows;
  size_t cols;
};

constexpr size_t kPixelFeatures = 4;  // canvas value, x, y, step
constexpr size_t kMapChannels = 4;    // per-pixel features decoded from the latent

std::vector<Shape> expected_shapes(const PixelDims& d) {
  const size_t P = d.pixels(), E = d.encoder_hidden, L = d.latent_dim, H = d.policy_hidden;
  return {
      {"enc.w1", P, E},     {"enc.b1", 1, E},   {"enc.w2", E, L},
      {"enc.b2", 1, L},     {"dec.w", L, P * kMapChannels}, {"dec.b", 1, P * kMapChannels},
      {"pol.wz", L, H},     {"pol.wm", kMapChannels, H},    {"pol.wf", kPixelFeatures, H},
      {"pol.b1", 1, H},     {"pol.w2", H, H},   {"pol.b2", 1, H},
      {"pol.out.w", H, 3},  {"pol.out.b", 1, 3}, {"ce.out.w", H, kPixelLevels},
      {"ce.out.b", 1, kPixelLevels},
  };
}

void validate_dims(const PixelDims& d) {
  if (d.height == 0 || d.width == 0 || d.encoder_hidden == 0 || d.latent_dim == 0 ||
      d.policy_hidden == 0)
    fail(ErrorCode::Config, "pixel model dimensions must be positive");
}

Matrix images_matrix(std::span<const ImageGrid> images, size_t pixels) {
  Matrix m(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(pixels));
  for (size_t r = 0; r < images.size(); ++r) {
    if (images[r].size() != pixels)
      fail(ErrorCode::Shape, "image " + std::to_string(r) + " has " +
                                 std::to_string(images[r].size()) + " pixels, model expects " +
                                 std::to_string(pixels));
    for (size_t i = 0; i < pixels; ++i)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = images[r].pixel(i) - 0.45;
  }
  return m;
}

// Rows ordered (episode row, pixel).
Matrix pixel_features(const PixelDims& d, std::span<const ImageGrid* const> canvases, size_t step) {
  const size_t P = d.pixels();
  Matrix f(static_cast<Eigen::Index>(canvases.size() * P), kPixelFeatures);
  const double wx = d.width > 1 ? 1.0 / static_cast<double>(d.width - 1) : 0.0;
  const double wy = d.height > 1 ? 1.0 / static_cast<double>(d.height - 1) : 0.0;
  for (size_t r = 0; r < canvases.size(); ++r)
    for (size_t i = 0; i < P; ++i) {
      const auto row = static_cast<Eigen::Index>(r * P + i);
      f(row, 0) = canvases[r]->pixel(i) - 0.45;
      f(row, 1) = static_cast<double>(i % d.width) * wx - 0.5;
      f(row, 2) = static_cast<double>(i / d.width) * wy - 0.5;
      f(row, 3) = static_cast<double>(step) / static_cast<double>(kEpisodeSteps) - 0.5;
    }
  return f;
}

// First policy layer for every (row, pixel) pair.
Var first_layer(Tape& tape, PixelModel& model, Var latent_proj, const Matrix& features) {
  auto& ps = model.params();
  Var f = ad::matmul(tape.constant(features), tape.parameter(ps.get("pol.wf")));
  return ad::tanh(ad::add(ad::add(latent_proj, f), tape.parameter(ps.get("pol.b1"))));
}

Var latent_projection(Tape& tape, PixelModel& model, Var received) {
  if (static_cast<size_t>(received.cols()) != model.dims().latent_dim)
    fail(ErrorCode::Contract, "pixel policy: received latent has " +
                                  std::to_string(received.cols()) + " columns, model expects " +
                                  std::to_string(model.dims().latent_dim));
  auto& ps = model.params();
  const auto pixels = static_cast<Eigen::Index>(model.dims().pixels());
  Var z = ad::repeat_rows(ad::matmul(received, tape.parameter(ps.get("pol.wz"))), pixels);
  // The receiver's per-pixel feature map; row (r, i) holds pixel i of image r.
  Var map = ad::add(ad::matmul(received, tape.parameter(ps.get("dec.w"))), tape.parameter(ps.get("dec.b")));
  map = ad::reshape(map, received.rows() * pixels, static_cast<Eigen::Index>(kMapChannels));
  return ad::add(z, ad::matmul(map, tape.parameter(ps.get("pol.wm"))));
}

}  // namespace

PixelModel PixelModel::create(const PixelDims& d, uint64_t seed) {
  validate_dims(d);
  Rng rng(seed);
  ParamStore ps;
  for (const auto& s : expected_shapes(d)) {
    const std::string name = s.name;
    double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
    if (name.ends_with("b1") || name.ends_with("b2") || name.ends_with(".b")) bound = 0.1;
    ps.add(name, uniform_matrix(static_cast<Eigen::Index>(s.rows),
                                static_cast<Eigen::Index>(s.cols), bound, rng));
  }
  return PixelModel(d, std::move(ps));
}

PixelModel PixelModel::from_params(const PixelDims& d, ParamStore params) {
  validate_dims(d);
  const auto shapes = expected_shapes(d);
  if (params.count() != shapes.size())
    fail(ErrorCode::Load, "pixel model parameter count " + std::to_string(params.count()) +
                              " != expected " + std::to_string(shapes.size()));
  for (const auto& s : shapes) {
    if (!params.contains(s.name)) fail(ErrorCode::Load, std::string("missing parameter ") + s.name);
    const auto& v = params.get(s.name).value;
    if (static_cast<size_t>(v.rows()) != s.rows || static_cast<size_t>(v.cols()) != s.cols)
      fail(ErrorCode::Load, std::string("parameter ") + s.name + " has shape " + shape_string(v));
  }
  return PixelModel(d, std::move(params));
}

std::map<std::string, std::string> PixelModel::header() const {
  return {{"model", "pixel"},
          {"height", std::to_string(dims_.height)},
          {"width", std::to_string(dims_.width)},
          {"encoder_hidden", std::to_string(dims_.encoder_hidden)},
          {"latent_dim", std::to_string(dims_.latent_dim)},
          {"policy_hidden", std::to_string(dims_.policy_hidden)}};
}

PixelDims PixelModel::dims_from_header(const std::map<std::string, std::string>& h) {
  auto get = [&](const char* key) -> size_t {
    auto it = h.find(key);
    if (it == h.end()) fail(ErrorCode::Load, std::string("checkpoint header lacks ") + key);
    try {
      return std::stoul(it->second);
    } catch (const std::exception&) {
      fail(ErrorCode::Load, std::string("checkpoint header ") + key + " is not an integer");
    }
  };
  auto model = h.find("model");
  if (model == h.end() || model->second != "pixel")
    fail(ErrorCode::Load, "checkpoint does not hold a pixel model");
  return {get("height"), get("width"), get("encoder_hidden"), get("latent_dim"),
          get("policy_hidden")};
}

Var transmit_images(Tape& tape, PixelModel& model, std::span<const ImageGrid> images,
                    ChannelKind kind, double snr_db, Rng& rng) {
  auto& ps = model.params();
  Var x = tape.constant(images_matrix(images, model.dims().pixels()));
  Var h = ad::tanh(ad::add(ad::matmul(x, tape.parameter(ps.get("enc.w1"))),
                           tape.parameter(ps.get("enc.b1"))));
  Var z = ad::add(ad::matmul(h, tape.parameter(ps.get("enc.w2"))), tape.parameter(ps.get("enc.b2")));
  Var normalized = ad::power_normalize_rows(z);
  const auto real = draw_channel_batch(kind, snr_db, normalized.rows(), normalized.cols(), rng);
  return apply_channel(normalized, real);
}

Var pixel_ce_loss(Tape& tape, PixelModel& model, Var received, std::span<const ImageGrid> targets) {
  if (static_cast<size_t>(received.rows()) != targets.size())
    fail(ErrorCode::Shape, "pixel_ce_loss: one target per received row is required");
  const auto& d = model.dims();
  const ImageGrid canvas = init_canvas(d.height, d.width);
  std::vector<const ImageGrid*> canvases(targets.size(), &canvas);
  Var h = first_layer(tape, model, latent_projection(tape, model, received),
                      pixel_features(d, canvases, 0));
  auto& ps = model.params();
  Var logits = ad::add(ad::matmul(h, tape.parameter(ps.get("ce.out.w"))),
                       tape.parameter(ps.get("ce.out.b")));
  std::vector<int> labels;
  labels.reserve(targets.size() * d.pixels());
  for (const auto& t : targets) {
    if (t.size() != d.pixels()) fail(ErrorCode::Shape, "pixel_ce_loss: target size mismatch");
    labels.insert(labels.end(), t.levels.begin(), t.levels.end());
  }
  return ad::scale(ad::mean(ad::pick(ad::log_softmax_rows(logits), labels)), -1.0);
}

PixelRollout rollout_pixels(Tape& tape, PixelModel& model, Var received,
                            std::span<const ImageGrid> targets, Rng& rng, double temperature,
                            double gamma) {
  const auto& d = model.dims();
  const size_t rows = static_cast<size_t>(received.rows());
  if (targets.size() != rows) fail(ErrorCode::Shape, "rollout_pixels: one target per row");
  if (temperature < 0.0) fail(ErrorCode::Config, "rollout temperature must be >= 0");
  auto& ps = model.params();
  Var proj = latent_projection(tape, model, received);
  PixelRollout out;
  out.episodes.resize(rows);
  for (size_t r = 0; r < rows; ++r) {
    if (targets[r].size() != d.pixels()) fail(ErrorCode::Shape, "rollout_pixels: target size");
    out.episodes[r].canvases.push_back(init_canvas(d.height, d.width));
  }
  const size_t P = d.pixels();
  std::vector<const ImageGrid*> canvases(rows);
  std::vector<double> probs(kPixelActions);
  for (size_t t = 0; t < kEpisodeSteps; ++t) {
    for (size_t r = 0; r < rows; ++r) canvases[r] = &out.episodes[r].canvases.back();
    Var h1 = first_layer(tape, model, proj, pixel_features(d, canvases, t));
    Var h2 = ad::tanh(ad::add(ad::matmul(h1, tape.parameter(ps.get("pol.w2"))),
                              tape.parameter(ps.get("pol.b2"))));
    Var logits = ad::add(ad::matmul(h2, tape.parameter(ps.get("pol.out.w"))),
                         tape.parameter(ps.get("pol.out.b")));
    Var logp = ad::log_softmax_rows(logits);
    const Matrix& lp = logp.value();
    std::vector<int> chosen(rows * P);
    for (size_t r = 0; r < rows; ++r) {
      std::vector<PixelAction> actions(P);
      for (size_t i = 0; i < P; ++i) {
        const auto row = static_cast<Eigen::Index>(r * P + i);
        int a = 0;
        if (temperature == 0.0) {
          for (int k = 1; k < kPixelActions; ++k)
            if (lp(row, k) > lp(row, a)) a = k;
        } else {
          double mx = -std::numeric_limits<double>::infinity();
          for (int k = 0; k < kPixelActions; ++k) mx = std::max(mx, lp(row, k) / temperature);
          for (int k = 0; k < kPixelActions; ++k) probs[k] = std::exp(lp(row, k) / temperature - mx);
          a = static_cast<int>(rng.categorical(probs));
        }
        chosen[r * P + i] = a;
        actions[i] = static_cast<PixelAction>(a);
      }
      auto& ep = out.episodes[r];
      ImageGrid next = apply_action(ep.canvases.back(), actions);
      ep.reward_hundredths.push_back(step_reward_hundredths(targets[r], ep.canvases.back(), next));
      ep.actions.push_back(std::move(actions));
      ep.canvases.push_back(std::move(next));
    }
    out.step_logprobs.push_back(ad::pick(logp, chosen));
  }
  for (auto& ep : out.episodes) fill_returns(ep, P, gamma);
  return out;
}

Var pixel_self_critic_surrogate(const PixelRollout& rollout, size_t group_size) {
  const size_t rows = rollout.episodes.size();
  if (rows == 0 || rollout.step_logprobs.empty())
    fail(ErrorCode::Contract, "pixel surrogate: empty rollout");
  if (group_size < 2 || rows % group_size != 0)
    fail(ErrorCode::Config, "pixel surrogate: rows must split into groups of M >= 2");
  const size_t P = rollout.episodes.front().canvases.front().size();
  Tape& tape = *rollout.step_logprobs.front().tape();
  const double norm = 1.0 / static_cast<double>(rows * P);
  Var total;
  std::vector<double> returns(group_size);
  for (size_t t = 0; t < rollout.step_logprobs.size(); ++t) {
    Var lp = rollout.step_logprobs[t];
    if (!lp.valid() || !tape.recording() || !tape.needs_grad(lp.id()))
      fail(ErrorCode::Contract, "pixel surrogate: log-probabilities are detached from the graph");
    std::vector<double> adv(rows * P);
    for (size_t g = 0; g < rows; g += group_size)
      for (size_t i = 0; i < P; ++i) {
        for (size_t m = 0; m < group_size; ++m) returns[m] = rollout.episodes[g + m].returns[t][i];
        const auto base = leave_one_out_baseline(returns);
        for (size_t m = 0; m < group_size; ++m)
          adv[(g + m) * P + i] = returns[m] - base[m];
      }
    Var term = ad::sum(ad::row_scale(lp, adv));
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, -norm);
}

void PixelTrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorCode::Config, "image batch_size must be >= 1");
  if (rl_epochs > 0 && samples_per_input < 2)
    fail(ErrorCode::Config, "image samples must be >= 2 for the self-critic baseline");
  if (!(ce_lr > 0.0) || !(rl_lr > 0.0)) fail(ErrorCode::Config, "image learning rates must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::Config, "image gamma must be in [0, 1]");
  if (!(clip_norm > 0.0)) fail(ErrorCode::Config, "image clip_norm must be positive");
}

std::vector<PixelEpochRecord> train_pixel_model(
    const PixelTrainConfig& cfg, PixelModel& model, std::span<const ImageGrid> images,
    uint64_t seed, const std::function<void(const PixelEpochRecord&)>& on_epoch) {
  cfg.validate();
  if (images.empty()) fail(ErrorCode::Input, "no training images");
  std::vector<PixelEpochRecord> log;
  const Rng root(seed);
  Optimizer opt(OptimizerKind::Adam);
  const size_t total = cfg.pretrain_epochs + cfg.rl_epochs;
  for (size_t epoch = 1; epoch <= total; ++epoch) {
    const bool ce = epoch <= cfg.pretrain_epochs;
    if (epoch == cfg.pretrain_epochs + 1) opt = Optimizer(OptimizerKind::Adam);
    Rng rng = root.fork(epoch);
    const auto order = seeded_permutation(images.size(), rng);
    double sum = 0.0;
    size_t n = 0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<ImageGrid> batch;
      for (size_t k = begin; k < end; ++k) batch.push_back(images[order[k]]);
      model.params().zero_grad();
      Tape tape;
      Var received = transmit_images(tape, model, batch, cfg.channel, cfg.snr_db, rng);
      if (ce) {
        Var loss = pixel_ce_loss(tape, model, received, batch);
        if (!std::isfinite(loss.scalar())) fail(ErrorCode::Divergence, "pixel CE loss is not finite");
        tape.backward(loss);
        sum += loss.scalar();
      } else {
        const size_t m = cfg.samples_per_input;
        std::vector<ImageGrid> targets;
        targets.reserve(batch.size() * m);
        for (const auto& img : batch)
          for (size_t k = 0; k < m; ++k) targets.push_back(img);
        Var repeated = ad::repeat_rows(received, static_cast<Eigen::Index>(m));
        auto rollout = rollout_pixels(tape, model, repeated, targets, rng, 1.0, cfg.gamma);
        Var surrogate = pixel_self_critic_surrogate(rollout, m);
        tape.backward(surrogate);
        clip_grad_norm(model.params(), cfg.clip_norm);
        long long hundredths = 0;
        for (const auto& ep : rollout.episodes)
          for (const auto& step : ep.reward_hundredths)
            for (int r : step) hundredths += r;
        sum += static_cast<double>(hundredths) / 100.0 /
               static_cast<double>(rollout.episodes.size() * batch.front().size());
      }
      opt.step(model.params(), ce ? cfg.ce_lr : cfg.rl_lr);
      ++n;
    }
    PixelEpochRecord rec{epoch, ce ? "ce" : "rl", ce ? cfg.ce_lr : cfg.rl_lr,
                         sum / static_cast<double>(n)};
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

PixelEvalResult evaluate_pixel_model(PixelModel& model, std::span<const ImageGrid> images,
                                     ChannelKind kind, double snr_db, uint64_t seed, double gamma) {
  if (images.empty()) fail(ErrorCode::Input, "no evaluation images");
  Rng rng(seed);
  Tape tape(false);
  Var received = transmit_images(tape, model, images, kind, snr_db, rng);
  auto rollout = rollout_pixels(tape, model, received, images, rng, 0.0, gamma);
  PixelEvalResult out;
  out.step_mse.assign(kEpisodeSteps + 1, 0.0);
  out.step_mean_reward.assign(kEpisodeSteps, 0.0);
  const double n = static_cast<double>(images.size());
  for (size_t r = 0; r < images.size(); ++r) {
    const auto& ep = rollout.episodes[r];
    for (size_t t = 0; t <= kEpisodeSteps; ++t) out.step_mse[t] += mse(images[r], ep.canvases[t]) / n;
    for (size_t t = 0; t < kEpisodeSteps; ++t) {
      long long s = 0;
      for (int v : ep.reward_hundredths[t]) s += v;
      out.step_mean_reward[t] += static_cast<double>(s) / 100.0 / static_cast<double>(images[r].size()) / n;
    }
  }
  out.mean_final_mse = out.step_mse.back();
  out.episodes = std::move(rollout.episodes);
  return out;
}

}  // namespace semrl
