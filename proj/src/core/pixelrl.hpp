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
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/channel.hpp"
#include "core/optim.hpp"
#include "core/rng.hpp"

namespace semrl {

inline constexpr int kPixelLevels = 10;
inline constexpr int kInitLevel = 5;
inline constexpr size_t kEpisodeSteps = 5;
inline constexpr double kPixelGamma = 0.99;

// H x W grid of quantized levels 0..9; the pixel value is level / 10.
struct ImageGrid {
  size_t height = 0;
  size_t width = 0;
  std::vector<int> levels;  // row-major

  size_t size() const { return levels.size(); }
  double pixel(size_t i) const { return levels[i] / 10.0; }
  bool operator==(const ImageGrid&) const = default;
};

// pixel = clamp(floor(raw / 25.5), 0, 9) / 10. Throws ErrorCode::Input for
// values outside [0, 255] or a size mismatch.
ImageGrid quantize_image(std::span<const double> raw, size_t height, size_t width);

ImageGrid init_canvas(size_t height, size_t width);

enum class PixelAction : int { Decrease = 0, Keep = 1, Increase = 2 };
inline constexpr int kPixelActions = 3;

// level' = clamp(level + delta, 0, 9). Throws ErrorCode::Shape on a size
// mismatch.
ImageGrid apply_action(const ImageGrid& canvas, std::span<const PixelAction> actions);

// Per-pixel rewards in hundredths: (I - C_t)^2 - (I - C_{t+1})^2 in level
// units, which is the pixel-value reward times 100 and is exact in integers.
std::vector<int> step_reward_hundredths(const ImageGrid& target, const ImageGrid& before,
                                        const ImageGrid& after);
std::vector<double> step_reward(const ImageGrid& target, const ImageGrid& before,
                                const ImageGrid& after);

double mse(const ImageGrid& a, const ImageGrid& b);

struct PixelEpisode {
  std::vector<ImageGrid> canvases;                   // C(0) .. C(5)
  std::vector<std::vector<PixelAction>> actions;     // [step][pixel]
  std::vector<std::vector<int>> reward_hundredths;   // [step][pixel], r(t+1)
  std::vector<std::vector<double>> returns;          // [step][pixel], G(t)

  double reward(size_t step, size_t pixel) const { return reward_hundredths[step][pixel] / 100.0; }
  double final_mse(const ImageGrid& target) const { return mse(target, canvases.back()); }
};

using ActionChooser =
    std::function<std::vector<PixelAction>(const ImageGrid& canvas, size_t step)>;

// Five transitions from the uniform init canvas.
PixelEpisode run_episode(const ImageGrid& target, const ActionChooser& choose,
                         double gamma = kPixelGamma);

// Test hook: move every pixel one level toward its target.
std::vector<PixelAction> oracle_greedy_actions(const ImageGrid& target, const ImageGrid& canvas);

std::vector<ImageGrid> synthetic_stroke_images(size_t count, size_t height, size_t width,
                                               uint64_t seed);

// Plain (P2) portable graymap. read_pgm rescales samples to [0, 255] before
// quantizing; write_pgm stores levels with maxval 9.
ImageGrid read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid parse_pgm(const std::string& text);
std::string format_pgm(const ImageGrid& image);

struct PixelDims {
  size_t height = 8;
  size_t width = 8;
  size_t encoder_hidden = 64;
  size_t latent_dim = 32;
  size_t policy_hidden = 64;

  size_t pixels() const { return height * width; }
  bool operator==(const PixelDims&) const = default;
};

// Dense image encoder to a latent, and a policy shared by every pixel over
// [received latent, the pixel's slice of a feature map decoded from it,
// canvas value, x, y, step]. A level-classification head on
// the first policy layer supports cross-entropy pretraining.
class PixelModel {
 public:
  static PixelModel create(const PixelDims& dims, uint64_t seed);
  static PixelModel from_params(const PixelDims& dims, ParamStore params);

  const PixelDims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::map<std::string, std::string> header() const;
  static PixelDims dims_from_header(const std::map<std::string, std::string>& header);

 private:
  PixelModel(PixelDims dims, ParamStore params) : dims_(dims), params_(std::move(params)) {}
  PixelDims dims_;
  ParamStore params_;
};

// encode -> power normalize -> channel, one realization per image.
Var transmit_images(Tape& tape, PixelModel& model, std::span<const ImageGrid> images,
                    ChannelKind kind, double snr_db, Rng& rng);

// -mean log p(target level) over every pixel, from the first policy layer at
// the init canvas.
Var pixel_ce_loss(Tape& tape, PixelModel& model, Var received, std::span<const ImageGrid> targets);

struct PixelRollout {
  std::vector<PixelEpisode> episodes;
  std::vector<Var> step_logprobs;  // [step], (rows * pixels) x 1
};

// One episode per row of `received`; targets[r] scores row r. temperature 0
// takes the argmax action.
PixelRollout rollout_pixels(Tape& tape, PixelModel& model, Var received,
                            std::span<const ImageGrid> targets, Rng& rng, double temperature,
                            double gamma = kPixelGamma);

// Leave-one-out advantages on per-pixel returns across the M episodes of
// each group, as a surrogate to minimize.
Var pixel_self_critic_surrogate(const PixelRollout& rollout, size_t group_size);

struct PixelTrainConfig {
  size_t pretrain_epochs = 20;
  size_t rl_epochs = 20;
  size_t batch_size = 32;
  size_t samples_per_input = 4;
  double ce_lr = 3e-3;
  double rl_lr = 1e-3;
  double gamma = kPixelGamma;
  double clip_norm = 5.0;
  ChannelKind channel = ChannelKind::Awgn;
  double snr_db = 10.0;

  void validate() const;
};

struct PixelEpochRecord {
  size_t epoch = 0;
  std::string stage;
  double lr = 0.0;
  double value = 0.0;  // mean CE loss or mean episode reward per pixel
};

std::vector<PixelEpochRecord> train_pixel_model(
    const PixelTrainConfig& cfg, PixelModel& model, std::span<const ImageGrid> images,
    uint64_t seed, const std::function<void(const PixelEpochRecord&)>& on_epoch = {});

struct PixelEvalResult {
  double mean_final_mse = 0.0;
  std::vector<double> step_mse;          // mean MSE of C(0) .. C(5)
  std::vector<double> step_mean_reward;  // mean per-pixel reward of steps 1..5
  std::vector<PixelEpisode> episodes;
};

PixelEvalResult evaluate_pixel_model(PixelModel& model, std::span<const ImageGrid> images,
                                     ChannelKind kind, double snr_db, uint64_t seed,
                                     double gamma = kPixelGamma);

}  // namespace semrl
