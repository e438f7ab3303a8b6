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

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "core/optim.hpp"
#include "core/pixelrl.hpp"

using namespace semrl;

namespace {

ImageGrid grid(size_t h, size_t w, std::vector<int> levels) { return {h, w, std::move(levels)}; }

std::vector<PixelAction> all(size_t n, PixelAction a) { return std::vector<PixelAction>(n, a); }

ImageGrid random_target(Rng& rng, size_t h, size_t w) {
  ImageGrid g{h, w, std::vector<int>(h * w)};
  for (auto& l : g.levels) l = static_cast<int>(rng.index(kPixelLevels));
  return g;
}

}  // namespace

TEST_CASE("quantization") {
  std::vector<double> raw{0.0, 254.0, 127.5, 255.0};
  auto q = quantize_image(raw, 2, 2);
  CHECK(q.pixel(0) == 0.0);
  CHECK(q.pixel(1) == doctest::Approx(0.9));
  CHECK(q.pixel(2) == doctest::Approx(0.5));
  CHECK(q.levels[3] == 9);
  std::vector<double> ladder;
  for (int k = 0; k < 10; ++k) ladder.push_back(25.5 * k);
  auto levels = quantize_image(ladder, 1, 10).levels;
  CHECK(std::set<int>(levels.begin(), levels.end()).size() == 10);
  CHECK_THROWS_AS(quantize_image(std::vector<double>{-1.0}, 1, 1), Error);
  CHECK_THROWS_AS(quantize_image(std::vector<double>{256.0}, 1, 1), Error);
  CHECK_THROWS_AS(quantize_image(raw, 3, 3), Error);
}

TEST_CASE("canvas and actions") {
  auto c = init_canvas(3, 5);
  CHECK(c.size() == 15);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c.pixel(i) == 0.5);
  CHECK(init_canvas(3, 5) == c);
  CHECK(mse(c, grid(3, 5, std::vector<int>(15, 5))) == 0.0);

  auto top = grid(1, 1, {9});
  CHECK(apply_action(top, all(1, PixelAction::Increase)).levels[0] == 9);
  auto mid = grid(1, 1, {5});
  CHECK(apply_action(mid, all(1, PixelAction::Keep)) == mid);
  auto g = mid;
  for (int i = 0; i < 5; ++i) g = apply_action(g, all(1, PixelAction::Decrease));
  CHECK(g.levels[0] == 0);
  g = apply_action(g, all(1, PixelAction::Decrease));
  CHECK(g.levels[0] == 0);
  CHECK_THROWS_AS(apply_action(mid, all(2, PixelAction::Keep)), Error);
}

TEST_CASE("step rewards") {
  auto target = grid(1, 1, {7});
  auto before = grid(1, 1, {5});
  CHECK(step_reward(target, before, grid(1, 1, {6}))[0] == doctest::Approx(0.03));
  CHECK(step_reward_hundredths(target, before, grid(1, 1, {6}))[0] == 3);
  CHECK(step_reward(target, before, before)[0] == 0.0);
  CHECK(step_reward(target, before, grid(1, 1, {4}))[0] == doctest::Approx(-0.05));
}

TEST_CASE("episodes telescope exactly") {
  Rng rng(21);
  for (int e = 0; e < 500; ++e) {
    auto target = random_target(rng, 3, 4);
    auto ep = run_episode(target, [&](const ImageGrid& c, size_t) {
      std::vector<PixelAction> a(c.size());
      for (auto& v : a) v = static_cast<PixelAction>(rng.index(kPixelActions));
      return a;
    });
    REQUIRE(ep.canvases.size() == kEpisodeSteps + 1);
    for (size_t i = 0; i < target.size(); ++i) {
      int sum = 0;
      for (const auto& step : ep.reward_hundredths) sum += step[i];
      const int d0 = target.levels[i] - ep.canvases.front().levels[i];
      const int d5 = target.levels[i] - ep.canvases.back().levels[i];
      CHECK(sum == d0 * d0 - d5 * d5);
    }
  }
}

TEST_CASE("discounted returns match direct summation") {
  Rng rng(5);
  auto target = random_target(rng, 2, 2);
  auto ep = run_episode(target, [&](const ImageGrid& c, size_t) {
    std::vector<PixelAction> a(c.size());
    for (auto& v : a) v = static_cast<PixelAction>(rng.index(kPixelActions));
    return a;
  }, 0.99);
  for (size_t i = 0; i < target.size(); ++i)
    for (size_t t = 0; t < kEpisodeSteps; ++t) {
      double direct = 0.0;
      for (size_t k = t; k < kEpisodeSteps; ++k) direct += std::pow(0.99, static_cast<double>(k - t)) * ep.reward(k, i);
      CHECK(ep.returns[t][i] == doctest::Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("oracle greedy policy reaches every level") {
  std::vector<int> levels(10);
  for (int l = 0; l < 10; ++l) levels[l] = l;
  auto target = grid(2, 5, levels);
  auto ep = run_episode(target, [&](const ImageGrid& c, size_t) { return oracle_greedy_actions(target, c); });
  CHECK(ep.final_mse(target) == 0.0);
  CHECK(ep.canvases.back() == target);
}

TEST_CASE("PGM round trip and errors") {
  auto img = grid(2, 3, {0, 1, 9, 5, 5, 2});
  CHECK(parse_pgm(format_pgm(img)) == img);
  CHECK(parse_pgm("P2\n# comment\n2 1\n255\n0 254\n").levels == std::vector<int>{0, 9});
  CHECK_THROWS_AS(parse_pgm("P5\n1 1\n255\n"), Error);
  CHECK_THROWS_AS(parse_pgm("P2\n2 2\n255\n1 2 3\n"), Error);
  CHECK_THROWS_AS(parse_pgm("P2\n1 1\n255\n300\n"), Error);
  auto dir = std::filesystem::temp_directory_path() / "semrl-test-pgm";
  std::filesystem::create_directories(dir);
  write_pgm(dir / "a.pgm", img);
  CHECK(read_pgm(dir / "a.pgm") == img);
}

TEST_CASE("synthetic stroke images") {
  auto imgs = synthetic_stroke_images(20, 8, 8, 3);
  CHECK(imgs.size() == 20);
  CHECK(synthetic_stroke_images(20, 8, 8, 3) == imgs);
  for (const auto& im : imgs) {
    CHECK(im.size() == 64);
    for (int l : im.levels) CHECK((l >= 0 && l <= 9));
  }
}

TEST_CASE("pixel model gradients match finite differences") {
  PixelDims d{4, 4, 6, 5, 7};
  auto model = PixelModel::create(d, 3);
  CHECK(PixelModel::dims_from_header(model.header()) == d);
  auto imgs = synthetic_stroke_images(3, 4, 4, 8);
  auto probes = random_probes(model.params(), 40, 2);
  auto ce = finite_difference_check(
      [&](Tape& t) {
        Rng rng(1);
        auto rx = transmit_images(t, model, imgs, ChannelKind::Awgn, 10.0, rng);
        return pixel_ce_loss(t, model, rx, imgs);
      },
      model.params(), probes);
  CHECK_MESSAGE(ce.passed, "pixel CE max rel error " << ce.max_rel_error);

  // Fixed actions for the surrogate: sample once, then replay with the same seed.
  std::vector<ImageGrid> targets;
  for (const auto& im : imgs)
    for (int k = 0; k < 2; ++k) targets.push_back(im);
  auto sur = finite_difference_check(
      [&](Tape& t) {
        Rng rng(1);
        auto rx = transmit_images(t, model, imgs, ChannelKind::Awgn, 10.0, rng);
        auto rep = ad::repeat_rows(rx, 2);
        Rng srng(4);
        auto roll = rollout_pixels(t, model, rep, targets, srng, 1.0);
        return pixel_self_critic_surrogate(roll, 2);
      },
      model.params(), probes);
  CHECK_MESSAGE(sur.passed, "pixel surrogate max rel error " << sur.max_rel_error);
}

TEST_CASE("greedy rollout and determinism") {
  PixelDims d{4, 4, 6, 5, 7};
  auto model = PixelModel::create(d, 4);
  auto imgs = synthetic_stroke_images(6, 4, 4, 1);
  auto a = evaluate_pixel_model(model, imgs, ChannelKind::PhaseInvariantFading, 10.0, 3);
  auto b = evaluate_pixel_model(model, imgs, ChannelKind::PhaseInvariantFading, 10.0, 3);
  CHECK(a.mean_final_mse == b.mean_final_mse);
  CHECK(a.step_mse.size() == kEpisodeSteps + 1);
  CHECK(a.step_mean_reward.size() == kEpisodeSteps);
  // Mean reward per step telescopes into the MSE change.
  double reward_sum = 0.0;
  for (double r : a.step_mean_reward) reward_sum += r;
  CHECK(reward_sum == doctest::Approx(a.step_mse.front() - a.step_mse.back()).epsilon(1e-12));
}

TEST_CASE("training lowers final MSE on a small problem") {
  PixelDims d{4, 4, 16, 8, 16};
  auto model = PixelModel::create(d, 1);
  auto imgs = synthetic_stroke_images(64, 4, 4, 2);
  auto before = evaluate_pixel_model(model, imgs, ChannelKind::Awgn, 10.0, 7).mean_final_mse;
  PixelTrainConfig cfg;
  cfg.pretrain_epochs = 10;
  cfg.rl_epochs = 5;
  cfg.batch_size = 16;
  std::vector<PixelEpochRecord> log;
  train_pixel_model(cfg, model, imgs, 3, [&](const PixelEpochRecord& r) { log.push_back(r); });
  CHECK(log.size() == 15);
  CHECK(log.front().stage == "ce");
  CHECK(log.back().stage == "rl");
  auto after = evaluate_pixel_model(model, imgs, ChannelKind::Awgn, 10.0, 7).mean_final_mse;
  CHECK(after < before);
}
