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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/rng.hpp"

namespace semrl {

using LatentVector = std::vector<double>;

enum class ChannelKind { Awgn, PhaseInvariantFading };

ChannelKind parse_channel_kind(std::string_view name);
std::string channel_kind_name(ChannelKind kind);

// Use as snr_db to disable the noise term.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct ChannelConfig {
  ChannelKind kind = ChannelKind::Awgn;
  double snr_db = 10.0;
  uint64_t seed = 0;
};

// x * sqrt(L / sum x^2): unit mean-square power.
LatentVector power_normalize(std::span<const double> x);

// signal_power / 10^(snr_db / 10); zero for the noiseless sentinel.
double snr_to_noise_variance(double snr_db, double signal_power = 1.0);

LatentVector awgn(std::span<const double> x, double snr_db, Rng& rng);

// y = h x + n with a single Rayleigh gain h (E[h^2] = 1) per block.
// `gain` overrides the draw.
LatentVector phase_invariant_fading(std::span<const double> x, double snr_db, Rng& rng,
                                    std::optional<double> gain = std::nullopt);

double draw_rayleigh_gain(Rng& rng);

// Per-block channel realization: output = gain * input + noise.
struct ChannelDraw {
  double gain = 1.0;
  std::vector<double> noise;
};

ChannelDraw draw_channel(ChannelKind kind, double snr_db, size_t dim, Rng& rng);

LatentVector transmit(std::span<const double> x, const ChannelConfig& cfg, Rng& rng);

}  // namespace semrl
