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

#include "core/channel.hpp"

#include <cmath>

#include "core/error.hpp"

namespace semrl {

ChannelKind parse_channel_kind(std::string_view name) {
  if (name == "awgn") return ChannelKind::Awgn;
  if (name == "fading" || name == "phase_invariant_fading") return ChannelKind::PhaseInvariantFading;
  fail(ErrorCode::Config, "unknown channel kind '" + std::string(name) + "' (awgn | fading)");
}

std::string channel_kind_name(ChannelKind kind) {
  return kind == ChannelKind::Awgn ? "awgn" : "fading";
}

LatentVector power_normalize(std::span<const double> x) {
  if (x.empty()) fail(ErrorCode::Degenerate, "power_normalize: empty vector");
  double energy = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::Degenerate, "power_normalize: non-finite entry");
    energy += v * v;
  }
  if (energy == 0.0) fail(ErrorCode::Degenerate, "power_normalize: all-zero input");
  const double scale = std::sqrt(static_cast<double>(x.size()) / energy);
  LatentVector out(x.begin(), x.end());
  for (double& v : out) v *= scale;
  return out;
}

double snr_to_noise_variance(double snr_db, double signal_power) {
  if (!(signal_power > 0.0)) fail(ErrorCode::Contract, "signal power must be positive");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  if (std::isnan(snr_db)) fail(ErrorCode::Config, "snr_db is NaN");
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

double draw_rayleigh_gain(Rng& rng) {
  const double re = rng.normal();
  const double im = rng.normal();
  return std::sqrt(0.5 * (re * re + im * im));
}

ChannelDraw draw_channel(ChannelKind kind, double snr_db, size_t dim, Rng& rng) {
  ChannelDraw d;
  if (kind == ChannelKind::PhaseInvariantFading) d.gain = draw_rayleigh_gain(rng);
  const double sd = std::sqrt(snr_to_noise_variance(snr_db));
  d.noise.assign(dim, 0.0);
  if (sd > 0.0)
    for (double& n : d.noise) n = sd * rng.normal();
  return d;
}

LatentVector awgn(std::span<const double> x, double snr_db, Rng& rng) {
  const auto d = draw_channel(ChannelKind::Awgn, snr_db, x.size(), rng);
  LatentVector y(x.begin(), x.end());
  for (size_t i = 0; i < y.size(); ++i) y[i] += d.noise[i];
  return y;
}

LatentVector phase_invariant_fading(std::span<const double> x, double snr_db, Rng& rng,
                                    std::optional<double> gain) {
  // An injected gain skips the gain draw, so the noise matches awgn() exactly.
  auto d = draw_channel(gain ? ChannelKind::Awgn : ChannelKind::PhaseInvariantFading, snr_db,
                        x.size(), rng);
  if (gain) d.gain = *gain;
  LatentVector y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = d.gain * x[i] + d.noise[i];
  return y;
}

LatentVector transmit(std::span<const double> x, const ChannelConfig& cfg, Rng& rng) {
  return cfg.kind == ChannelKind::Awgn ? awgn(x, cfg.snr_db, rng)
                                       : phase_invariant_fading(x, cfg.snr_db, rng);
}

}  // namespace semrl
