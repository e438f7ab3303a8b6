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
#include <map>
#include <optional>
#include <string>

#include "core/autodiff.hpp"
#include "core/optim.hpp"

namespace semrl {

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'M', 'R', 'L', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

// Layout (little-endian): magic[8], u32 version, u64 config_hash,
// u32 n_header, n_header x (str key, str value), u32 n_params,
// n_params x (str name, u32 rows, u32 cols, f64[rows*cols]),
// u32 optimizer kind (0 = none), [u64 steps, f64 beta1, beta2, epsilon,
// then per parameter the first and second moment blocks for Adam].
// str = u32 byte length followed by the bytes.
struct Checkpoint {
  uint64_t config_hash = 0;
  std::map<std::string, std::string> header;
  ParamStore params;
  std::optional<Optimizer> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws ErrorCode::Load on malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semrl
