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

#include "core/error.hpp"

namespace semrl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return "config";
    case ErrorCode::Input: return "input";
    case ErrorCode::Format: return "format";
    case ErrorCode::Corruption: return "corruption";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Contract: return "contract";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "io";
    case ErrorCode::Load: return "load";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace semrl
