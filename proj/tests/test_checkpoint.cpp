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

#include <filesystem>
#include <fstream>

#include "core/checkpoint.hpp"
#include "core/rng.hpp"

using namespace semrl;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "semrl-test-ckpt";
  fs::create_directories(dir);
  return dir / name;
}

Checkpoint sample() {
  Rng rng(3);
  Checkpoint c;
  c.config_hash = 0x1234abcd5678ef00ull;
  c.header["model"] = "seq2seq";
  c.header["vocab_size"] = "54";
  c.params.add("enc.w", uniform_matrix(3, 5, 1.0, rng));
  c.params.add("dec.b", uniform_matrix(1, 5, 1.0, rng));
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("checkpoint round trip without optimizer") {
  auto c = sample();
  auto path = temp_file("plain.ckpt");
  save_checkpoint(path, c);
  auto back = load_checkpoint(path);
  CHECK(back.config_hash == c.config_hash);
  CHECK(back.header == c.header);
  CHECK(back.params.values() == c.params.values());
  CHECK(back.params.at(0).name() == "enc.w");
  CHECK_FALSE(back.optimizer.has_value());
}

TEST_CASE("checkpoint round trip with Adam state") {
  auto c = sample();
  Optimizer adam;
  c.params.at(0).grad.setConstant(0.3);
  c.params.at(1).grad.setConstant(-0.1);
  adam.step(c.params, 1e-2);
  adam.step(c.params, 1e-2);
  c.optimizer = adam;
  auto path = temp_file("adam.ckpt");
  save_checkpoint(path, c);
  auto back = load_checkpoint(path);
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step_count() == 2);
  CHECK(back.optimizer->first_moments()[0] == adam.first_moments()[0]);
  CHECK(back.optimizer->second_moments()[1] == adam.second_moments()[1]);
  // Saving the reloaded checkpoint reproduces the bytes.
  auto again = temp_file("adam2.ckpt");
  save_checkpoint(again, back);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("corrupt checkpoints fail to load") {
  auto path = temp_file("corrupt.ckpt");
  save_checkpoint(path, sample());
  const auto bytes = slurp(path);
  auto write = [&](const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << data;
  };
  auto expect_load_error = [&] {
    try {
      (void)load_checkpoint(path);
      FAIL("expected a load error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Load);
    }
  };
  write(bytes.substr(0, bytes.size() - 3));
  expect_load_error();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  expect_load_error();
  write(bytes + "junk");
  expect_load_error();
  fs::remove(path);
  expect_load_error();
}
