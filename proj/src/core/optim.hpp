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
#include <functional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"

namespace semrl {

enum class OptimizerKind { Sgd = 1, Adam = 2 };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string optimizer_kind_name(OptimizerKind kind);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Descent on the gradients stored in a ParamStore. State (step count, Adam
// moments) is held per parameter in store order and is checkpointable.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::Adam, AdamHyper hyper = {});

  // Throws ErrorCode::Divergence naming the first parameter with a
  // non-finite gradient; parameters are left untouched in that case.
  void step(ParamStore& params, double lr);

  OptimizerKind kind() const { return kind_; }
  const AdamHyper& hyper() const { return hyper_; }
  uint64_t step_count() const { return steps_; }

  // Moments exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_step_count(uint64_t n) { steps_ = n; }

 private:
  void ensure_state(const ParamStore& params);

  OptimizerKind kind_;
  AdamHyper hyper_;
  uint64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

void sgd_step(ParamStore& params, double lr);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

struct GradCheckEntry {
  size_t flat_index = 0;
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double floor = 0.0;  // denominator floor actually used
  bool passed = true;
};

// Builds the loss on a fresh tape for every evaluation; it must be
// deterministic. Compares backward() against central differences at the
// probed flat indices. Relative error is |a - n| / max(|a|, |n|, floor) with
// floor = max(abs_floor, eps * |loss| / (step * tolerance)): central
// differences carry round-off of about eps * |loss| / step, so smaller
// gradients are only checked to that absolute accuracy.
GradCheckReport finite_difference_check(const std::function<Var(Tape&)>& loss_fn,
                                        ParamStore& params, const std::vector<size_t>& probes,
                                        double step = 1e-5, double tolerance = 1e-4,
                                        double abs_floor = 1e-6);

// `count` distinct flat indices drawn uniformly.
std::vector<size_t> random_probes(const ParamStore& params, size_t count, uint64_t seed);

}  // namespace semrl
