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

#include "core/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "core/rng.hpp"

namespace semrl {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  fail(ErrorCode::Config, "unknown optimizer '" + name + "' (adam | sgd)");
}

std::string optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

namespace {

void check_finite(const ParamStore& params) {
  for (size_t i = 0; i < params.count(); ++i)
    if (!params.at(i).grad.allFinite())
      fail(ErrorCode::Divergence, "non-finite gradient in parameter '" + params.at(i).name() + "'");
}

}  // namespace

Optimizer::Optimizer(OptimizerKind kind, AdamHyper hyper) : kind_(kind), hyper_(hyper) {}

void Optimizer::ensure_state(const ParamStore& params) {
  if (kind_ != OptimizerKind::Adam) return;
  if (m_.size() == params.count()) return;
  m_.clear();
  v_.clear();
  for (size_t i = 0; i < params.count(); ++i) {
    const auto& p = params.at(i).value;
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Optimizer::step(ParamStore& params, double lr) {
  check_finite(params);
  ++steps_;
  if (kind_ == OptimizerKind::Sgd) {
    for (size_t i = 0; i < params.count(); ++i) params.at(i).value -= lr * params.at(i).grad;
    return;
  }
  ensure_state(params);
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (size_t i = 0; i < params.count(); ++i) {
    auto& p = params.at(i);
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + hyper_.epsilon);
  }
}

void sgd_step(ParamStore& params, double lr) {
  check_finite(params);
  for (size_t i = 0; i < params.count(); ++i) params.at(i).value -= lr * params.at(i).grad;
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (size_t i = 0; i < params.count(); ++i) params.at(i).grad *= s;
  }
  return norm;
}

GradCheckReport finite_difference_check(const std::function<Var(Tape&)>& loss_fn,
                                        ParamStore& params, const std::vector<size_t>& probes,
                                        double step, double tolerance, double abs_floor) {
  params.zero_grad();
  double loss_value = 0.0;
  {
    Tape tape;
    Var loss = loss_fn(tape);
    loss_value = loss.scalar();
    tape.backward(loss);
  }
  // Recording tapes on both sides: some losses insist on a live graph.
  auto eval = [&]() {
    Tape tape;
    return loss_fn(tape).scalar();
  };
  GradCheckReport report;
  // Gradients below this cannot be resolved to `tolerance` at this step.
  report.floor = std::max(abs_floor, std::numeric_limits<double>::epsilon() * std::abs(loss_value) /
                                         (step * tolerance));
  for (size_t idx : probes) {
    const double original = params.flat_value(idx);
    params.set_flat_value(idx, original + step);
    const double up = eval();
    params.set_flat_value(idx, original - step);
    const double down = eval();
    params.set_flat_value(idx, original);
    GradCheckEntry e;
    e.flat_index = idx;
    e.name = params.flat_name(idx);
    e.analytic = params.flat_grad(idx);
    e.numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), report.floor});
    e.rel_error = std::abs(e.analytic - e.numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.passed &= e.rel_error <= tolerance;
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::vector<size_t> random_probes(const ParamStore& params, size_t count, uint64_t seed) {
  const size_t n = params.flat_size();
  count = std::min(count, n);
  Rng rng(seed);
  std::set<size_t> chosen;
  while (chosen.size() < count) chosen.insert(rng.index(n));
  return {chosen.begin(), chosen.end()};
}

}  // namespace semrl
