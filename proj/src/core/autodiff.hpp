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

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/error.hpp"

namespace semrl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(const Matrix& m);

class Parameter {
 public:
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  Eigen::Index size() const { return value.size(); }

  Matrix value;
  Matrix grad;

 private:
  std::string name_;
};

// Named parameters in insertion order with a stable flat index over every
// scalar.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter& add(std::string name, Matrix init);
  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  size_t count() const { return params_.size(); }
  Parameter& at(size_t i) { return *params_[i]; }
  const Parameter& at(size_t i) const { return *params_[i]; }

  size_t flat_size() const;
  double flat_value(size_t i) const;
  void set_flat_value(size_t i, double v);
  double flat_grad(size_t i) const;
  std::vector<double> values() const;
  std::vector<double> grads() const;
  void assign_values(std::span<const double> flat);
  // Name of the parameter owning flat index i.
  const std::string& flat_name(size_t i) const;

  void zero_grad();
  double grad_norm() const;

 private:
  std::pair<size_t, size_t> locate(size_t flat) const;

  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> index_;
};

class Tape;

// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records forward computations for reverse accumulation. Nodes are stored in
// creation order, which is a topological order; backward() walks it once in
// reverse. A non-recording tape only evaluates values.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  size_t node_count() const { return nodes_.size(); }

  // One leaf per parameter per tape.
  Var parameter(Parameter& p);
  Var constant(Matrix m);
  Var constant_scalar(double v);

  // Throws ErrorCode::Contract unless `loss` is 1x1 and on this tape.
  void backward(Var loss);

  const Matrix& value(int id) const;
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
  // Gradient accumulated at a node during backward(); zeros if untouched.
  Matrix grad(Var v) const;

  // Primitive construction. `inputs` decide whether the result needs a
  // gradient; `fn` is dropped when it does not.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  Var push(Matrix value, std::span<const Var> inputs, Backward fn);

  template <class Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }
  // Adds `g` into the rows `rows[r]` of node `id`'s gradient.
  void accumulate_rows(int id, std::span<const int> rows, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool needs_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

namespace ad {

Var matmul(Var a, Var b);
// Same shape, or `b` a single row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var softmax_rows(Var a);
// Row-wise log-softmax stabilized by the row max. Columns with
// allowed[c] == false get probability zero (log value -inf).
Var log_softmax_rows(Var a, const std::vector<bool>* allowed = nullptr);
// out[r] = table[ids[r]].
Var gather_rows(Var table, std::span<const int> ids);
// out[r] = a[r, cols[r]] as a column vector.
Var pick(Var a, std::span<const int> cols);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var sum(Var a);
Var mean(Var a);
// Row r taken from `a` when mask[r] != 0, else from `b`.
Var row_blend(std::span<const double> mask, Var a, Var b);
// out[r] = s[r] * a[r] for constant s.
Var row_scale(Var a, std::span<const double> s);
// Each row rescaled to unit mean-square power.
Var power_normalize_rows(Var a);
// Row r repeated k times consecutively.
Var repeat_rows(Var a, Eigen::Index k);
// Same elements in row-major order, new shape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

}  // namespace ad

// Uniform(-bound, bound) initializer driven by a seeded stream.
class Rng;
Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

}  // namespace semrl
