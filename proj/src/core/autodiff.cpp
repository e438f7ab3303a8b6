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

#include "core/autodiff.hpp"

#include <cmath>
#include <limits>

#include "core/rng.hpp"

namespace semrl {

std::string shape_string(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

Parameter::Parameter(std::string name, Matrix v)
    : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())), name_(std::move(name)) {}

ParamStore::ParamStore(const ParamStore& other) { *this = other; }

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    auto& mine = add(p->name(), p->value);
    mine.grad = p->grad;
  }
  return *this;
}

Parameter& ParamStore::add(std::string name, Matrix init) {
  if (index_.count(name)) fail(ErrorCode::Contract, "duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(init)));
  return *params_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

Parameter& ParamStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) fail(ErrorCode::Contract, "no parameter named '" + std::string(name) + "'");
  return *params_[it->second];
}

const Parameter& ParamStore::get(std::string_view name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

size_t ParamStore::flat_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->size());
  return n;
}

std::pair<size_t, size_t> ParamStore::locate(size_t flat) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto n = static_cast<size_t>(params_[i]->size());
    if (flat < n) return {i, flat};
    flat -= n;
  }
  fail(ErrorCode::Contract, "flat parameter index out of range");
}

double ParamStore::flat_value(size_t i) const {
  auto [p, off] = locate(i);
  return params_[p]->value.data()[off];
}

void ParamStore::set_flat_value(size_t i, double v) {
  auto [p, off] = locate(i);
  params_[p]->value.data()[off] = v;
}

double ParamStore::flat_grad(size_t i) const {
  auto [p, off] = locate(i);
  return params_[p]->grad.data()[off];
}

const std::string& ParamStore::flat_name(size_t i) const { return params_[locate(i).first]->name(); }

std::vector<double> ParamStore::values() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& p : params_) out.insert(out.end(), p->value.data(), p->value.data() + p->size());
  return out;
}

std::vector<double> ParamStore::grads() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& p : params_) out.insert(out.end(), p->grad.data(), p->grad.data() + p->size());
  return out;
}

void ParamStore::assign_values(std::span<const double> flat) {
  if (flat.size() != flat_size()) fail(ErrorCode::Shape, "assign_values: flat size mismatch");
  size_t off = 0;
  for (auto& p : params_) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + p->size()), p->value.data());
    off += static_cast<size_t>(p->size());
  }
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

const Matrix& Var::value() const {
  if (!tape_) fail(ErrorCode::Contract, "use of an empty Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) fail(ErrorCode::Shape, "scalar() on " + shape_string(v));
  return v(0, 0);
}

const Matrix& Tape::value(int id) const {
  const auto& n = nodes_[static_cast<size_t>(id)];
  return n.external ? *n.external : n.value;
}

Var Tape::parameter(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant_scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.tape() != this) fail(ErrorCode::Contract, "operand belongs to another tape");
      n.needs_grad |= nodes_[static_cast<size_t>(in.id())].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate_rows(int id, std::span<const int> rows, const Matrix& g) {
  auto& n = node(id);
  if (!n.needs_grad) return;
  const Matrix& v = value(id);
  if (!n.has_grad) {
    n.grad.setZero(v.rows(), v.cols());
    n.has_grad = true;
  }
  for (size_t r = 0; r < rows.size(); ++r) n.grad.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
}

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_[static_cast<size_t>(v.id())];
  if (n.has_grad) return n.grad;
  const Matrix& val = value(v.id());
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) fail(ErrorCode::Contract, "backward: loss is not on this tape");
  if (!record_) fail(ErrorCode::Contract, "backward on a non-recording tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1)
    fail(ErrorCode::Contract, "backward: loss must be scalar, got " + shape_string(lv));
  auto& root = node(loss.id());
  if (!root.needs_grad) return;
  root.grad = Matrix::Ones(1, 1);
  root.has_grad = true;
  for (int id = loss.id(); id >= 0; --id) {
    auto& n = node(id);
    if (!n.has_grad) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

namespace ad {
namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::Shape, std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                               shape_string(b));
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || !a.tape()) fail(ErrorCode::Contract, "operands on different tapes");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    fail(ErrorCode::Shape, "matmul: shape mismatch " + shape_string(av) + " vs " + shape_string(bv));
  Matrix out = av * bv;
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const int ia = a.id(), ib = b.id();
  if (bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols()) {
    Matrix out = av.rowwise() + bv.row(0);
    return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
      tp.accumulate(ia, g);
      if (tp.needs_grad(ib)) tp.accumulate(ib, g.colwise().sum());
    });
  }
  require_same_shape("add", av, bv);
  Matrix out = av + bv;
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  Matrix out = a.value() - b.value();
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) tp.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(b.value());
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value() * c, {a}, [ia, c](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * c); });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  const int ia = a.id();
  const int self = static_cast<int>(t.node_count());
  return t.push(std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    tp.accumulate(ia, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().tanh().matrix();
  const int ia = a.id();
  const int self = static_cast<int>(t.node_count());
  return t.push(std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    tp.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().exp().matrix();
  const int ia = a.id();
  const int self = static_cast<int>(t.node_count());
  return t.push(std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.cwiseProduct(tp.value(self)));
  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().log().matrix();
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, (g.array() / tp.value(ia).array()).matrix());
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const double m = av.row(r).maxCoeff();
    out.row(r) = (av.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  const int ia = a.id();
  const int self = static_cast<int>(t.node_count());
  return t.push(std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix gi(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      gi.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    tp.accumulate(ia, gi);
  });
}

Var log_softmax_rows(Var a, const std::vector<bool>* allowed) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (allowed && static_cast<Eigen::Index>(allowed->size()) != av.cols())
    fail(ErrorCode::Shape, "log_softmax_rows: mask has " + std::to_string(allowed->size()) +
                               " entries for " + shape_string(av));
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    double m = kNegInf;
    for (Eigen::Index c = 0; c < av.cols(); ++c)
      if (!allowed || (*allowed)[static_cast<size_t>(c)]) m = std::max(m, av(r, c));
    double s = 0.0;
    for (Eigen::Index c = 0; c < av.cols(); ++c)
      if (!allowed || (*allowed)[static_cast<size_t>(c)]) s += std::exp(av(r, c) - m);
    const double lse = m + std::log(s);
    for (Eigen::Index c = 0; c < av.cols(); ++c)
      out(r, c) = (!allowed || (*allowed)[static_cast<size_t>(c)]) ? av(r, c) - lse : kNegInf;
  }
  const int ia = a.id();
  const int self = static_cast<int>(t.node_count());
  std::vector<bool> mask = allowed ? *allowed : std::vector<bool>();
  return t.push(std::move(out), {a}, [ia, self, mask](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix gi = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double gsum = 0.0;
      for (Eigen::Index c = 0; c < y.cols(); ++c)
        if (mask.empty() || mask[static_cast<size_t>(c)]) gsum += g(r, c);
      for (Eigen::Index c = 0; c < y.cols(); ++c)
        if (mask.empty() || mask[static_cast<size_t>(c)]) gi(r, c) = g(r, c) - std::exp(y(r, c)) * gsum;
    }
    tp.accumulate(ia, gi);
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  Tape& t = *table.tape();
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows())
      fail(ErrorCode::Contract, "gather_rows: index " + std::to_string(ids[r]) + " outside " +
                                    shape_string(tv));
    out.row(static_cast<Eigen::Index>(r)) = tv.row(ids[r]);
  }
  const int it = table.id();
  std::vector<int> rows(ids.begin(), ids.end());
  return t.push(std::move(out), {table}, [it, rows](Tape& tp, const Matrix& g) {
    tp.accumulate_rows(it, rows, g);
  });
}

Var pick(Var a, std::span<const int> cols) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(cols.size()) != av.rows())
    fail(ErrorCode::Shape, "pick: " + std::to_string(cols.size()) + " indices for " + shape_string(av));
  Matrix out(av.rows(), 1);
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const int c = cols[static_cast<size_t>(r)];
    if (c < 0 || c >= av.cols()) fail(ErrorCode::Contract, "pick: column out of range");
    out(r, 0) = av(r, c);
  }
  const int ia = a.id();
  std::vector<int> picked(cols.begin(), cols.end());
  return t.push(std::move(out), {a}, [ia, picked](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(ia);
    Matrix gi = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) gi(r, picked[static_cast<size_t>(r)]) = g(r, 0);
    tp.accumulate(ia, gi);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::Contract, "concat_cols: no operands");
  Tape& t = *parts[0].tape();
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      fail(ErrorCode::Shape, "concat_cols: shape mismatch " + shape_string(parts[0].value()) +
                                 " vs " + shape_string(p.value()));
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return t.push(std::move(out), parts, [ids, offsets](Tape& tp, const Matrix& g) {
    for (size_t i = 0; i < ids.size(); ++i)
      if (tp.needs_grad(ids[i]))
        tp.accumulate(ids[i], g.middleCols(offsets[i], tp.value(ids[i]).cols()));
  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols())
    fail(ErrorCode::Shape, "slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                               ") outside " + shape_string(av));
  Matrix out = av.middleCols(begin, count);
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia, begin, count](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(ia);
    Matrix gi = Matrix::Zero(v.rows(), v.cols());
    gi.middleCols(begin, count) = g;
    tp.accumulate(ia, gi);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(ia);
    tp.accumulate(ia, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) fail(ErrorCode::Shape, "mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var row_blend(std::span<const double> mask, Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("row_blend", a.value(), b.value());
  if (static_cast<Eigen::Index>(mask.size()) != a.rows())
    fail(ErrorCode::Shape, "row_blend: mask length " + std::to_string(mask.size()) + " for " +
                               shape_string(a.value()));
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    out.row(r) = mask[static_cast<size_t>(r)] != 0.0 ? a.value().row(r) : b.value().row(r);
  const int ia = a.id(), ib = b.id();
  std::vector<double> m(mask.begin(), mask.end());
  return t.push(std::move(out), {a, b}, [ia, ib, m](Tape& tp, const Matrix& g) {
    Matrix ga = g, gb = g;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (m[static_cast<size_t>(r)] != 0.0) gb.row(r).setZero();
      else ga.row(r).setZero();
    }
    tp.accumulate(ia, ga);
    tp.accumulate(ib, gb);
  });
}

Var row_scale(Var a, std::span<const double> s) {
  Tape& t = *a.tape();
  if (static_cast<Eigen::Index>(s.size()) != a.rows())
    fail(ErrorCode::Shape, "row_scale: " + std::to_string(s.size()) + " factors for " +
                               shape_string(a.value()));
  Eigen::Map<const Eigen::VectorXd> f(s.data(), static_cast<Eigen::Index>(s.size()));
  Matrix out = f.asDiagonal() * a.value();
  const int ia = a.id();
  std::vector<double> factors(s.begin(), s.end());
  return t.push(std::move(out), {a}, [ia, factors](Tape& tp, const Matrix& g) {
    Eigen::Map<const Eigen::VectorXd> fv(factors.data(), static_cast<Eigen::Index>(factors.size()));
    tp.accumulate(ia, fv.asDiagonal() * g);
  });
}

Var power_normalize_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  const double dim = static_cast<double>(av.cols());
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const double energy = av.row(r).squaredNorm();
    if (!(energy > 0.0) || !std::isfinite(energy))
      fail(ErrorCode::Degenerate, "power_normalize_rows: row " + std::to_string(r) +
                                      " has zero or non-finite energy");
    out.row(r) = av.row(r) * std::sqrt(dim / energy);
  }
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia, dim](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value(ia);
    Matrix gi(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double energy = x.row(r).squaredNorm();
      const double s = std::sqrt(dim / energy);
      const double proj = x.row(r).dot(g.row(r)) / energy;
      gi.row(r) = s * (g.row(r) - proj * x.row(r));
    }
    tp.accumulate(ia, gi);
  });
}

Var repeat_rows(Var a, Eigen::Index k) {
  Tape& t = *a.tape();
  if (k < 1) fail(ErrorCode::Contract, "repeat_rows: k must be >= 1");
  const Matrix& av = a.value();
  Matrix out(av.rows() * k, av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r)
    for (Eigen::Index j = 0; j < k; ++j) out.row(r * k + j) = av.row(r);
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia, k](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(ia);
    Matrix gi = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index j = 0; j < k; ++j) gi.row(r) += g.row(r * k + j);
    tp.accumulate(ia, gi);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (rows < 0 || cols < 0 || rows * cols != av.size())
    fail(ErrorCode::Shape, "reshape: " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) +
                               " cannot become " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out = Eigen::Map<const Matrix>(av.data(), rows, cols);
  const int ia = a.id();
  const Eigen::Index r0 = av.rows(), c0 = av.cols();
  return t.push(std::move(out), {a}, [ia, r0, c0](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

}  // namespace ad
}  // namespace semrl
