/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Reverse-mode automatic differentiation over a per-pass tape.
//
// A Tape records every operation of one forward pass as a Node. Nodes are
// appended in evaluation order, so reverse creation order is a valid
// topological order for the backward sweep. A tape is used by one thread at
// a time; independent samples run on independent tapes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tscan/tensor.hpp"

namespace tscan {

class Tape;

using BackwardFn = std::function<void(Tape&, std::size_t self)>;

struct Node {
  Tensor value;
  std::optional<Tensor> grad;
  std::vector<std::size_t> parents;
  BackwardFn backward;
  std::string op;
  bool requires_grad = false;
};

// Lightweight handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(int axis) const { return value().dim(axis); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Named gradients produced by one backward pass.
using Gradients = std::map<std::string, Tensor>;

class ParamStore;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, "const", false); }

  Var leaf(Tensor value) { return push(std::move(value), {}, nullptr, "leaf", true); }

  // Binds a named parameter; repeated binds on one tape return the same node
  // so that gradients from every use accumulate in one place.
  Var param(const ParamStore& store, const std::string& name);

  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, std::string op) {
    bool rg = false;
    for (std::size_t p : parents) rg = rg || nodes_[p].requires_grad;
    return push(std::move(value), std::move(parents), rg ? std::move(fn) : nullptr, std::move(op),
                rg);
  }

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, Tensor g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad) {
      kernels::require_same_shape(n.value, g, "gradient");
      n.grad = std::move(g);
    } else {
      kernels::add_into(*n.grad, g);
    }
  }

  const Tensor& grad_of(std::size_t id) const { return *nodes_[id].grad; }

  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  void backward(Var loss) {
    Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(root.value.shape()));
    }
    accumulate(loss.id(), Tensor(root.value.shape(), 1.0));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad && n.backward) n.backward(*this, i);
    }
  }

  // Gradient of a var after backward; zeros when the var was unreachable.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    return n.grad ? *n.grad : Tensor(n.value.shape(), 0.0);
  }

  // Gradients of every bound parameter, keyed by name.
  Gradients gradients() const {
    Gradients out;
    for (const auto& [name, id] : bound_) out.emplace(name, grad(Var(const_cast<Tape*>(this), id)));
    return out;
  }

  // True iff `input` is reachable from `output` through parent links.
  bool depends_on(Var output, Var input) const {
    if (input.id() > output.id()) return false;
    std::vector<char> seen(output.id() + 1, 0);
    std::vector<std::size_t> stack{output.id()};
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      if (cur == input.id()) return true;
      if (seen[cur]) continue;
      seen[cur] = 1;
      for (std::size_t p : nodes_[cur].parents)
        if (p >= input.id()) stack.push_back(p);
    }
    return false;
  }

  const std::map<std::string, std::size_t>& bound_params() const noexcept { return bound_; }

 private:
  Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, std::string op, bool rg) {
    nodes_.push_back(Node{std::move(value), std::nullopt, std::move(parents), std::move(fn),
                          std::move(op), rg});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> bound_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Differentiable operations.
// ---------------------------------------------------------------------------

namespace ad {

inline Var matmul(Var a, Var b) {
  Tape& t = a.tape();
  return t.record(kernels::matmul(a.value(), b.value()), {a.id(), b.id()},
                  [a = a.id(), b = b.id()](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad_of(self);
                    if (t.needs_grad(a))
                      t.accumulate(a, kernels::matmul(g, kernels::transpose(t.value(b))));
                    if (t.needs_grad(b))
                      t.accumulate(b, kernels::matmul(kernels::transpose(t.value(a)), g));
                  },
                  "matmul");
}

inline Var add(Var a, Var b) {
  Tape& t = a.tape();
  return t.record(kernels::add(a.value(), b.value()), {a.id(), b.id()},
                  [a = a.id(), b = b.id()](Tape& t, std::size_t self) {
                    t.accumulate(a, t.grad_of(self));
                    t.accumulate(b, t.grad_of(self));
                  },
                  "add");
}

inline Var sub(Var a, Var b) {
  Tape& t = a.tape();
  return t.record(kernels::zip(a.value(), b.value(), "sub", std::minus<>()), {a.id(), b.id()},
                  [a = a.id(), b = b.id()](Tape& t, std::size_t self) {
                    t.accumulate(a, t.grad_of(self));
                    t.accumulate(b, kernels::scale(t.grad_of(self), -1.0));
                  },
                  "sub");
}

inline Var mul(Var a, Var b) {
  Tape& t = a.tape();
  return t.record(kernels::mul(a.value(), b.value()), {a.id(), b.id()},
                  [a = a.id(), b = b.id()](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad_of(self);
                    if (t.needs_grad(a)) t.accumulate(a, kernels::mul(g, t.value(b)));
                    if (t.needs_grad(b)) t.accumulate(b, kernels::mul(g, t.value(a)));
                  },
                  "mul");
}

inline Var scale(Var a, double s) {
  Tape& t = a.tape();
  return t.record(kernels::scale(a.value(), s), {a.id()},
                  [a = a.id(), s](Tape& t, std::size_t self) {
                    t.accumulate(a, kernels::scale(t.grad_of(self), s));
                  },
                  "scale");
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

namespace detail {
inline void require_row(const Tensor& x, const Tensor& row, const char* op) {
  if (row.rank() != 1 || x.rank() < 1 || x.shape().back() != row.shape()[0]) {
    throw ShapeError(std::string(op) + ": row vector " + shape_str(row.shape()) +
                     " does not match trailing axis of " + shape_str(x.shape()));
  }
}
}  // namespace detail

// x + b where b is a vector matching x's last axis (a bias row).
inline Var add_row(Var x, Var b) {
  detail::require_row(x.value(), b.value(), "add_row");
  Tensor out = x.value();
  const std::size_t p = b.value().size();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i % p];
  Tape& t = x.tape();
  return t.record(std::move(out), {x.id(), b.id()},
                  [x = x.id(), b = b.id(), p](Tape& t, std::size_t self) {
                    const Tensor& g = t.grad_of(self);
                    t.accumulate(x, g);
                    if (t.needs_grad(b)) {
                      Tensor gb({p}, 0.0);
                      auto gv = g.data();
                      for (std::size_t i = 0; i < gv.size(); ++i) gb[i % p] += gv[i];
                      t.accumulate(b, std::move(gb));
                    }
                  },
                  "add_row");
}

// x * g where g is a vector matching x's last axis (a gain row).
inline Var mul_row(Var x, Var g) {
  detail::require_row(x.value(), g.value(), "mul_row");
  Tensor out = x.value();
  const std::size_t p = g.value().size();
  auto o = out.data();
  auto gv = g.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= gv[i % p];
  Tape& t = x.tape();
  return t.record(std::move(out), {x.id(), g.id()},
                  [x = x.id(), gid = g.id(), p](Tape& t, std::size_t self) {
                    const Tensor& up = t.grad_of(self);
                    const Tensor& xv = t.value(x);
                    const Tensor& gain = t.value(gid);
                    auto u = up.data();
                    if (t.needs_grad(x)) {
                      Tensor gx(xv.shape());
                      auto o = gx.data();
                      for (std::size_t i = 0; i < o.size(); ++i) o[i] = u[i] * gain[i % p];
                      t.accumulate(x, std::move(gx));
                    }
                    if (t.needs_grad(gid)) {
                      Tensor gg({p}, 0.0);
                      auto xs = xv.data();
                      for (std::size_t i = 0; i < u.size(); ++i) gg[i % p] += u[i] * xs[i];
                      t.accumulate(gid, std::move(gg));
                    }
                  },
                  "mul_row");
}

inline Var relu(Var x) {
  Tape& t = x.tape();
  return t.record(kernels::map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {x.id()},
                  [x = x.id()](Tape& t, std::size_t self) {
                    t.accumulate(x, kernels::zip(t.grad_of(self), t.value(x), "relu",
                                                 [](double g, double v) { return v > 0.0 ? g : 0.0; }));
                  },
                  "relu");
}

inline Var sigmoid(Var x) {
  Tape& t = x.tape();
  Tensor y = kernels::map(x.value(), [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return t.record(std::move(y), {x.id()},
                  [x = x.id()](Tape& t, std::size_t self) {
                    t.accumulate(x, kernels::zip(t.grad_of(self), t.value(self), "sigmoid",
                                                 [](double g, double s) { return g * s * (1.0 - s); }));
                  },
                  "sigmoid");
}

inline Var transpose(Var x) {
  Tape& t = x.tape();
  return t.record(kernels::transpose(x.value()), {x.id()},
                  [x = x.id()](Tape& t, std::size_t self) {
                    t.accumulate(x, kernels::transpose(t.grad_of(self)));
                  },
                  "transpose");
}

inline Var reshape(Var x, Shape shape) {
  Tape& t = x.tape();
  return t.record(kernels::reshape(x.value(), std::move(shape)), {x.id()},
                  [x = x.id()](Tape& t, std::size_t self) {
                    t.accumulate(x, kernels::reshape(t.grad_of(self), t.value(x).shape()));
                  },
                  "reshape");
}

inline Var slice(Var x, int axis, std::size_t begin, std::size_t end) {
  Tape& t = x.tape();
  const std::size_t ax = x.value().normalize_axis(axis);
  return t.record(kernels::slice(x.value(), axis, begin, end), {x.id()},
                  [x = x.id(), ax, begin](Tape& t, std::size_t self) {
                    if (!t.needs_grad(x)) return;
                    const Tensor& g = t.grad_of(self);
                    const Tensor& xv = t.value(x);
                    Tensor gx(xv.shape(), 0.0);
                    const auto sx = kernels::split_at(xv.shape(), ax);
                    const auto sg = kernels::split_at(g.shape(), ax);
                    auto gin = g.data();
                    auto out = gx.data();
                    const std::size_t chunk = sg.extent * sg.inner;
                    for (std::size_t a = 0; a < sg.outer; ++a) {
                      std::copy_n(gin.begin() + static_cast<std::ptrdiff_t>(a * chunk), chunk,
                                  out.begin() + static_cast<std::ptrdiff_t>(
                                                    (a * sx.extent + begin) * sx.inner));
                    }
                    t.accumulate(x, std::move(gx));
                  },
                  "slice");
}

inline Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = parts[0].tape();
  std::vector<const Tensor*> values;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    values.push_back(&p.value());
    ids.push_back(p.id());
  }
  Tensor out = kernels::concat(std::span<const Tensor* const>(values), axis);
  const std::size_t ax = out.normalize_axis(axis);
  return t.record(std::move(out), ids,
                  [ids, ax](Tape& t, std::size_t self) {
                    std::size_t offset = 0;
                    for (std::size_t id : ids) {
                      const std::size_t ext = t.value(id).shape()[ax];
                      if (t.needs_grad(id))
                        t.accumulate(id, kernels::slice(t.grad_of(self), static_cast<int>(ax),
                                                        offset, offset + ext));
                      offset += ext;
                    }
                  },
                  "concat");
}

inline Var concat(std::initializer_list<Var> parts, int axis) {
  std::vector<Var> v(parts);
  return concat(std::span<const Var>(v), axis);
}

inline Var mean(Var x, int axis) {
  Tape& t = x.tape();
  const std::size_t ax = x.value().normalize_axis(axis);
  return t.record(kernels::mean(x.value(), axis), {x.id()},
                  [x = x.id(), ax](Tape& t, std::size_t self) {
                    const Tensor& xv = t.value(x);
                    const auto s = kernels::split_at(xv.shape(), ax);
                    const double inv = 1.0 / static_cast<double>(s.extent);
                    auto g = t.grad_of(self).data();
                    Tensor gx(xv.shape());
                    auto o = gx.data();
                    for (std::size_t a = 0; a < s.outer; ++a)
                      for (std::size_t i = 0; i < s.extent; ++i)
                        for (std::size_t c = 0; c < s.inner; ++c)
                          o[(a * s.extent + i) * s.inner + c] = g[a * s.inner + c] * inv;
                    t.accumulate(x, std::move(gx));
                  },
                  "mean");
}

inline Var sum(Var x) {
  Tape& t = x.tape();
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return t.record(Tensor::scalar(total), {x.id()},
                  [x = x.id()](Tape& t, std::size_t self) {
                    t.accumulate(x, Tensor(t.value(x).shape(), t.grad_of(self).item()));
                  },
                  "sum");
}

inline Var softmax(Var x, int axis) {
  Tape& t = x.tape();
  const std::size_t ax = x.value().normalize_axis(axis);
  return t.record(kernels::softmax(x.value(), axis), {x.id()},
                  [x = x.id(), ax](Tape& t, std::size_t self) {
                    const Tensor& y = t.value(self);
                    const auto s = kernels::split_at(y.shape(), ax);
                    auto g = t.grad_of(self).data();
                    auto yv = y.data();
                    Tensor gx(y.shape());
                    auto o = gx.data();
                    for (std::size_t a = 0; a < s.outer; ++a) {
                      for (std::size_t c = 0; c < s.inner; ++c) {
                        const std::size_t base = a * s.extent * s.inner + c;
                        double dot = 0.0;
                        for (std::size_t i = 0; i < s.extent; ++i)
                          dot += g[base + i * s.inner] * yv[base + i * s.inner];
                        for (std::size_t i = 0; i < s.extent; ++i) {
                          const std::size_t k = base + i * s.inner;
                          o[k] = yv[k] * (g[k] - dot);
                        }
                      }
                    }
                    t.accumulate(x, std::move(gx));
                  },
                  "softmax");
}

// Normalizes each slice along the last axis to zero mean and unit variance.
// The affine part is applied separately with mul_row/add_row.
inline Var layer_norm(Var x, double eps = 1e-5) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.shape().back();
  const std::size_t rows = xv.size() / n;
  Tensor y(xv.shape());
  std::vector<double> inv_std(rows);
  auto in = xv.data();
  auto o = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += in[r * n + i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dlt = in[r * n + i] - mu;
      var += dlt * dlt;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) o[r * n + i] = (in[r * n + i] - mu) * inv_std[r];
  }
  Tape& t = x.tape();
  return t.record(std::move(y), {x.id()},
                  [x = x.id(), n, rows, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                    auto g = t.grad_of(self).data();
                    auto yv = t.value(self).data();
                    Tensor gx(t.value(self).shape());
                    auto o = gx.data();
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mg = 0.0, mgy = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        mg += g[r * n + i];
                        mgy += g[r * n + i] * yv[r * n + i];
                      }
                      mg *= inv_n;
                      mgy *= inv_n;
                      for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t k = r * n + i;
                        o[k] = inv_std[r] * (g[k] - mg - yv[k] * mgy);
                      }
                    }
                    t.accumulate(x, std::move(gx));
                  },
                  "layer_norm");
}

// Elementwise maximum; ties route the gradient to `a`.
inline Var maximum(Var a, Var b) {
  Tape& t = a.tape();
  return t.record(kernels::zip(a.value(), b.value(), "maximum",
                               [](double x, double y) { return x >= y ? x : y; }),
                  {a.id(), b.id()},
                  [a = a.id(), b = b.id()](Tape& t, std::size_t self) {
                    auto g = t.grad_of(self).data();
                    auto av = t.value(a).data();
                    auto bv = t.value(b).data();
                    Tensor ga(t.value(a).shape(), 0.0), gb(t.value(b).shape(), 0.0);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (av[i] >= bv[i]) ga[i] = g[i];
                      else gb[i] = g[i];
                    }
                    t.accumulate(a, std::move(ga));
                    t.accumulate(b, std::move(gb));
                  },
                  "maximum");
}

// Divides each slice along the last axis by its sum (entries must be positive).
inline Var renormalize(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.shape().back();
  const std::size_t rows = xv.size() / n;
  Tensor y(xv.shape());
  std::vector<double> totals(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) totals[r] += xv[r * n + i];
    for (std::size_t i = 0; i < n; ++i) y[r * n + i] = xv[r * n + i] / totals[r];
  }
  Tape& t = x.tape();
  return t.record(std::move(y), {x.id()},
                  [x = x.id(), n, rows, totals = std::move(totals)](Tape& t, std::size_t self) {
                    auto g = t.grad_of(self).data();
                    auto yv = t.value(self).data();
                    Tensor gx(t.value(self).shape());
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * yv[r * n + i];
                      for (std::size_t i = 0; i < n; ++i)
                        gx[r * n + i] = (g[r * n + i] - dot) / totals[r];
                    }
                    t.accumulate(x, std::move(gx));
                  },
                  "renormalize");
}

// Inverted dropout: kept entries are scaled by 1/(1-rate).
inline Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.value().shape());
  for (double& m : mask.data()) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  Tensor y = kernels::mul(x.value(), mask);
  Tape& t = x.tape();
  return t.record(std::move(y), {x.id()},
                  [x = x.id(), mask = std::move(mask)](Tape& t, std::size_t self) {
                    t.accumulate(x, kernels::mul(t.grad_of(self), mask));
                  },
                  "dropout");
}

inline constexpr double kProbClamp = 1e-12;
inline constexpr double kProbTolerance = 1e-9;

namespace detail {
inline double checked_prob(double p) {
  if (!(p >= -kProbTolerance && p <= 1.0 + kProbTolerance)) {
    throw std::domain_error("probability " + std::to_string(p) +
                            " outside [0, 1]; the prediction head is malformed");
  }
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}
}  // namespace detail

// Mean weighted binary cross-entropy over all entries of p against targets y.
// Positive targets are weighted by pos_weight.
inline Var binary_cross_entropy(Var p, const Tensor& y, double pos_weight = 1.0) {
  kernels::require_same_shape(p.value(), y, "binary_cross_entropy");
  const std::size_t n = y.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = detail::checked_prob(p.value()[i]);
    total -= pos_weight * y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  Tape& t = p.tape();
  return t.record(Tensor::scalar(total / static_cast<double>(n)), {p.id()},
                  [p = p.id(), y, pos_weight, n](Tape& t, std::size_t self) {
                    const double up = t.grad_of(self).item() / static_cast<double>(n);
                    const Tensor& pv = t.value(p);
                    Tensor g(pv.shape());
                    for (std::size_t i = 0; i < n; ++i) {
                      const double pc = std::clamp(pv[i], kProbClamp, 1.0 - kProbClamp);
                      g[i] = up * (-pos_weight * y[i] / pc + (1.0 - y[i]) / (1.0 - pc));
                    }
                    t.accumulate(p, std::move(g));
                  },
                  "binary_cross_entropy");
}

// Mean over rows of -sum_c y[r,c] log p[r,c].
inline Var categorical_cross_entropy(Var p, const Tensor& y) {
  kernels::require_same_shape(p.value(), y, "categorical_cross_entropy");
  const std::size_t c = y.shape().back();
  const std::size_t rows = y.size() / c;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pc = detail::checked_prob(p.value()[i]);
    if (y[i] != 0.0) total -= y[i] * std::log(pc);
  }
  Tape& t = p.tape();
  return t.record(Tensor::scalar(total / static_cast<double>(rows)), {p.id()},
                  [p = p.id(), y, rows](Tape& t, std::size_t self) {
                    const double up = t.grad_of(self).item() / static_cast<double>(rows);
                    const Tensor& pv = t.value(p);
                    Tensor g(pv.shape(), 0.0);
                    for (std::size_t i = 0; i < y.size(); ++i) {
                      if (y[i] != 0.0)
                        g[i] = -up * y[i] / std::clamp(pv[i], kProbClamp, 1.0 - kProbClamp);
                    }
                    t.accumulate(p, std::move(g));
                  },
                  "categorical_cross_entropy");
}

}  // namespace ad
}  // namespace tscan
