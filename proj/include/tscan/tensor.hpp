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

// Dense row-major f64 tensors and the forward kernels shared by the
// autodiff tape and by plain inference code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tscan {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  // Extent of an axis; negative values count from the end.
  std::size_t dim(int axis) const { return shape_.at(normalize_axis(axis)); }

  std::size_t normalize_axis(int axis) const {
    const int r = static_cast<int>(shape_.size());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                       shape_str(shape_));
    }
    return static_cast<std::size_t>(a);
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  // Bit-exact equality of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.shape_ != b.shape_) return false;
    return std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), [](double x, double y) {
      return std::memcmp(&x, &y, sizeof(double)) == 0;
    });
  }

 private:
  static std::size_t checked_numel(const Shape& shape) {
    for (std::size_t e : shape) {
      if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
    }
    return shape_numel(shape);
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace kernels {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor map(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F&& f) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(x[i], y[i]);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
inline Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double x) { return x * s; });
}

inline void add_into(Tensor& acc, const Tensor& x) {
  require_same_shape(acc, x, "accumulate");
  auto a = acc.data();
  auto v = x.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += v[i];
}

// Batched matrix product over identical leading dimensions.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || a.rank() != b.rank()) {
    throw ShapeError("matmul: incompatible ranks " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t r = a.rank();
  const std::size_t m = a.shape()[r - 2], k = a.shape()[r - 1];
  const std::size_t k2 = b.shape()[r - 2], p = b.shape()[r - 1];
  if (k != k2 || !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  const std::size_t batch = shape_numel(out_shape);
  out_shape.push_back(m);
  out_shape.push_back(p);
  Tensor out(out_shape);
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* Ab = A + bi * m * k;
    const double* Bb = B + bi * k * p;
    double* Cb = C + bi * m * p;
    for (std::size_t i = 0; i < m; ++i) {
      double* __restrict crow = Cb + i * p;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = Ab[i * k + kk];
        if (aik == 0.0) continue;
        const double* __restrict brow = Bb + kk * p;
        for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

// Swaps the last two axes.
inline Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose: rank < 2 for shape " + shape_str(x.shape()));
  const std::size_t r = x.rank();
  const std::size_t m = x.shape()[r - 2], n = x.shape()[r - 1];
  Shape s = x.shape();
  std::swap(s[r - 2], s[r - 1]);
  Tensor out(s);
  const std::size_t batch = x.size() / (m * n);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) o[off + j * m + i] = in[off + i * n + j];
  }
  return out;
}

inline Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = x.normalize_axis(axis);
  const AxisSplit s = split_at(x.shape(), ax);
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t a = 0; a < s.outer; ++a) {
    for (std::size_t c = 0; c < s.inner; ++c) {
      const std::size_t base = a * s.extent * s.inner + c;
      double mx = in[base];
      for (std::size_t i = 1; i < s.extent; ++i) mx = std::max(mx, in[base + i * s.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.extent; ++i) {
        const double e = std::exp(in[base + i * s.inner] - mx);
        o[base + i * s.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.extent; ++i) o[base + i * s.inner] /= total;
    }
  }
  return out;
}

// Mean over one axis; the axis is removed from the result shape.
inline Tensor mean(const Tensor& x, int axis) {
  const std::size_t ax = x.normalize_axis(axis);
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  Tensor out(out_shape);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t a = 0; a < s.outer; ++a)
    for (std::size_t i = 0; i < s.extent; ++i)
      for (std::size_t c = 0; c < s.inner; ++c)
        o[a * s.inner + c] += in[(a * s.extent + i) * s.inner + c];
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (double& v : o) v *= inv;
  return out;
}

inline Tensor concat(std::span<const Tensor* const> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = *parts[0];
  const std::size_t ax = first.normalize_axis(axis);
  Shape out_shape = first.shape();
  out_shape[ax] = 0;
  for (const Tensor* p : parts) {
    Shape probe = p->shape();
    if (probe.size() != first.rank()) {
      throw ShapeError("concat: rank mismatch " + shape_str(first.shape()) + " vs " +
                       shape_str(probe));
    }
    out_shape[ax] += probe[ax];
    probe[ax] = first.shape()[ax];
    if (probe != first.shape()) {
      throw ShapeError("concat: shape mismatch " + shape_str(first.shape()) + " vs " +
                       shape_str(p->shape()));
    }
  }
  Tensor out(out_shape);
  const AxisSplit so = split_at(out_shape, ax);
  auto o = out.data();
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    const AxisSplit sp = split_at(p->shape(), ax);
    auto in = p->data();
    const std::size_t chunk = sp.extent * sp.inner;
    for (std::size_t a = 0; a < sp.outer; ++a) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(a * chunk), chunk,
                  o.begin() + static_cast<std::ptrdiff_t>(a * so.extent * so.inner + offset));
    }
    offset += chunk;
  }
  return out;
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat(std::span<const Tensor* const>(ptrs), axis);
}

// Half-open slice [begin, end) along one axis.
inline Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = x.normalize_axis(axis);
  if (begin >= end || end > x.shape()[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis " + std::to_string(ax) + " of shape " +
                     shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  Tensor out(out_shape);
  auto in = x.data();
  auto o = out.data();
  const std::size_t chunk = (end - begin) * s.inner;
  for (std::size_t a = 0; a < s.outer; ++a) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((a * s.extent + begin) * s.inner), chunk,
                o.begin() + static_cast<std::ptrdiff_t>(a * chunk));
  }
  return out;
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return Tensor(std::move(shape), x.values());
}

}  // namespace kernels
}  // namespace tscan
