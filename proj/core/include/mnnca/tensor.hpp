// SPDX-License-Identifier: Apache-2.0
//
// Batched multi-channel 2-D grids: the state arrays everything else runs on.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnnca {

// (batch, channels, height, width), row-major with width contiguous.
struct Shape {
  int b = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t numel() const {
    return std::int64_t(b) * c * h * w;
  }
  std::int64_t pixels() const { return std::int64_t(h) * w; }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

inline Shape scalar_shape() { return Shape{1, 1, 1, 1}; }

template <class T>
struct Tensor {
  Shape shape{};
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.numel(), fill) {
    if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw std::invalid_argument("Tensor: negative dimension in " + s.str());
    }
  }

  static Tensor from(Shape s, std::vector<T> values) {
    Tensor t;
    t.shape = s;
    t.data = std::move(values);
    if (std::int64_t(t.data.size()) != s.numel()) {
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(t.data.size()) +
                                  " does not match shape " + s.str());
    }
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t(scalar_shape());
    t.data[0] = v;
    return t;
  }

  std::int64_t numel() const { return shape.numel(); }
  bool is_scalar() const { return shape == scalar_shape(); }

  std::int64_t index(int b, int c, int y, int x) const {
    return ((std::int64_t(b) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  T& at(int b, int c, int y, int x) { return data[index(b, c, y, x)]; }
  const T& at(int b, int c, int y, int x) const { return data[index(b, c, y, x)]; }

  // Start of the contiguous (h*w) plane for one (batch, channel) pair.
  T* plane(int b, int c) { return data.data() + index(b, c, 0, 0); }
  const T* plane(int b, int c) const { return data.data() + index(b, c, 0, 0); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(double(v))) return false;
    }
    return true;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class T>
Tensor<T> operator-(const Tensor<T>& t) {
  Tensor<T> out = t;
  for (T& v : out.data) v = -v;
  return out;
}

}  // namespace mnnca
