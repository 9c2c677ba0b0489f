#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "depthpose/common.hpp"

namespace depthpose {

inline int64_t checked_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (size_t i = 0; i < shape.size(); ++i) {
    check(shape[i] > 0, strf("tensor dimension %zu must be positive, got %d",
                             i, shape[i]));
    n *= shape[i];
  }
  return n;
}

// Dense row-major array. Rank-3 tensors are laid out [C,H,W] and rank-4
// convolution weights [Cout,Cin,k,k].
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(size_t(checked_numel(shape)), fill);
  }
  TensorT(std::vector<int> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    check(int64_t(data.size()) == checked_numel(shape),
          strf("tensor data size %zu does not match shape product %lld",
               data.size(), (long long)checked_numel(shape)));
  }

  bool empty() const { return data.empty(); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape.at(size_t(i)); }
  int64_t numel() const { return int64_t(data.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  // [C,H,W] accessors.
  T& at(int c, int y, int x) {
    return data[size_t((int64_t(c) * shape[1] + y) * shape[2] + x)];
  }
  const T& at(int c, int y, int x) const {
    return data[size_t((int64_t(c) * shape[1] + y) * shape[2] + x)];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

template <typename T>
inline std::string shape_str(const TensorT<T>& t) {
  std::string s = "(";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[size_t(i)]);
  }
  return s + ")";
}

using Tensor = TensorT<float>;

}  // namespace depthpose
