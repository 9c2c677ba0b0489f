#pragma once

#include <cmath>
#include <vector>

#include "depthpose/rng.hpp"
#include "depthpose/tensor.hpp"

namespace depthpose {

// Semi-orthogonal (rows, cols) matrix: W W^T = I when rows <= cols, otherwise
// W^T W = I. Gaussian fill followed by modified Gram-Schmidt in double
// precision; deterministic per seed.
template <typename T = float>
TensorT<T> orthogonal_init(int rows, int cols, uint64_t seed) {
  check(rows >= 1 && cols >= 1, "orthogonal_init: rows and cols must be >= 1");
  const bool transpose = rows > cols;
  const int m = transpose ? cols : rows;  // number of vectors
  const int n = transpose ? rows : cols;  // vector length
  Rng rng(seed);
  std::vector<std::vector<double>> v(size_t(m), std::vector<double>(size_t(n)));
  for (int attempt = 0;; ++attempt) {
    for (auto& row : v)
      for (double& x : row) x = rng.normal();
    bool ok = true;
    for (int i = 0; i < m && ok; ++i) {
      for (int j = 0; j < i; ++j) {
        double dot = 0.0;
        for (int t = 0; t < n; ++t) dot += v[size_t(i)][size_t(t)] * v[size_t(j)][size_t(t)];
        for (int t = 0; t < n; ++t) v[size_t(i)][size_t(t)] -= dot * v[size_t(j)][size_t(t)];
      }
      double norm = 0.0;
      for (int t = 0; t < n; ++t) norm += v[size_t(i)][size_t(t)] * v[size_t(i)][size_t(t)];
      norm = std::sqrt(norm);
      if (norm < 1e-8) {
        ok = false;  // degenerate draw, start over with fresh samples
        break;
      }
      for (int t = 0; t < n; ++t) v[size_t(i)][size_t(t)] /= norm;
    }
    if (ok) break;
    check(attempt < 16, "orthogonal_init: repeated degenerate draws");
  }
  TensorT<T> out({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.data[size_t(int64_t(r) * cols + c)] =
          T(transpose ? v[size_t(c)][size_t(r)] : v[size_t(r)][size_t(c)]);
  return out;
}

// Convolution weights are initialized by flattening to (Cout, Cin*k*k).
template <typename T = float>
TensorT<T> orthogonal_conv_init(int cout, int cin, int k, uint64_t seed) {
  TensorT<T> flat = orthogonal_init<T>(cout, cin * k * k, seed);
  return TensorT<T>({cout, cin, k, k}, std::move(flat.data));
}

}  // namespace depthpose
