#pragma once

#include <algorithm>
#include <cmath>

#include "depthpose/tensor.hpp"

namespace depthpose {

// Catmull-Rom cubic kernel (a = -0.5).
inline double bicubic_weight(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  int idx[4];
  double w[4];
};

// Half-pixel-center mapping with edge clamping.
inline CubicTaps cubic_taps(int out_i, int in_size, int out_size) {
  const double src = (out_i + 0.5) * double(in_size) / double(out_size) - 0.5;
  const int base = int(std::floor(src));
  CubicTaps taps;
  for (int t = 0; t < 4; ++t) {
    const int i = base - 1 + t;
    taps.idx[t] = std::clamp(i, 0, in_size - 1);
    taps.w[t] = bicubic_weight(src - double(i));
  }
  return taps;
}

}  // namespace detail

// Separable bicubic resize of a [C,H,W] tensor. Data-pipeline utility, not
// part of the differentiable graph.
template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& img, int out_h, int out_w) {
  check(img.rank() == 3, "bicubic_resize: input must be rank 3");
  check(out_h >= 1 && out_w >= 1, "bicubic_resize: output size must be >= 1");
  const int c = img.shape[0], h = img.shape[1], w = img.shape[2];

  std::vector<detail::CubicTaps> col_taps(size_t(out_w));
  for (int x = 0; x < out_w; ++x) col_taps[size_t(x)] = detail::cubic_taps(x, w, out_w);
  std::vector<detail::CubicTaps> row_taps(size_t(out_h));
  for (int y = 0; y < out_h; ++y) row_taps[size_t(y)] = detail::cubic_taps(y, h, out_h);

  // Horizontal pass, then vertical pass, accumulating in double.
  TensorT<T> out({c, out_h, out_w});
  std::vector<double> tmp(size_t(int64_t(h) * out_w));
  for (int ci = 0; ci < c; ++ci) {
    const T* src = img.ptr() + int64_t(ci) * h * w;
    for (int y = 0; y < h; ++y) {
      const T* row = src + int64_t(y) * w;
      double* trow = tmp.data() + int64_t(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const detail::CubicTaps& tp = col_taps[size_t(x)];
        trow[x] = tp.w[0] * double(row[tp.idx[0]]) +
                  tp.w[1] * double(row[tp.idx[1]]) +
                  tp.w[2] * double(row[tp.idx[2]]) +
                  tp.w[3] * double(row[tp.idx[3]]);
      }
    }
    T* dst = out.ptr() + int64_t(ci) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const detail::CubicTaps& tp = row_taps[size_t(y)];
      for (int x = 0; x < out_w; ++x) {
        dst[int64_t(y) * out_w + x] =
            T(tp.w[0] * tmp[size_t(int64_t(tp.idx[0]) * out_w + x)] +
              tp.w[1] * tmp[size_t(int64_t(tp.idx[1]) * out_w + x)] +
              tp.w[2] * tmp[size_t(int64_t(tp.idx[2]) * out_w + x)] +
              tp.w[3] * tmp[size_t(int64_t(tp.idx[3]) * out_w + x)]);
      }
    }
  }
  return out;
}

// Mirrors the width axis of a [C,H,W] tensor.
template <typename T>
TensorT<T> flip_horizontal(const TensorT<T>& x) {
  check(x.rank() == 3, "flip_horizontal: input must be rank 3");
  const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  TensorT<T> out({c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        out.at(ci, y, xx) = x.at(ci, y, w - 1 - xx);
  return out;
}

}  // namespace depthpose
