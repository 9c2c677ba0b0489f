#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "depthpose/tensor.hpp"

namespace depthpose {

// C[M,N] += A[M,K] * B[K,N]. Blocked so the active B tile stays cache
// resident; the inner loop is a single fma stream the compiler vectorizes.
template <typename T>
void gemm_acc(int M, int K, int N, const T* A, const T* B, T* C) {
  constexpr int NB = 1024;
  constexpr int KB = 128;
  for (int n0 = 0; n0 < N; n0 += NB) {
    const int n1 = std::min(n0 + NB, N);
    for (int k0 = 0; k0 < K; k0 += KB) {
      const int k1 = std::min(k0 + KB, K);
      for (int m = 0; m < M; ++m) {
        T* c = C + int64_t(m) * N;
        const T* a = A + int64_t(m) * K;
        for (int k = k0; k < k1; ++k) {
          const T av = a[k];
          if (av == T(0)) continue;
          const T* b = B + int64_t(k) * N;
          for (int n = n0; n < n1; ++n) c[n] += av * b[n];
        }
      }
    }
  }
}

// C[M,K] += A[M,N] * B[K,N]^T (row-by-row dot products).
template <typename T>
void gemm_abt_acc(int M, int K, int N, const T* A, const T* B, T* C) {
  constexpr int NB = 4096;
  for (int n0 = 0; n0 < N; n0 += NB) {
    const int n1 = std::min(n0 + NB, N);
    for (int m = 0; m < M; ++m) {
      const T* a = A + int64_t(m) * N;
      for (int k = 0; k < K; ++k) {
        const T* b = B + int64_t(k) * N;
        T acc = T(0);
        for (int n = n0; n < n1; ++n) acc += a[n] * b[n];
        C[int64_t(m) * K + k] += acc;
      }
    }
  }
}

inline int conv_out_dim(int in, int k, int padding) {
  return in + 2 * padding - k + 1;
}

// Unfolds [Cin,H,W] into [Cin*k*k, Hout*Wout] with zero padding.
template <typename T>
void im2col(const TensorT<T>& x, int k, int padding, std::vector<T>& col,
            int hout, int wout) {
  const int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
  col.assign(size_t(int64_t(cin) * k * k * hout * wout), T(0));
  for (int c = 0; c < cin; ++c) {
    const T* xp = x.ptr() + int64_t(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col.data() +
                 (int64_t(c) * k * k + ky * k + kx) * int64_t(hout) * wout;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy + ky - padding;
          if (iy < 0 || iy >= h) continue;
          const int x_lo = std::max(0, padding - kx);
          const int x_hi = std::min(wout, w + padding - kx);
          const T* src = xp + int64_t(iy) * w + (x_lo + kx - padding);
          T* d = dst + int64_t(oy) * wout + x_lo;
          for (int ox = x_lo; ox < x_hi; ++ox) *d++ = *src++;
        }
      }
    }
  }
}

// Scatter-adds a column buffer back onto the [Cin,H,W] gradient.
template <typename T>
void col2im_acc(const std::vector<T>& col, int cin, int h, int w, int k,
                int padding, int hout, int wout, TensorT<T>& dx) {
  for (int c = 0; c < cin; ++c) {
    T* xp = dx.ptr() + int64_t(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src_base =
            col.data() +
            (int64_t(c) * k * k + ky * k + kx) * int64_t(hout) * wout;
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy + ky - padding;
          if (iy < 0 || iy >= h) continue;
          const int x_lo = std::max(0, padding - kx);
          const int x_hi = std::min(wout, w + padding - kx);
          T* d = xp + int64_t(iy) * w + (x_lo + kx - padding);
          const T* src = src_base + int64_t(oy) * wout + x_lo;
          for (int ox = x_lo; ox < x_hi; ++ox) *d++ += *src++;
        }
      }
    }
  }
}

template <typename T>
void conv2d_check_shapes(const TensorT<T>& x, const TensorT<T>& w,
                         const TensorT<T>& b, int padding) {
  check(x.rank() == 3, strf("conv2d: input must be rank 3, got rank %d",
                            x.rank()));
  check(w.rank() == 4, strf("conv2d: weight must be rank 4, got rank %d",
                            w.rank()));
  check(b.rank() == 1, "conv2d: bias must be rank 1");
  check(w.shape[2] == w.shape[3],
        strf("conv2d: kernel must be square, got %dx%d", w.shape[2],
             w.shape[3]));
  check(w.shape[2] % 2 == 1,
        strf("conv2d: kernel size must be odd, got %d", w.shape[2]));
  check(padding >= 0, "conv2d: padding must be >= 0");
  check(w.shape[1] == x.shape[0],
        strf("conv2d: weight expects %d input channels, input has %d",
             w.shape[1], x.shape[0]));
  check(b.shape[0] == w.shape[0],
        strf("conv2d: bias has %d channels, weight produces %d", b.shape[0],
             w.shape[0]));
  const int hout = conv_out_dim(x.shape[1], w.shape[2], padding);
  const int wout = conv_out_dim(x.shape[2], w.shape[2], padding);
  check(hout > 0 && wout > 0,
        strf("conv2d: output size %dx%d is empty for input %dx%d kernel %d "
             "padding %d",
             hout, wout, x.shape[1], x.shape[2], w.shape[2], padding));
}

// Stride-1 cross correlation: out[c] = b[c] + sum_ci conv(x[ci], w[c][ci]).
template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& x, const TensorT<T>& w,
                      const TensorT<T>& b, int padding) {
  conv2d_check_shapes(x, w, b, padding);
  const int cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const int cout = w.shape[0], k = w.shape[2];
  const int hout = conv_out_dim(h, k, padding);
  const int wout = conv_out_dim(wd, k, padding);
  TensorT<T> out({cout, hout, wout});
  const int64_t hw = int64_t(hout) * wout;
  for (int c = 0; c < cout; ++c)
    std::fill_n(out.ptr() + c * hw, hw, b.data[size_t(c)]);
  if (k == 1 && padding == 0) {
    gemm_acc(cout, cin, int(hw), w.ptr(), x.ptr(), out.ptr());
  } else {
    std::vector<T> col;
    im2col(x, k, padding, col, hout, wout);
    gemm_acc(cout, cin * k * k, int(hw), w.ptr(), col.data(), out.ptr());
  }
  return out;
}

// Accumulates input/weight/bias gradients for conv2d_fwd.
template <typename T>
void conv2d_bwd(const TensorT<T>& x, const TensorT<T>& w, int padding,
                const TensorT<T>& dy, TensorT<T>* dx, TensorT<T>* dw,
                TensorT<T>* db) {
  const int cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const int cout = w.shape[0], k = w.shape[2];
  const int hout = dy.shape[1], wout = dy.shape[2];
  const int64_t hw = int64_t(hout) * wout;
  const int kk = cin * k * k;

  if (db) {
    for (int c = 0; c < cout; ++c) {
      const T* g = dy.ptr() + c * hw;
      T acc = T(0);
      for (int64_t i = 0; i < hw; ++i) acc += g[i];
      db->data[size_t(c)] += acc;
    }
  }

  const bool direct = (k == 1 && padding == 0);
  std::vector<T> col;
  if (!direct) im2col(x, k, padding, col, hout, wout);
  const T* colp = direct ? x.ptr() : col.data();

  if (dw) gemm_abt_acc(cout, kk, int(hw), dy.ptr(), colp, dw->ptr());

  if (dx) {
    // dcol = W^T * dy, then folded back onto dx.
    std::vector<T> wt(size_t(int64_t(kk) * cout));
    for (int c = 0; c < cout; ++c)
      for (int j = 0; j < kk; ++j)
        wt[size_t(int64_t(j) * cout + c)] = w.data[size_t(int64_t(c) * kk + j)];
    if (direct) {
      gemm_acc(kk, cout, int(hw), wt.data(), dy.ptr(), dx->ptr());
    } else {
      std::vector<T> dcol(size_t(int64_t(kk) * hw), T(0));
      gemm_acc(kk, cout, int(hw), wt.data(), dy.ptr(), dcol.data());
      col2im_acc(dcol, cin, h, wd, k, padding, hout, wout, *dx);
    }
  }
}

template <typename T>
TensorT<T> relu_fwd(const TensorT<T>& x) {
  TensorT<T> out;
  out.shape = x.shape;
  out.data.resize(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

// Subgradient at 0 is 0.
template <typename T>
void relu_bwd(const TensorT<T>& x, const TensorT<T>& dy, TensorT<T>& dx) {
  for (size_t i = 0; i < x.data.size(); ++i)
    if (x.data[i] > T(0)) dx.data[i] += dy.data[i];
}

// 2x2 stride-2 max pooling; ties go to the first element in scan order.
template <typename T>
TensorT<T> maxpool2_fwd(const TensorT<T>& x, std::vector<int64_t>* argmax) {
  check(x.rank() == 3, "maxpool2: input must be rank 3");
  const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  check(h % 2 == 0 && w % 2 == 0,
        strf("maxpool2: spatial size %dx%d must be even", h, w));
  TensorT<T> out({c, h / 2, w / 2});
  if (argmax) argmax->resize(size_t(out.numel()));
  int64_t o = 0;
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = x.ptr() + int64_t(ci) * h * w;
    for (int oy = 0; oy < h / 2; ++oy) {
      for (int ox = 0; ox < w / 2; ++ox, ++o) {
        int64_t best = int64_t(2 * oy) * w + 2 * ox;
        T bv = xp[best];
        const int64_t cand[3] = {best + 1, best + w, best + w + 1};
        for (int64_t idx : cand) {
          if (xp[idx] > bv) {
            bv = xp[idx];
            best = idx;
          }
        }
        out.data[size_t(o)] = bv;
        if (argmax) (*argmax)[size_t(o)] = int64_t(ci) * h * w + best;
      }
    }
  }
  return out;
}

template <typename T>
void maxpool2_bwd(const std::vector<int64_t>& argmax, const TensorT<T>& dy,
                  TensorT<T>& dx) {
  for (size_t i = 0; i < argmax.size(); ++i)
    dx.data[size_t(argmax[i])] += dy.data[i];
}

// r x r stride-r mean pooling, used to bring SR taps back to the feature grid.
template <typename T>
TensorT<T> avgpool_fwd(const TensorT<T>& x, int r) {
  check(x.rank() == 3, "avgpool: input must be rank 3");
  const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  check(r >= 1, "avgpool: window must be >= 1");
  check(h % r == 0 && w % r == 0,
        strf("avgpool: spatial size %dx%d not divisible by window %d", h, w,
             r));
  TensorT<T> out({c, h / r, w / r});
  const T inv = T(1) / T(r * r);
  int64_t o = 0;
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = x.ptr() + int64_t(ci) * h * w;
    for (int oy = 0; oy < h / r; ++oy) {
      for (int ox = 0; ox < w / r; ++ox, ++o) {
        T acc = T(0);
        for (int dy2 = 0; dy2 < r; ++dy2)
          for (int dx2 = 0; dx2 < r; ++dx2)
            acc += xp[int64_t(oy * r + dy2) * w + ox * r + dx2];
        out.data[size_t(o)] = acc * inv;
      }
    }
  }
  return out;
}

template <typename T>
void avgpool_bwd(const TensorT<T>& dy, int r, TensorT<T>& dx) {
  const int c = dx.shape[0], h = dx.shape[1], w = dx.shape[2];
  const T inv = T(1) / T(r * r);
  int64_t o = 0;
  for (int ci = 0; ci < c; ++ci) {
    T* xp = dx.ptr() + int64_t(ci) * h * w;
    for (int oy = 0; oy < h / r; ++oy) {
      for (int ox = 0; ox < w / r; ++ox, ++o) {
        const T g = dy.data[size_t(o)] * inv;
        for (int dy2 = 0; dy2 < r; ++dy2)
          for (int dx2 = 0; dx2 < r; ++dx2)
            xp[int64_t(oy * r + dy2) * w + ox * r + dx2] += g;
      }
    }
  }
}

// (C*r^2, H, W) -> (C, rH, rW): out[c, r*i+a, r*j+b] = x[c*r^2 + a*r + b, i, j].
template <typename T>
TensorT<T> pixel_shuffle_fwd(const TensorT<T>& x, int r) {
  check(x.rank() == 3, "pixel_shuffle: input must be rank 3");
  const int c_in = x.shape[0], h = x.shape[1], w = x.shape[2];
  check(r >= 1, "pixel_shuffle: factor must be >= 1");
  check(c_in % (r * r) == 0,
        strf("pixel_shuffle: channel count %d not divisible by r^2=%d", c_in,
             r * r));
  const int c = c_in / (r * r);
  TensorT<T> out({c, h * r, w * r});
  for (int co = 0; co < c; ++co) {
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < r; ++b) {
        const T* src = x.ptr() + int64_t(co * r * r + a * r + b) * h * w;
        for (int i = 0; i < h; ++i) {
          T* dst =
              out.ptr() + (int64_t(co) * (h * r) + (int64_t(i) * r + a)) *
                              (w * r) +
              b;
          const T* s = src + int64_t(i) * w;
          for (int j = 0; j < w; ++j) dst[int64_t(j) * r] = s[j];
        }
      }
    }
  }
  return out;
}

// Exact inverse of pixel_shuffle_fwd.
template <typename T>
TensorT<T> pixel_unshuffle_fwd(const TensorT<T>& x, int r) {
  check(x.rank() == 3, "pixel_unshuffle: input must be rank 3");
  const int c = x.shape[0], hr = x.shape[1], wr = x.shape[2];
  check(hr % r == 0 && wr % r == 0,
        strf("pixel_unshuffle: spatial size %dx%d not divisible by %d", hr, wr,
             r));
  const int h = hr / r, w = wr / r;
  TensorT<T> out({c * r * r, h, w});
  for (int co = 0; co < c; ++co) {
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < r; ++b) {
        T* dst = out.ptr() + int64_t(co * r * r + a * r + b) * h * w;
        for (int i = 0; i < h; ++i) {
          const T* src =
              x.ptr() + (int64_t(co) * hr + (int64_t(i) * r + a)) * wr + b;
          T* d = dst + int64_t(i) * w;
          for (int j = 0; j < w; ++j) d[j] = src[int64_t(j) * r];
        }
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> concat_channels_fwd(const std::vector<const TensorT<T>*>& xs) {
  check(!xs.empty(), "concat_channels: needs at least one input");
  const int h = xs[0]->shape[1], w = xs[0]->shape[2];
  int ctot = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    check(xs[i]->rank() == 3, "concat_channels: inputs must be rank 3");
    check(xs[i]->shape[1] == h && xs[i]->shape[2] == w,
          strf("concat_channels: input %zu is %dx%d, expected %dx%d", i,
               xs[i]->shape[1], xs[i]->shape[2], h, w));
    ctot += xs[i]->shape[0];
  }
  TensorT<T> out({ctot, h, w});
  T* dst = out.ptr();
  for (const TensorT<T>* x : xs) {
    std::copy(x->data.begin(), x->data.end(), dst);
    dst += x->numel();
  }
  return out;
}

// Mean of squared differences.
template <typename T>
T mse_fwd(const TensorT<T>& pred, const TensorT<T>& target) {
  check(pred.same_shape(target),
        strf("mse_loss: shape mismatch %s vs %s", shape_str(pred).c_str(),
             shape_str(target).c_str()));
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = double(pred.data[i]) - double(target.data[i]);
    acc += d * d;
  }
  return T(acc / double(pred.numel()));
}

template <typename T>
void mse_bwd(const TensorT<T>& pred, const TensorT<T>& target, T gout,
             TensorT<T>* dpred, TensorT<T>* dtarget) {
  const T s = gout * T(2) / T(pred.numel());
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const T d = s * (pred.data[i] - target.data[i]);
    if (dpred) dpred->data[i] += d;
    if (dtarget) dtarget->data[i] -= d;
  }
}

}  // namespace depthpose
