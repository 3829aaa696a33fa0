#pragma once

#include <cstddef>

#include "evdet/kernels.hpp"

// Precision-generic loops. The float overloads route through the dispatched
// table; the templates serve the double build used by gradient checks.
namespace evdet::kern {

template <typename T>
inline void relu_fwd(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}
inline void relu_fwd(const float* x, float* y, std::size_t n) {
  ops().relu_fwd(x, y, n);
}

template <typename T>
inline void relu_bwd(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}
inline void relu_bwd(const float* y, const float* dy, float* dx,
                     std::size_t n) {
  ops().relu_bwd(y, dy, dx, n);
}

template <typename T>
inline void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
inline void axpy(float a, const float* x, float* y, std::size_t n) {
  ops().axpy(a, x, y, n);
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}
inline float dot(const float* x, const float* y, std::size_t n) {
  return ops().dot(x, y, n);
}

template <typename T>
inline void conv3_acc(const T* x, std::size_t n, T w0, T w1, T w2, T* y) {
  for (std::size_t t = 0; t < n; ++t) {
    T acc = w1 * x[t];
    if (t > 0) acc += w0 * x[t - 1];
    if (t + 1 < n) acc += w2 * x[t + 1];
    y[t] += acc;
  }
}
inline void conv3_acc(const float* x, std::size_t n, float w0, float w1,
                      float w2, float* y) {
  ops().conv3_acc(x, n, w0, w1, w2, y);
}

template <typename T>
inline void conv3_dx_acc(const T* dy, std::size_t n, T w0, T w1, T w2, T* dx) {
  for (std::size_t t = 0; t < n; ++t) {
    T acc = w1 * dy[t];
    if (t + 1 < n) acc += w0 * dy[t + 1];
    if (t > 0) acc += w2 * dy[t - 1];
    dx[t] += acc;
  }
}
inline void conv3_dx_acc(const float* dy, std::size_t n, float w0, float w1,
                         float w2, float* dx) {
  ops().conv3_dx_acc(dy, n, w0, w1, w2, dx);
}

template <typename T>
inline void conv3_wgrad(const T* x, const T* dy, std::size_t n, T* gw) {
  T g0 = 0, g1 = 0, g2 = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) g0 += dy[t] * x[t - 1];
    g1 += dy[t] * x[t];
    if (t + 1 < n) g2 += dy[t] * x[t + 1];
  }
  gw[0] += g0;
  gw[1] += g1;
  gw[2] += g2;
}
inline void conv3_wgrad(const float* x, const float* dy, std::size_t n,
                        float* gw) {
  ops().conv3_wgrad(x, dy, n, gw);
}

template <typename T>
inline void affine(const T* x, T* y, std::size_t n, T a, T b) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}
inline void affine(const float* x, float* y, std::size_t n, float a, float b) {
  ops().affine(x, y, n, a, b);
}

template <typename T>
inline void sum_sumsq(const T* x, std::size_t n, double* s, double* ss) {
  double a = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a += static_cast<double>(x[i]);
    b += static_cast<double>(x[i]) * static_cast<double>(x[i]);
  }
  *s += a;
  *ss += b;
}
inline void sum_sumsq(const float* x, std::size_t n, double* s, double* ss) {
  ops().sum_sumsq(x, n, s, ss);
}

template <typename T>
inline void bn_bwd_reduce(const T* x, const T* dy, std::size_t n, T mean,
                          T invstd, double* sum_dy, double* sum_dyxh) {
  double a = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a += static_cast<double>(dy[i]);
    b += static_cast<double>(dy[i]) *
         static_cast<double>((x[i] - mean) * invstd);
  }
  *sum_dy += a;
  *sum_dyxh += b;
}
inline void bn_bwd_reduce(const float* x, const float* dy, std::size_t n,
                          float mean, float invstd, double* sum_dy,
                          double* sum_dyxh) {
  ops().bn_bwd_reduce(x, dy, n, mean, invstd, sum_dy, sum_dyxh);
}

template <typename T>
inline void bn_bwd_apply(const T* x, const T* dy, T* dx, std::size_t n, T mean,
                         T invstd, T g, T c1, T c2) {
  for (std::size_t i = 0; i < n; ++i) {
    T xh = (x[i] - mean) * invstd;
    dx[i] = g * (dy[i] - c1 - xh * c2);
  }
}
inline void bn_bwd_apply(const float* x, const float* dy, float* dx,
                         std::size_t n, float mean, float invstd, float g,
                         float c1, float c2) {
  ops().bn_bwd_apply(x, dy, dx, n, mean, invstd, g, c1, c2);
}

template <typename T>
inline void sgd_update(T* p, T* v, const T* g, std::size_t n, T lr, T mu) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}
inline void sgd_update(float* p, float* v, const float* g, std::size_t n,
                       float lr, float mu) {
  ops().sgd_update(p, v, g, n, lr, mu);
}

// Max-pool (1,2) stride 2 along time; ties keep the earlier index.
template <typename T>
inline void maxpool2_fwd(const T* x, std::size_t n_out, T* y, std::uint32_t* idx) {
  for (std::size_t i = 0; i < n_out; ++i) {
    T a = x[2 * i], b = x[2 * i + 1];
    if (a >= b) {
      y[i] = a;
      idx[i] = static_cast<std::uint32_t>(2 * i);
    } else {
      y[i] = b;
      idx[i] = static_cast<std::uint32_t>(2 * i + 1);
    }
  }
}

}  // namespace evdet::kern
