#include <cstdlib>

#include "evdet/kernels.hpp"

namespace evdet::kern {
namespace {

void s_relu_fwd(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void s_relu_bwd(const float* y, const float* dy, float* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > 0.f ? dy[i] : 0.f;
}

void s_axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

float s_dot(const float* x, const float* y, std::size_t n) {
  float acc = 0.f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void s_conv3_acc(const float* x, std::size_t n, float w0, float w1, float w2,
                 float* y) {
  for (std::size_t t = 0; t < n; ++t) {
    float acc = w1 * x[t];
    if (t > 0) acc += w0 * x[t - 1];
    if (t + 1 < n) acc += w2 * x[t + 1];
    y[t] += acc;
  }
}

void s_conv3_dx_acc(const float* dy, std::size_t n, float w0, float w1,
                    float w2, float* dx) {
  for (std::size_t t = 0; t < n; ++t) {
    float acc = w1 * dy[t];
    if (t + 1 < n) acc += w0 * dy[t + 1];
    if (t > 0) acc += w2 * dy[t - 1];
    dx[t] += acc;
  }
}

void s_conv3_wgrad(const float* x, const float* dy, std::size_t n, float* gw) {
  float g0 = 0.f, g1 = 0.f, g2 = 0.f;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) g0 += dy[t] * x[t - 1];
    g1 += dy[t] * x[t];
    if (t + 1 < n) g2 += dy[t] * x[t + 1];
  }
  gw[0] += g0;
  gw[1] += g1;
  gw[2] += g2;
}

void s_affine(const float* x, float* y, std::size_t n, float a, float b) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void s_sum_sumsq(const float* x, std::size_t n, double* s, double* ss) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a += x[i];
    b += double(x[i]) * x[i];
  }
  *s += a;
  *ss += b;
}

void s_bn_bwd_reduce(const float* x, const float* dy, std::size_t n, float mean,
                     float invstd, double* sum_dy, double* sum_dyxh) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a += dy[i];
    b += double(dy[i]) * ((x[i] - mean) * invstd);
  }
  *sum_dy += a;
  *sum_dyxh += b;
}

void s_bn_bwd_apply(const float* x, const float* dy, float* dx, std::size_t n,
                    float mean, float invstd, float g, float c1, float c2) {
  for (std::size_t i = 0; i < n; ++i) {
    float xh = (x[i] - mean) * invstd;
    dx[i] = g * (dy[i] - c1 - xh * c2);
  }
}

void s_sgd_update(float* p, float* v, const float* g, std::size_t n, float lr,
                  float mu) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops t = {
      s_relu_fwd,    s_relu_bwd,      s_axpy,         s_dot,
      s_conv3_acc,   s_conv3_dx_acc,  s_conv3_wgrad,  s_affine,
      s_sum_sumsq,   s_bn_bwd_reduce, s_bn_bwd_apply, s_sgd_update,
  };
  return t;
}

const Ops& ops() {
  static const Ops* selected = [] {
    const char* off = std::getenv("EVDET_NO_AVX2");
    if (off && off[0] == '1') return &scalar_ops();
    const Ops* v = avx2_ops();
    return v ? v : &scalar_ops();
  }();
  return *selected;
}

bool using_avx2() { return &ops() != &scalar_ops(); }

}  // namespace evdet::kern
