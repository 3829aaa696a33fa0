// AVX2/FMA variants of the float kernels. This translation unit is compiled
// with -mavx2 -mfma; avx2_ops() gates on a runtime cpuid check before handing
// out the table.

#include "evdet/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define EVDET_X86 1
#else
#define EVDET_X86 0
#endif

#if EVDET_X86
#include <immintrin.h>

namespace evdet::kern {
namespace {

inline double hsum256d(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

void v_relu_fwd(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void v_relu_bwd(const float* y, const float* dy, float* dx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
  }
  for (; i < n; ++i) dx[i] = y[i] > 0.f ? dy[i] : 0.f;
}

void v_axpy(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 acc = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                 _mm256_loadu_ps(y + i));
    _mm256_storeu_ps(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

float v_dot(const float* x, const float* y, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i),
                           acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8),
                           _mm256_loadu_ps(y + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i),
                           acc0);
  float acc = hsum256(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void v_conv3_acc(const float* x, std::size_t n, float w0, float w1, float w2,
                 float* y) {
  if (n < 10) {
    scalar_ops().conv3_acc(x, n, w0, w1, w2, y);
    return;
  }
  const __m256 vw0 = _mm256_set1_ps(w0);
  const __m256 vw1 = _mm256_set1_ps(w1);
  const __m256 vw2 = _mm256_set1_ps(w2);
  y[0] += w1 * x[0] + w2 * x[1];
  std::size_t i = 1;
  for (; i + 9 <= n; i += 8) {
    __m256 acc = _mm256_loadu_ps(y + i);
    acc = _mm256_fmadd_ps(vw0, _mm256_loadu_ps(x + i - 1), acc);
    acc = _mm256_fmadd_ps(vw1, _mm256_loadu_ps(x + i), acc);
    acc = _mm256_fmadd_ps(vw2, _mm256_loadu_ps(x + i + 1), acc);
    _mm256_storeu_ps(y + i, acc);
  }
  for (; i + 1 < n; ++i) y[i] += w0 * x[i - 1] + w1 * x[i] + w2 * x[i + 1];
  y[n - 1] += w0 * x[n - 2] + w1 * x[n - 1];
}

void v_conv3_dx_acc(const float* dy, std::size_t n, float w0, float w1,
                    float w2, float* dx) {
  // correlation with the flipped kernel
  v_conv3_acc(dy, n, w2, w1, w0, dx);
}

void v_conv3_wgrad(const float* x, const float* dy, std::size_t n, float* gw) {
  if (n < 10) {
    scalar_ops().conv3_wgrad(x, dy, n, gw);
    return;
  }
  __m256 a0 = _mm256_setzero_ps();
  __m256 a1 = _mm256_setzero_ps();
  __m256 a2 = _mm256_setzero_ps();
  std::size_t i = 1;
  for (; i + 9 <= n; i += 8) {
    __m256 d = _mm256_loadu_ps(dy + i);
    a0 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x + i - 1), a0);
    a1 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x + i), a1);
    a2 = _mm256_fmadd_ps(d, _mm256_loadu_ps(x + i + 1), a2);
  }
  float g0 = hsum256(a0), g1 = hsum256(a1), g2 = hsum256(a2);
  for (; i + 1 < n; ++i) {
    g0 += dy[i] * x[i - 1];
    g1 += dy[i] * x[i];
    g2 += dy[i] * x[i + 1];
  }
  // boundary terms: t = 0 and t = n-1
  g1 += dy[0] * x[0];
  g2 += dy[0] * x[1];
  g0 += dy[n - 1] * x[n - 2];
  g1 += dy[n - 1] * x[n - 1];
  gw[0] += g0;
  gw[1] += g1;
  gw[2] += g2;
}

void v_affine(const float* x, float* y, std::size_t n, float a, float b) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void v_sum_sumsq(const float* x, std::size_t n, double* s, double* ss) {
  __m256d vs = _mm256_setzero_pd();
  __m256d vss = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    vs = _mm256_add_pd(vs, v);
    vss = _mm256_fmadd_pd(v, v, vss);
  }
  double a = hsum256d(vs), b = hsum256d(vss);
  for (; i < n; ++i) {
    a += x[i];
    b += double(x[i]) * x[i];
  }
  *s += a;
  *ss += b;
}

void v_bn_bwd_reduce(const float* x, const float* dy, std::size_t n, float mean,
                     float invstd, double* sum_dy, double* sum_dyxh) {
  const __m128 vm = _mm_set1_ps(mean);
  const __m128 vi = _mm_set1_ps(invstd);
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_cvtps_pd(_mm_loadu_ps(dy + i));
    __m256d xh = _mm256_cvtps_pd(
        _mm_mul_ps(_mm_sub_ps(_mm_loadu_ps(x + i), vm), vi));
    a0 = _mm256_add_pd(a0, d);
    a1 = _mm256_fmadd_pd(d, xh, a1);
  }
  double a = hsum256d(a0), b = hsum256d(a1);
  for (; i < n; ++i) {
    a += dy[i];
    b += double(dy[i]) * ((x[i] - mean) * invstd);
  }
  *sum_dy += a;
  *sum_dyxh += b;
}

void v_bn_bwd_apply(const float* x, const float* dy, float* dx, std::size_t n,
                    float mean, float invstd, float g, float c1, float c2) {
  const __m256 vm = _mm256_set1_ps(mean);
  const __m256 vi = _mm256_set1_ps(invstd);
  const __m256 vg = _mm256_set1_ps(g);
  const __m256 vc1 = _mm256_set1_ps(c1);
  const __m256 vc2 = _mm256_set1_ps(c2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 xh = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vm), vi);
    __m256 t = _mm256_sub_ps(_mm256_sub_ps(_mm256_loadu_ps(dy + i), vc1),
                             _mm256_mul_ps(xh, vc2));
    _mm256_storeu_ps(dx + i, _mm256_mul_ps(vg, t));
  }
  for (; i < n; ++i) {
    float xh = (x[i] - mean) * invstd;
    dx[i] = g * (dy[i] - c1 - xh * c2);
  }
}

void v_sgd_update(float* p, float* v, const float* g, std::size_t n, float lr,
                  float mu) {
  const __m256 vmu = _mm256_set1_ps(mu);
  const __m256 vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vel = _mm256_fmadd_ps(vmu, _mm256_loadu_ps(v + i),
                                 _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(v + i, vel);
    _mm256_storeu_ps(p + i,
                     _mm256_fnmadd_ps(vlr, vel, _mm256_loadu_ps(p + i)));
  }
  for (; i < n; ++i) {
    v[i] = mu * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

}  // namespace

const Ops* avx2_ops() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma"))
    return nullptr;
  static const Ops t = {
      v_relu_fwd,    v_relu_bwd,      v_axpy,         v_dot,
      v_conv3_acc,   v_conv3_dx_acc,  v_conv3_wgrad,  v_affine,
      v_sum_sumsq,   v_bn_bwd_reduce, v_bn_bwd_apply, v_sgd_update,
  };
  return &t;
}

}  // namespace evdet::kern

#else  // !EVDET_X86

namespace evdet::kern {
const Ops* avx2_ops() { return nullptr; }
}  // namespace evdet::kern

#endif
