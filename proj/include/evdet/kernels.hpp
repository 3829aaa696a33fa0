#pragma once

#include <cstddef>
#include <cstdint>

// Float inner loops used by the network. Every kernel has a scalar reference
// implementation and (on x86-64 with AVX2) a vectorized variant; the table in
// use is resolved once at runtime. Set EVDET_NO_AVX2=1 in the environment to
// force the scalar path. Non-float instantiations of the templated network use
// the generic loops in kernels_generic.hpp.
namespace evdet::kern {

struct Ops {
  // y[i] = max(x[i], 0)
  void (*relu_fwd)(const float* x, float* y, std::size_t n);
  // dx[i] = y[i] > 0 ? dy[i] : 0   (y is the relu output)
  void (*relu_bwd)(const float* y, const float* dy, float* dx, std::size_t n);
  // y += a * x
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  float (*dot)(const float* x, const float* y, std::size_t n);
  // y[t] += w0*x[t-1] + w1*x[t] + w2*x[t+1], zero padded
  void (*conv3_acc)(const float* x, std::size_t n, float w0, float w1, float w2,
                    float* y);
  // dx[t] += w0*dy[t+1] + w1*dy[t] + w2*dy[t-1], zero padded
  void (*conv3_dx_acc)(const float* dy, std::size_t n, float w0, float w1,
                       float w2, float* dx);
  // gw[k] += sum_t dy[t] * x[t-1+k]
  void (*conv3_wgrad)(const float* x, const float* dy, std::size_t n,
                      float* gw);
  // y[i] = a*x[i] + b
  void (*affine)(const float* x, float* y, std::size_t n, float a, float b);
  // *s += sum(x), *ss += sum(x^2); accumulators are double
  void (*sum_sumsq)(const float* x, std::size_t n, double* s, double* ss);
  // *sum_dy += sum(dy), *sum_dyxh += sum(dy * (x-mean)*invstd)
  void (*bn_bwd_reduce)(const float* x, const float* dy, std::size_t n,
                        float mean, float invstd, double* sum_dy,
                        double* sum_dyxh);
  // dx[i] = g * (dy[i] - c1 - ((x[i]-mean)*invstd) * c2)
  void (*bn_bwd_apply)(const float* x, const float* dy, float* dx,
                       std::size_t n, float mean, float invstd, float g,
                       float c1, float c2);
  // v = mu*v + g ; p -= lr*v
  void (*sgd_update)(float* p, float* v, const float* g, std::size_t n,
                     float lr, float mu);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unsupported at runtime
const Ops& ops();       // selected table
bool using_avx2();

}  // namespace evdet::kern
