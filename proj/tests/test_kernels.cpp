#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "evdet/kernels.hpp"
#include "evdet/kernels_generic.hpp"

using namespace evdet;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool close(float a, float b, float tol = 1e-5f) {
  return std::abs(a - b) <= tol * (1.0f + std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("scalar kernels match direct computation") {
  std::mt19937 rng(7);
  const auto& k = kern::scalar_ops();
  for (std::size_t n : {1u, 2u, 7u, 64u, 131u}) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);

    std::vector<float> out(n);
    k.relu_fwd(x.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(out[i] == std::max(x[i], 0.0f));

    std::vector<float> dx(n);
    k.relu_bwd(out.data(), y.data(), dx.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(dx[i] == (out[i] > 0.0f ? y[i] : 0.0f));

    auto acc = y;
    k.axpy(0.5f, x.data(), acc.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(close(acc[i], y[i] + 0.5f * x[i]));

    double ref_dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref_dot += double(x[i]) * y[i];
    CHECK(close(k.dot(x.data(), y.data(), n), float(ref_dot), 1e-4f));

    // zero-padded 3-tap correlation
    std::vector<float> conv(n, 0.0f), ref(n, 0.0f);
    const float w0 = 0.3f, w1 = -1.1f, w2 = 0.7f;
    k.conv3_acc(x.data(), n, w0, w1, w2, conv.data());
    for (std::size_t t = 0; t < n; ++t) {
      float s = w1 * x[t];
      if (t > 0) s += w0 * x[t - 1];
      if (t + 1 < n) s += w2 * x[t + 1];
      ref[t] = s;
    }
    for (std::size_t t = 0; t < n; ++t) CHECK(close(conv[t], ref[t]));

    // conv3_dx_acc is the adjoint: <conv3(x), y> == <x, conv3_dx(y)>
    std::vector<float> adj(n, 0.0f);
    k.conv3_dx_acc(y.data(), n, w0, w1, w2, adj.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      lhs += double(conv[t]) * y[t];
      rhs += double(x[t]) * adj[t];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));

    float gw[3] = {0, 0, 0};
    k.conv3_wgrad(x.data(), y.data(), n, gw);
    for (int tap = 0; tap < 3; ++tap) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const std::ptrdiff_t src = std::ptrdiff_t(t) - 1 + tap;
        if (src >= 0 && std::size_t(src) < n) s += double(y[t]) * x[src];
      }
      CHECK(close(gw[tap], float(s), 1e-4f));
    }

    k.affine(x.data(), out.data(), n, 2.0f, -0.25f);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(close(out[i], 2.0f * x[i] - 0.25f));

    double s = 0.0, ss = 0.0;
    k.sum_sumsq(x.data(), n, &s, &ss);
    double rs = 0.0, rss = 0.0;
    for (float v : x) {
      rs += v;
      rss += double(v) * v;
    }
    CHECK(s == doctest::Approx(rs).epsilon(1e-9));
    CHECK(ss == doctest::Approx(rss).epsilon(1e-9));
  }
}

TEST_CASE("sgd_update implements momentum recursion") {
  const auto& k = kern::scalar_ops();
  float p = 0.0f, v = 0.0f, g = 1.0f;
  k.sgd_update(&p, &v, &g, 1, 1.0f, 0.9f);
  CHECK(v == doctest::Approx(1.0));
  CHECK(p == doctest::Approx(-1.0));
  k.sgd_update(&p, &v, &g, 1, 1.0f, 0.9f);
  CHECK(v == doctest::Approx(1.9));
  CHECK(p == doctest::Approx(-2.9));
}

TEST_CASE("vectorized table matches the scalar reference") {
  const kern::Ops* vec = kern::avx2_ops();
  if (!vec) return;  // not supported on this machine
  const auto& ref = kern::scalar_ops();
  std::mt19937 rng(11);
  for (std::size_t n : {1u, 3u, 8u, 15u, 16u, 33u, 100u, 257u, 1024u}) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);

    std::vector<float> a(n), b(n);
    ref.relu_fwd(x.data(), a.data(), n);
    vec->relu_fwd(x.data(), b.data(), n);
    CHECK(a == b);

    ref.relu_bwd(a.data(), y.data(), a.data(), n);
    vec->relu_bwd(b.data(), y.data(), b.data(), n);
    CHECK(a == b);

    a = y;
    b = y;
    ref.axpy(1.7f, x.data(), a.data(), n);
    vec->axpy(1.7f, x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));

    CHECK(close(ref.dot(x.data(), y.data(), n), vec->dot(x.data(), y.data(), n),
                1e-4f));

    std::vector<float> ca(n, 0.1f), cb(n, 0.1f);
    ref.conv3_acc(x.data(), n, 0.4f, -0.9f, 1.3f, ca.data());
    vec->conv3_acc(x.data(), n, 0.4f, -0.9f, 1.3f, cb.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(close(ca[i], cb[i]));

    std::fill(ca.begin(), ca.end(), 0.0f);
    std::fill(cb.begin(), cb.end(), 0.0f);
    ref.conv3_dx_acc(x.data(), n, 0.4f, -0.9f, 1.3f, ca.data());
    vec->conv3_dx_acc(x.data(), n, 0.4f, -0.9f, 1.3f, cb.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(close(ca[i], cb[i]));

    float ga[3] = {0, 0, 0}, gb[3] = {0, 0, 0};
    ref.conv3_wgrad(x.data(), y.data(), n, ga);
    vec->conv3_wgrad(x.data(), y.data(), n, gb);
    for (int t = 0; t < 3; ++t) CHECK(close(ga[t], gb[t], 1e-4f));

    ref.affine(x.data(), a.data(), n, -0.6f, 2.2f);
    vec->affine(x.data(), b.data(), n, -0.6f, 2.2f);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));

    double s1 = 0, ss1 = 0, s2 = 0, ss2 = 0;
    ref.sum_sumsq(x.data(), n, &s1, &ss1);
    vec->sum_sumsq(x.data(), n, &s2, &ss2);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-6));
    CHECK(ss1 == doctest::Approx(ss2).epsilon(1e-6));

    double d1 = 0, h1 = 0, d2 = 0, h2 = 0;
    ref.bn_bwd_reduce(x.data(), y.data(), n, 0.2f, 1.4f, &d1, &h1);
    vec->bn_bwd_reduce(x.data(), y.data(), n, 0.2f, 1.4f, &d2, &h2);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-6));
    CHECK(h1 == doctest::Approx(h2).epsilon(1e-5));

    ref.bn_bwd_apply(x.data(), y.data(), a.data(), n, 0.2f, 1.4f, 0.8f, 0.05f,
                     -0.03f);
    vec->bn_bwd_apply(x.data(), y.data(), b.data(), n, 0.2f, 1.4f, 0.8f, 0.05f,
                      -0.03f);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));

    auto pa = x, pb = x, va = y, vb = y;
    ref.sgd_update(pa.data(), va.data(), y.data(), n, 0.1f, 0.9f);
    vec->sgd_update(pb.data(), vb.data(), y.data(), n, 0.1f, 0.9f);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(close(pa[i], pb[i]));
      CHECK(close(va[i], vb[i]));
    }
  }
}

TEST_CASE("max-pool keeps the first index on ties") {
  const float x[6] = {1.0f, 1.0f, 0.5f, 2.0f, 3.0f, 3.0f};
  float out[3];
  std::uint32_t idx[3];
  kern::maxpool2_fwd(x, 3, out, idx);
  CHECK(out[0] == 1.0f);
  CHECK(idx[0] == 0);
  CHECK(out[1] == 2.0f);
  CHECK(idx[1] == 3);
  CHECK(out[2] == 3.0f);
  CHECK(idx[2] == 4);
}

TEST_CASE("dispatch honours the environment override") {
  // EVDET_NO_AVX2 is read once; here we only check the table is coherent.
  const auto& selected = kern::ops();
  if (kern::using_avx2()) {
    REQUIRE(kern::avx2_ops() != nullptr);
    CHECK(selected.dot == kern::avx2_ops()->dot);
  } else {
    CHECK(selected.dot == kern::scalar_ops().dot);
  }
}
