#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "evdet/error.hpp"
#include "evdet/geometry.hpp"
#include "evdet/kernels_generic.hpp"

namespace evdet {

// Detector architecture: spatial filter, K conv/batch-norm/relu/pool blocks,
// then two full-extent heads (localization, classification) over the final
// (F, C, T~) feature map with F = 4*2^K and T~ = T/2^K.
struct NetConfig {
  std::size_t C = 1;   // input channels
  std::size_t T = 0;   // input time steps
  std::size_t K = 8;   // temporal blocks
  std::size_t L = 1;   // event labels (background excluded)
  std::size_t Nd = 80; // defaults per window

  std::size_t F() const { return std::size_t(4) << K; }
  std::size_t Tt() const { return T >> K; }
  std::size_t feat_len() const { return F() * C * Tt(); }

  void validate() const {
    if (C < 1 || K < 1 || L < 1 || Nd < 1 || T < 1)
      throw Error("InvalidConfig", "all dimensions must be positive");
    if (T % (std::size_t(1) << K) != 0)
      throw Error("InvalidConfig",
                  "T=" + std::to_string(T) + " not divisible by 2^K=" +
                      std::to_string(std::size_t(1) << K));
  }
};

enum class Mode { kTrain, kEval };

template <class Real>
struct NetworkOutput {
  std::vector<Real> loc;    // Nd x 2: (center offset, log duration ratio)
  std::vector<Real> probs;  // Nd x (L+1), each row a probability vector
};

namespace detail {

// Light 4-D tensor with contiguous (batch, map, channel, time) layout.
template <class Real>
struct Tens {
  std::size_t nb = 0, nm = 0, nc = 0, nt = 0;
  std::vector<Real> v;

  void resize(std::size_t b, std::size_t m, std::size_t c, std::size_t t) {
    nb = b; nm = m; nc = c; nt = t;
    v.assign(b * m * c * t, Real(0));
  }
  Real* row(std::size_t b, std::size_t m, std::size_t c) {
    return v.data() + ((b * nm + m) * nc + c) * nt;
  }
  const Real* row(std::size_t b, std::size_t m, std::size_t c) const {
    return v.data() + ((b * nm + m) * nc + c) * nt;
  }
};

}  // namespace detail

template <class Real>
struct ConvBlock {
  std::size_t in_maps = 0, out_maps = 0;
  std::vector<Real> w;  // out_maps x in_maps x 3
  std::vector<Real> b;
  std::vector<Real> gamma, beta;
  std::vector<Real> run_mean, run_var;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

template <class Real>
struct DetectorModel {
  NetConfig cfg;
  std::vector<Real> spatial_w, spatial_b;  // C x C + C, empty when C == 1
  std::vector<ConvBlock<Real>> blocks;     // K entries
  std::vector<Real> loc_w, loc_b;  // (2 Nd) x feat_len
  std::vector<Real> cls_w, cls_b;  // ((L+1) Nd) x feat_len

  static DetectorModel zeros(const NetConfig& cfg) {
    cfg.validate();
    DetectorModel m;
    m.cfg = cfg;
    if (cfg.C > 1) {
      m.spatial_w.assign(cfg.C * cfg.C, Real(0));
      m.spatial_b.assign(cfg.C, Real(0));
    }
    m.blocks.resize(cfg.K);
    std::size_t in_maps = 1;
    for (std::size_t k = 0; k < cfg.K; ++k) {
      auto& blk = m.blocks[k];
      blk.in_maps = in_maps;
      blk.out_maps = std::size_t(4) << (k + 1);
      blk.w.assign(blk.out_maps * blk.in_maps * 3, Real(0));
      blk.b.assign(blk.out_maps, Real(0));
      blk.gamma.assign(blk.out_maps, Real(0));
      blk.beta.assign(blk.out_maps, Real(0));
      blk.run_mean.assign(blk.out_maps, Real(0));
      blk.run_var.assign(blk.out_maps, Real(0));
      in_maps = blk.out_maps;
    }
    const std::size_t flen = cfg.feat_len();
    m.loc_w.assign(2 * cfg.Nd * flen, Real(0));
    m.loc_b.assign(2 * cfg.Nd, Real(0));
    m.cls_w.assign((cfg.L + 1) * cfg.Nd * flen, Real(0));
    m.cls_b.assign((cfg.L + 1) * cfg.Nd, Real(0));
    return m;
  }
};

// Enumerates parameter tensors in a fixed order. Running statistics are
// included only when include_running is set (checkpointing wants them, SGD
// and gradients do not).
template <class Model, class Fn>
void visit_params(Model& m, Fn&& fn, bool include_running = false) {
  const auto& cfg = m.cfg;
  if (cfg.C > 1) {
    fn("spatial.w", m.spatial_w, std::vector<std::size_t>{cfg.C, cfg.C});
    fn("spatial.b", m.spatial_b, std::vector<std::size_t>{cfg.C});
  }
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    auto& blk = m.blocks[k];
    const std::string p = "block" + std::to_string(k + 1) + ".";
    fn(p + "w", blk.w,
       std::vector<std::size_t>{blk.out_maps, blk.in_maps, 1, 3});
    fn(p + "b", blk.b, std::vector<std::size_t>{blk.out_maps});
    fn(p + "bn.gamma", blk.gamma, std::vector<std::size_t>{blk.out_maps});
    fn(p + "bn.beta", blk.beta, std::vector<std::size_t>{blk.out_maps});
    if (include_running) {
      fn(p + "bn.run_mean", blk.run_mean,
         std::vector<std::size_t>{blk.out_maps});
      fn(p + "bn.run_var", blk.run_var,
         std::vector<std::size_t>{blk.out_maps});
    }
  }
  fn("loc.w", m.loc_w,
     std::vector<std::size_t>{2 * cfg.Nd, cfg.feat_len()});
  fn("loc.b", m.loc_b, std::vector<std::size_t>{2 * cfg.Nd});
  fn("cls.w", m.cls_w,
     std::vector<std::size_t>{(cfg.L + 1) * cfg.Nd, cfg.feat_len()});
  fn("cls.b", m.cls_b, std::vector<std::size_t>{(cfg.L + 1) * cfg.Nd});
}

// He fan-in init for conv and head weights, near-identity spatial filter,
// unit batch-norm. Deterministic given the seed.
template <class Real>
DetectorModel<Real> init_model(const NetConfig& cfg, std::uint64_t seed) {
  auto m = DetectorModel<Real>::zeros(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  if (cfg.C > 1) {
    for (std::size_t i = 0; i < cfg.C; ++i)
      for (std::size_t j = 0; j < cfg.C; ++j)
        m.spatial_w[i * cfg.C + j] =
            static_cast<Real>((i == j ? 1.0 : 0.0) + 0.01 * unit(rng));
  }
  for (auto& blk : m.blocks) {
    const double std_w = std::sqrt(2.0 / double(blk.in_maps * 3));
    for (auto& w : blk.w) w = static_cast<Real>(std_w * unit(rng));
    for (auto& g : blk.gamma) g = Real(1);
    for (auto& v : blk.run_var) v = Real(1);
  }
  const double std_head = std::sqrt(2.0 / double(cfg.feat_len()));
  for (auto& w : m.loc_w) w = static_cast<Real>(std_head * unit(rng));
  for (auto& w : m.cls_w) w = static_cast<Real>(std_head * unit(rng));
  return m;
}

template <class Real>
struct ForwardCache {
  Mode mode = Mode::kEval;
  std::size_t B = 0;
  std::vector<Real> input;         // B x C x T
  std::vector<Real> post_spatial;  // empty when C == 1
  struct BlockCache {
    detail::Tens<Real> conv_out;  // pre batch-norm
    std::vector<Real> mean, invstd;
    detail::Tens<Real> relu_out;
    detail::Tens<Real> pool_out;
    std::vector<std::uint32_t> pool_idx;
  };
  std::vector<BlockCache> blocks;
  std::vector<NetworkOutput<Real>> outputs;
};

// Forward pass over a B x C x T batch. Train mode uses batch statistics and,
// when running_stats_of is non-null, folds them into its running estimates.
template <class Real>
std::vector<NetworkOutput<Real>> forward(
    const DetectorModel<Real>& model, const Real* batch, std::size_t B,
    Mode mode, ForwardCache<Real>* cache = nullptr,
    DetectorModel<Real>* running_stats_of = nullptr) {
  const NetConfig& cfg = model.cfg;
  cfg.validate();
  if (B == 0) throw Error("ShapeMismatch", "empty batch");

  ForwardCache<Real> local;
  ForwardCache<Real>& cc = cache ? *cache : local;
  cc.mode = mode;
  cc.B = B;
  cc.input.assign(batch, batch + B * cfg.C * cfg.T);
  cc.blocks.assign(cfg.K, {});
  cc.outputs.clear();

  // spatial filter: C linear combinations of the C input rows per time step
  const Real* x0 = cc.input.data();
  if (cfg.C > 1) {
    cc.post_spatial.assign(B * cfg.C * cfg.T, Real(0));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < cfg.C; ++co) {
        Real* y = cc.post_spatial.data() + (b * cfg.C + co) * cfg.T;
        for (std::size_t t = 0; t < cfg.T; ++t) y[t] = model.spatial_b[co];
        for (std::size_t ci = 0; ci < cfg.C; ++ci)
          kern::axpy(model.spatial_w[co * cfg.C + ci],
                     cc.input.data() + (b * cfg.C + ci) * cfg.T, y, cfg.T);
      }
    x0 = cc.post_spatial.data();
  }

  // temporal blocks; the (B, C, T) input is one feature map
  detail::Tens<Real> in_view;
  in_view.nb = B; in_view.nm = 1; in_view.nc = cfg.C; in_view.nt = cfg.T;
  const Real* in_data = x0;
  std::size_t in_maps = 1, t_in = cfg.T;

  for (std::size_t k = 0; k < cfg.K; ++k) {
    const auto& blk = model.blocks[k];
    auto& bc = cc.blocks[k];
    const std::size_t mo_n = blk.out_maps;
    bc.conv_out.resize(B, mo_n, cfg.C, t_in);
    auto in_row = [&](std::size_t b, std::size_t mi, std::size_t c) {
      return in_data + ((b * in_maps + mi) * cfg.C + c) * t_in;
    };
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t mo = 0; mo < mo_n; ++mo)
        for (std::size_t c = 0; c < cfg.C; ++c) {
          Real* y = bc.conv_out.row(b, mo, c);
          for (std::size_t t = 0; t < t_in; ++t) y[t] = blk.b[mo];
          for (std::size_t mi = 0; mi < in_maps; ++mi) {
            const Real* w = blk.w.data() + (mo * in_maps + mi) * 3;
            kern::conv3_acc(in_row(b, mi, c), t_in, w[0], w[1], w[2], y);
          }
        }

    // batch norm per output map over (B, C, t)
    bc.mean.assign(mo_n, Real(0));
    bc.invstd.assign(mo_n, Real(0));
    const double n_stat = double(B * cfg.C * t_in);
    for (std::size_t mo = 0; mo < mo_n; ++mo) {
      double mean, var;
      if (mode == Mode::kTrain) {
        double s = 0.0, ss = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < cfg.C; ++c)
            kern::sum_sumsq(bc.conv_out.row(b, mo, c), t_in, &s, &ss);
        mean = s / n_stat;
        var = ss / n_stat - mean * mean;
        if (var < 0.0) var = 0.0;
        if (running_stats_of) {
          auto& rblk = running_stats_of->blocks[k];
          rblk.run_mean[mo] = static_cast<Real>(
              (1.0 - kBnMomentum) * double(rblk.run_mean[mo]) +
              kBnMomentum * mean);
          rblk.run_var[mo] = static_cast<Real>(
              (1.0 - kBnMomentum) * double(rblk.run_var[mo]) +
              kBnMomentum * var);
        }
      } else {
        mean = double(blk.run_mean[mo]);
        var = double(blk.run_var[mo]);
      }
      bc.mean[mo] = static_cast<Real>(mean);
      bc.invstd[mo] = static_cast<Real>(1.0 / std::sqrt(var + kBnEps));
    }

    // scale/shift, relu, then max-pool (1,2) stride 2
    bc.relu_out.resize(B, mo_n, cfg.C, t_in);
    const std::size_t t_out = t_in / 2;
    bc.pool_out.resize(B, mo_n, cfg.C, t_out);
    bc.pool_idx.assign(B * mo_n * cfg.C * t_out, 0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t mo = 0; mo < mo_n; ++mo) {
        const Real a = blk.gamma[mo] * bc.invstd[mo];
        const Real sh = blk.beta[mo] - bc.mean[mo] * a;
        for (std::size_t c = 0; c < cfg.C; ++c) {
          Real* y = bc.relu_out.row(b, mo, c);
          kern::affine(bc.conv_out.row(b, mo, c), y, t_in, a, sh);
          kern::relu_fwd(y, y, t_in);
          kern::maxpool2_fwd(y, t_out, bc.pool_out.row(b, mo, c),
                             bc.pool_idx.data() +
                                 ((b * mo_n + mo) * cfg.C + c) * t_out);
        }
      }

    in_data = bc.pool_out.v.data();
    in_maps = mo_n;
    t_in = t_out;
  }

  // heads: full-extent dot products over the flattened feature map
  const std::size_t flen = cfg.feat_len();
  const std::size_t n_loc = 2 * cfg.Nd;
  const std::size_t n_cls = (cfg.L + 1) * cfg.Nd;
  std::vector<NetworkOutput<Real>> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const Real* feat = in_data + b * flen;
    auto& o = out[b];
    o.loc.resize(n_loc);
    for (std::size_t j = 0; j < n_loc; ++j)
      o.loc[j] = kern::dot(model.loc_w.data() + j * flen, feat, flen) +
                 model.loc_b[j];
    o.probs.resize(n_cls);
    std::vector<Real> z(cfg.L + 1);
    for (std::size_t i = 0; i < cfg.Nd; ++i) {
      Real zmax = -std::numeric_limits<Real>::infinity();
      for (std::size_t l = 0; l <= cfg.L; ++l) {
        const std::size_t j = i * (cfg.L + 1) + l;
        z[l] = kern::dot(model.cls_w.data() + j * flen, feat, flen) +
               model.cls_b[j];
        zmax = std::max(zmax, z[l]);
      }
      Real zsum = 0;
      for (std::size_t l = 0; l <= cfg.L; ++l) {
        z[l] = std::exp(z[l] - zmax);
        zsum += z[l];
      }
      for (std::size_t l = 0; l <= cfg.L; ++l)
        o.probs[i * (cfg.L + 1) + l] = z[l] / zsum;
    }
    for (Real v : o.loc)
      if (!std::isfinite(double(v)))
        throw Error("NonFiniteActivation", "localization head");
    for (Real v : o.probs)
      if (!std::isfinite(double(v)))
        throw Error("NonFiniteActivation", "classification head");
  }
  cc.outputs = out;
  return out;
}

// Backpropagates gradients of a scalar loss, given its partials w.r.t. each
// sample's loc outputs and (post-softmax) probability outputs. Returns a
// model-shaped gradient holder; running-stat slots stay zero.
template <class Real>
DetectorModel<Real> backward(const DetectorModel<Real>& model,
                             const ForwardCache<Real>& cache,
                             const std::vector<NetworkOutput<Real>>& grads) {
  const NetConfig& cfg = model.cfg;
  const std::size_t B = cache.B;
  if (grads.size() != B || cache.blocks.size() != cfg.K)
    throw Error("StaleCache", "cache/gradient batch mismatch");

  auto g = DetectorModel<Real>::zeros(cfg);
  const std::size_t flen = cfg.feat_len();
  const std::size_t n_loc = 2 * cfg.Nd;

  // head backward; dfeat gathered per sample
  const auto& last = cache.blocks.back();
  std::vector<Real> dfeat(B * flen, Real(0));
  for (std::size_t b = 0; b < B; ++b) {
    const Real* feat = last.pool_out.v.data() + b * flen;
    Real* df = dfeat.data() + b * flen;
    for (std::size_t j = 0; j < n_loc; ++j) {
      const Real d = grads[b].loc[j];
      if (d != Real(0)) {
        kern::axpy(d, feat, g.loc_w.data() + j * flen, flen);
        kern::axpy(d, model.loc_w.data() + j * flen, df, flen);
      }
      g.loc_b[j] += d;
    }
    // softmax jacobian per default group
    const auto& p = cache.outputs[b].probs;
    for (std::size_t i = 0; i < cfg.Nd; ++i) {
      Real s = 0;
      for (std::size_t l = 0; l <= cfg.L; ++l) {
        const std::size_t j = i * (cfg.L + 1) + l;
        s += grads[b].probs[j] * p[j];
      }
      for (std::size_t l = 0; l <= cfg.L; ++l) {
        const std::size_t j = i * (cfg.L + 1) + l;
        const Real dz = p[j] * (grads[b].probs[j] - s);
        if (dz != Real(0)) {
          kern::axpy(dz, feat, g.cls_w.data() + j * flen, flen);
          kern::axpy(dz, model.cls_w.data() + j * flen, df, flen);
        }
        g.cls_b[j] += dz;
      }
    }
  }

  // blocks in reverse
  detail::Tens<Real> d_out;  // gradient w.r.t. the block's pooled output
  d_out.nb = B; d_out.nm = model.blocks.back().out_maps;
  d_out.nc = cfg.C; d_out.nt = cfg.Tt();
  d_out.v = std::move(dfeat);

  for (std::size_t k = cfg.K; k-- > 0;) {
    const auto& blk = model.blocks[k];
    auto& gblk = g.blocks[k];
    const auto& bc = cache.blocks[k];
    const std::size_t mo_n = blk.out_maps;
    const std::size_t t_in = bc.conv_out.nt;
    const std::size_t t_out = t_in / 2;

    // pool scatter + relu mask, into d_bn (gradient at the batch-norm output)
    detail::Tens<Real> d_bn;
    d_bn.resize(B, mo_n, cfg.C, t_in);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t mo = 0; mo < mo_n; ++mo)
        for (std::size_t c = 0; c < cfg.C; ++c) {
          Real* dst = d_bn.row(b, mo, c);
          const Real* src = d_out.row(b, mo, c);
          const std::uint32_t* idx =
              bc.pool_idx.data() + ((b * mo_n + mo) * cfg.C + c) * t_out;
          for (std::size_t i = 0; i < t_out; ++i) dst[idx[i]] += src[i];
          kern::relu_bwd(bc.relu_out.row(b, mo, c), dst, dst, t_in);
        }

    // batch-norm backward
    detail::Tens<Real> d_conv;
    d_conv.resize(B, mo_n, cfg.C, t_in);
    const double n_stat = double(B * cfg.C * t_in);
    for (std::size_t mo = 0; mo < mo_n; ++mo) {
      double sum_dy = 0.0, sum_dyxh = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < cfg.C; ++c)
          kern::bn_bwd_reduce(bc.conv_out.row(b, mo, c), d_bn.row(b, mo, c),
                              t_in, bc.mean[mo], bc.invstd[mo], &sum_dy,
                              &sum_dyxh);
      gblk.gamma[mo] = static_cast<Real>(sum_dyxh);
      gblk.beta[mo] = static_cast<Real>(sum_dy);
      const Real gi = blk.gamma[mo] * bc.invstd[mo];
      Real c1 = 0, c2 = 0;
      if (cache.mode == Mode::kTrain) {
        c1 = static_cast<Real>(sum_dy / n_stat);
        c2 = static_cast<Real>(sum_dyxh / n_stat);
      }
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < cfg.C; ++c)
          kern::bn_bwd_apply(bc.conv_out.row(b, mo, c), d_bn.row(b, mo, c),
                             d_conv.row(b, mo, c), t_in, bc.mean[mo],
                             bc.invstd[mo], gi, c1, c2);
    }

    // conv backward
    const std::size_t in_maps = blk.in_maps;
    const Real* in_data;
    if (k == 0)
      in_data = cfg.C > 1 ? cache.post_spatial.data() : cache.input.data();
    else
      in_data = cache.blocks[k - 1].pool_out.v.data();
    auto in_row = [&](std::size_t b, std::size_t mi, std::size_t c) {
      return in_data + ((b * in_maps + mi) * cfg.C + c) * t_in;
    };

    detail::Tens<Real> d_in;
    d_in.resize(B, in_maps, cfg.C, t_in);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t mo = 0; mo < mo_n; ++mo)
        for (std::size_t c = 0; c < cfg.C; ++c) {
          const Real* dy = d_conv.row(b, mo, c);
          double s = 0.0, ss = 0.0;
          kern::sum_sumsq(dy, t_in, &s, &ss);
          gblk.b[mo] += static_cast<Real>(s);
          for (std::size_t mi = 0; mi < in_maps; ++mi) {
            const Real* w = blk.w.data() + (mo * in_maps + mi) * 3;
            kern::conv3_wgrad(in_row(b, mi, c), dy, t_in,
                              gblk.w.data() + (mo * in_maps + mi) * 3);
            kern::conv3_dx_acc(dy, t_in, w[0], w[1], w[2],
                               d_in.row(b, mi, c));
          }
        }
    d_out = std::move(d_in);
  }

  // spatial filter backward
  if (cfg.C > 1) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < cfg.C; ++co) {
        const Real* dy = d_out.row(b, 0, co);
        double s = 0.0, ss = 0.0;
        kern::sum_sumsq(dy, cfg.T, &s, &ss);
        g.spatial_b[co] += static_cast<Real>(s);
        for (std::size_t ci = 0; ci < cfg.C; ++ci)
          g.spatial_w[co * cfg.C + ci] +=
              kern::dot(dy, cache.input.data() + (b * cfg.C + ci) * cfg.T,
                        cfg.T);
      }
  }
  return g;
}

struct Candidate {
  int label = 0;
  double probability = 0.0;
  Interval interval;
};

// Eval-mode prediction on one window: decode every default, keep the argmax
// label when it is not background.
template <class Real>
std::vector<Candidate> predict_window(const DetectorModel<Real>& model,
                                      const Real* window,
                                      const DefaultGrid& grid) {
  const NetConfig& cfg = model.cfg;
  if (grid.size() != cfg.Nd)
    throw Error("ShapeMismatch", "grid size does not match Nd");
  auto out = forward(model, window, 1, Mode::kEval);
  const auto& o = out[0];
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < cfg.Nd; ++i) {
    std::size_t best_l = 0;
    Real best_p = o.probs[i * (cfg.L + 1)];
    for (std::size_t l = 1; l <= cfg.L; ++l) {
      const Real p = o.probs[i * (cfg.L + 1) + l];
      if (p > best_p) {
        best_p = p;
        best_l = l;
      }
    }
    if (best_l == 0) continue;
    const Interval iv =
        decode(grid.centers[i], grid.default_duration,
               double(o.loc[i * 2]), double(o.loc[i * 2 + 1]));
    cands.push_back(Candidate{int(best_l), double(best_p), iv});
  }
  return cands;
}

}  // namespace evdet
