#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "evdet/loss.hpp"
#include "evdet/network.hpp"
#include "evdet/record.hpp"

namespace evdet {

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  double positive_fraction = 0.5;  // batch fraction with >= 1 true event
  std::size_t early_stop_patience = 10;
  std::size_t plateau_patience = 5;
  double lr_decay_factor = 0.5;
  double window_duration = 20.0;  // seconds
  std::size_t steps_per_epoch = 0;  // 0: ceil(total events / batch_size)
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loc = 0.0, train_cls = 0.0;
  double val_loc = 0.0, val_cls = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

using TrainLog = std::vector<EpochStats>;

struct LabeledRecord {
  Record record;  // expected normalized
  Annotation annotation;
};

// Balanced rejection sampling: each slot draws a uniform record and start
// time until the window's event content (after the 50% inclusion rule)
// matches the slot's positive/negative requirement.
inline std::vector<Sample> sample_batch(
    const std::vector<LabeledRecord>& data, const TrainConfig& cfg,
    std::mt19937_64& rng) {
  if (data.empty()) throw Error("SamplingExhausted", "no training records");
  const std::size_t n_pos = static_cast<std::size_t>(
      std::llround(cfg.positive_fraction * double(cfg.batch_size)));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t s = 0; s < cfg.batch_size; ++s) {
    const bool want_positive = s < n_pos;
    std::size_t rejections = 0;
    for (;;) {
      const auto& lr = data[pick(rng)];
      const double span = lr.record.seconds() - cfg.window_duration;
      if (span < 0.0)
        throw Error("SamplingExhausted", "record shorter than window");
      std::uniform_real_distribution<double> at(0.0, span);
      Sample sample = extract_sample(lr.record, lr.annotation, at(rng),
                                     cfg.window_duration);
      if (sample.events.empty() != want_positive) {
        batch.push_back(std::move(sample));
        break;
      }
      if (++rejections >= 10000)
        throw Error("SamplingExhausted",
                    want_positive ? "no window with a true event found"
                                  : "no event-free window found");
    }
  }
  return batch;
}

// SGD with momentum: v <- mu v + g ; p <- p - lr v. Running batch-norm
// statistics are not touched.
template <class Real>
void sgd_step(DetectorModel<Real>& model, const DetectorModel<Real>& grads,
              DetectorModel<Real>& velocity, double lr, double momentum) {
  bool finite = true;
  visit_params(grads, [&](const std::string&, const std::vector<Real>& g,
                          const std::vector<std::size_t>&) {
    for (Real v : g)
      if (!std::isfinite(double(v))) finite = false;
  });
  if (!finite) throw Error("NonFiniteGradient", "sgd_step");

  auto pit = [&](DetectorModel<Real>& m) {
    std::vector<std::vector<Real>*> out;
    visit_params(m, [&](const std::string&, std::vector<Real>& v,
                        const std::vector<std::size_t>&) { out.push_back(&v); });
    return out;
  };
  auto gs = [&](const DetectorModel<Real>& m) {
    std::vector<const std::vector<Real>*> out;
    visit_params(m, [&](const std::string&, const std::vector<Real>& v,
                        const std::vector<std::size_t>&) { out.push_back(&v); });
    return out;
  };
  auto ps = pit(model);
  auto vs = pit(velocity);
  auto grad_list = gs(grads);
  for (std::size_t i = 0; i < ps.size(); ++i)
    kern::sgd_update(ps[i]->data(), vs[i]->data(), grad_list[i]->data(),
                     ps[i]->size(), Real(lr), Real(momentum));
}

// Plateau / early-stop state machine. Improvement is a strictly lower
// validation loss than the best so far; both counters reset on improvement,
// and the plateau counter also resets after a decay fires.
struct EarlyStopper {
  std::size_t plateau_patience = 5;
  std::size_t stop_patience = 10;

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;
  std::size_t since_improvement_or_decay = 0;

  struct Decision {
    bool improved = false;
    bool decay_lr = false;
    bool stop = false;
  };

  Decision observe(std::size_t epoch, double val_loss) {
    Decision d;
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      since_improvement = 0;
      since_improvement_or_decay = 0;
      d.improved = true;
      return d;
    }
    ++since_improvement;
    ++since_improvement_or_decay;
    if (since_improvement_or_decay >= plateau_patience) {
      d.decay_lr = true;
      since_improvement_or_decay = 0;
    }
    if (since_improvement >= stop_patience) d.stop = true;
    return d;
  }
};

namespace detail {

// Deterministic non-overlapping tiling of full windows for the validation
// loss; the trailing partial window is dropped.
template <class Real>
void pack_window(const Sample& s, Real* dst) {
  for (const auto& row : s.data)
    for (float v : row) *dst++ = static_cast<Real>(v);
}

}  // namespace detail

template <class Real>
struct TrainResult {
  DetectorModel<Real> best_model;
  TrainLog log;
  std::size_t best_epoch = 0;
};

template <class Real>
double validation_loss(DetectorModel<Real>& model,
                       const std::vector<LabeledRecord>& validation,
                       const DefaultGrid& grid, const LossConfig& loss_cfg,
                       const TrainConfig& cfg, double* out_loc,
                       double* out_cls) {
  const NetConfig& nc = model.cfg;
  double loc = 0.0, cls = 0.0;
  std::size_t n_windows = 0;
  std::vector<Sample> pending;
  auto flush = [&]() {
    if (pending.empty()) return;
    std::vector<Real> buf(pending.size() * nc.C * nc.T);
    for (std::size_t i = 0; i < pending.size(); ++i)
      detail::pack_window(pending[i], buf.data() + i * nc.C * nc.T);
    auto outs = forward(model, buf.data(), pending.size(), Mode::kEval);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto bd = compute_loss(outs[i], grid, pending[i].events, loss_cfg,
                                   nc.L);
      loc += bd.loc_loss;
      cls += bd.cls_pos_loss + bd.cls_neg_loss;
      ++n_windows;
    }
    pending.clear();
  };
  for (const auto& lr : validation) {
    const auto n_full = static_cast<std::size_t>(
        lr.record.seconds() / cfg.window_duration + 1e-9);
    for (std::size_t w = 0; w < n_full; ++w) {
      pending.push_back(extract_sample(lr.record, lr.annotation,
                                       double(w) * cfg.window_duration,
                                       cfg.window_duration));
      if (pending.size() >= cfg.batch_size) flush();
    }
  }
  flush();
  if (n_windows == 0) throw Error("RecordTooShort", "no validation windows");
  loc /= double(n_windows);
  cls /= double(n_windows);
  if (out_loc) *out_loc = loc;
  if (out_cls) *out_cls = cls;
  return loc + cls;
}

// Full training loop: balanced batches, SGD with momentum, plateau LR decay,
// early stopping, best-validation model selection.
template <class Real>
TrainResult<Real> train(
    DetectorModel<Real> model, const std::vector<LabeledRecord>& train_set,
    const std::vector<LabeledRecord>& validation_set, const DefaultGrid& grid,
    const LossConfig& loss_cfg, const TrainConfig& cfg,
    const std::function<void(const DetectorModel<Real>&, std::size_t)>&
        on_best = nullptr) {
  if (train_set.empty() || validation_set.empty())
    throw Error("InvalidConfig", "train and validation splits must be non-empty");
  const NetConfig& nc = model.cfg;
  if (grid.size() != nc.Nd)
    throw Error("ShapeMismatch", "grid size does not match Nd");

  std::size_t steps = cfg.steps_per_epoch;
  if (steps == 0) {
    std::size_t total_events = 0;
    for (const auto& lr : train_set) total_events += lr.annotation.events.size();
    steps = (total_events + cfg.batch_size - 1) / cfg.batch_size;
    if (steps == 0) steps = 1;
  }

  std::mt19937_64 rng(cfg.seed);
  auto velocity = DetectorModel<Real>::zeros(nc);
  EarlyStopper stopper{cfg.plateau_patience, cfg.early_stop_patience};
  double lr_now = cfg.lr;

  TrainResult<Real> result;
  result.best_model = model;

  std::vector<Real> buf(cfg.batch_size * nc.C * nc.T);
  ForwardCache<Real> cache;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double ep_loc = 0.0, ep_cls = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      auto batch = sample_batch(train_set, cfg, rng);
      const std::size_t B = batch.size();
      for (std::size_t i = 0; i < B; ++i)
        detail::pack_window(batch[i], buf.data() + i * nc.C * nc.T);
      auto outs = forward(model, buf.data(), B, Mode::kTrain, &cache, &model);
      std::vector<NetworkOutput<Real>> out_grads(B);
      const Real inv_b = Real(1) / Real(B);
      for (std::size_t i = 0; i < B; ++i) {
        LossBreakdown bd;
        out_grads[i] = loss_gradients(outs[i], grid, batch[i].events, loss_cfg,
                                      nc.L, &bd);
        for (auto& v : out_grads[i].loc) v *= inv_b;
        for (auto& v : out_grads[i].probs) v *= inv_b;
        ep_loc += bd.loc_loss;
        ep_cls += bd.cls_pos_loss + bd.cls_neg_loss;
      }
      auto grads = backward(model, cache, out_grads);
      sgd_step(model, grads, velocity, lr_now, cfg.momentum);
    }
    ep_loc /= double(steps * cfg.batch_size);
    ep_cls /= double(steps * cfg.batch_size);

    double val_loc = 0.0, val_cls = 0.0;
    const double val_total = validation_loss(model, validation_set, grid,
                                             loss_cfg, cfg, &val_loc, &val_cls);
    const auto t1 = std::chrono::steady_clock::now();
    result.log.push_back(EpochStats{
        epoch, ep_loc, ep_cls, val_loc, val_cls, lr_now,
        std::chrono::duration<double>(t1 - t0).count()});

    const auto d = stopper.observe(epoch, val_total);
    if (d.improved) {
      result.best_model = model;
      result.best_epoch = epoch;
      if (on_best) on_best(model, epoch);
    }
    if (d.decay_lr) lr_now *= cfg.lr_decay_factor;
    if (d.stop) break;
  }
  return result;
}

}  // namespace evdet
