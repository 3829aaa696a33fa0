#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "evdet/geometry.hpp"
#include "evdet/network.hpp"

namespace evdet {

struct LossConfig {
  double neg_pos_ratio = 1.0 / 3.0;  // positives per selected negative
  std::size_t min_negatives = 10;
  MatchConfig match;
};

struct LossBreakdown {
  double loc_loss = 0.0;      // normalized localization term
  double cls_pos_loss = 0.0;  // normalized positive classification term
  double cls_neg_loss = 0.0;  // normalized mined-negative term
  double total = 0.0;
  std::size_t positives = 0;
  std::size_t selected_negatives = 0;
};

// x^2/2 for |x| < 1, |x| - 1/2 otherwise.
inline double huber(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}
inline double huber_deriv(double x) {
  return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
}

inline constexpr double kProbClamp = 1e-12;

namespace detail {

// Hard negative mining: unmatched defaults ranked by -log(background prob)
// descending, worst n_neg kept. Selection is recomputed per call and treated
// as constant during differentiation.
template <class Real>
std::vector<std::size_t> mine_negatives(const NetworkOutput<Real>& output,
                                        const Matching& matching,
                                        std::size_t n_labels,
                                        const LossConfig& cfg,
                                        std::size_t positives) {
  std::vector<std::size_t> unmatched;
  for (std::size_t i = 0; i < matching.assignment.size(); ++i)
    if (!matching.assignment[i]) unmatched.push_back(i);
  std::size_t n_neg = std::max<std::size_t>(
      cfg.min_negatives,
      static_cast<std::size_t>(
          std::llround(double(positives) / cfg.neg_pos_ratio)));
  n_neg = std::min(n_neg, unmatched.size());
  std::stable_sort(unmatched.begin(), unmatched.end(),
                   [&](std::size_t a, std::size_t b) {
                     return output.probs[a * (n_labels + 1)] <
                            output.probs[b * (n_labels + 1)];
                   });
  unmatched.resize(n_neg);
  return unmatched;
}

inline double safe_log(double p) {
  if (std::isnan(p)) throw Error("DegenerateProbability", "NaN probability");
  return std::log(std::max(p, kProbClamp));
}

}  // namespace detail

// Matching + localization/classification loss with hard negative mining.
// Positive terms are normalized by the positive count, negative terms by the
// mined-negative count.
template <class Real>
LossBreakdown compute_loss(const NetworkOutput<Real>& output,
                           const DefaultGrid& grid,
                           const std::vector<Event>& truths,
                           const LossConfig& cfg,
                           std::size_t n_labels,
                           Matching* matching_out = nullptr) {
  const Matching m = match(grid, truths, cfg.match);
  if (matching_out) *matching_out = m;
  LossBreakdown out;
  out.positives = m.positives();

  double loc = 0.0, cls_pos = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!m.assignment[i]) continue;
    const Event& e = truths[*m.assignment[i]];
    const auto [u, v] =
        encode(grid.centers[i], grid.default_duration, e.center, e.duration);
    loc += huber(u - double(output.loc[i * 2]));
    loc += huber(v - double(output.loc[i * 2 + 1]));
    cls_pos -= detail::safe_log(
        double(output.probs[i * (n_labels + 1) + std::size_t(e.label)]));
  }

  const auto negatives =
      detail::mine_negatives(output, m, n_labels, cfg, out.positives);
  out.selected_negatives = negatives.size();
  double cls_neg = 0.0;
  for (std::size_t i : negatives)
    cls_neg -= detail::safe_log(double(output.probs[i * (n_labels + 1)]));

  if (out.positives > 0) {
    loc /= double(out.positives);
    cls_pos /= double(out.positives);
  }
  if (out.selected_negatives > 0) cls_neg /= double(out.selected_negatives);
  out.loc_loss = loc;
  out.cls_pos_loss = cls_pos;
  out.cls_neg_loss = cls_neg;
  out.total = loc + cls_pos + cls_neg;
  return out;
}

// Exact partials of the total loss w.r.t. every loc and probs entry, with the
// mining selection frozen. Unselected defaults get zero gradient; unmatched
// defaults get zero localization gradient.
template <class Real>
NetworkOutput<Real> loss_gradients(const NetworkOutput<Real>& output,
                                   const DefaultGrid& grid,
                                   const std::vector<Event>& truths,
                                   const LossConfig& cfg,
                                   std::size_t n_labels,
                                   LossBreakdown* breakdown = nullptr) {
  Matching m;
  const LossBreakdown bd =
      compute_loss(output, grid, truths, cfg, n_labels, &m);
  if (breakdown) *breakdown = bd;

  NetworkOutput<Real> g;
  g.loc.assign(output.loc.size(), Real(0));
  g.probs.assign(output.probs.size(), Real(0));

  if (bd.positives > 0) {
    const double inv_pos = 1.0 / double(bd.positives);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!m.assignment[i]) continue;
      const Event& e = truths[*m.assignment[i]];
      const auto [u, v] =
          encode(grid.centers[i], grid.default_duration, e.center, e.duration);
      g.loc[i * 2] = static_cast<Real>(
          -huber_deriv(u - double(output.loc[i * 2])) * inv_pos);
      g.loc[i * 2 + 1] = static_cast<Real>(
          -huber_deriv(v - double(output.loc[i * 2 + 1])) * inv_pos);
      const std::size_t j = i * (n_labels + 1) + std::size_t(e.label);
      g.probs[j] = static_cast<Real>(
          -inv_pos / std::max(double(output.probs[j]), kProbClamp));
    }
  }

  const auto negatives =
      detail::mine_negatives(output, m, n_labels, cfg, bd.positives);
  if (!negatives.empty()) {
    const double inv_neg = 1.0 / double(negatives.size());
    for (std::size_t i : negatives) {
      const std::size_t j = i * (n_labels + 1);
      g.probs[j] = static_cast<Real>(
          -inv_neg / std::max(double(output.probs[j]), kProbClamp));
    }
  }
  return g;
}

}  // namespace evdet
