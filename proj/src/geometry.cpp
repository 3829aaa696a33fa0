#include "evdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evdet {

double iou(const Interval& a, const Interval& b) {
  const double inter =
      std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return 0.0;  // both degenerate
  return inter / uni;
}

DefaultGrid build_grid(double window_duration, double default_duration,
                       double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw Error("InvalidOverlap",
                "overlap must be in [0,1), got " + std::to_string(overlap));
  if (window_duration <= 0.0 || default_duration <= 0.0)
    throw Error("InvalidOverlap", "durations must be positive");
  DefaultGrid g;
  g.window_duration = window_duration;
  g.default_duration = default_duration;
  g.overlap = overlap;
  const double step = default_duration * (1.0 - overlap);
  const auto n =
      static_cast<std::size_t>(std::llround(window_duration / step));
  g.centers.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.centers[i] = (static_cast<double>(i) + 0.5) * step;
  return g;
}

std::pair<double, double> encode(double default_center,
                                 double default_duration, double truth_center,
                                 double truth_duration) {
  if (default_duration <= 0.0 || truth_duration <= 0.0)
    throw Error("NonPositiveDuration", "encode requires positive durations");
  return {(truth_center - default_center) / default_duration,
          std::log(truth_duration / default_duration)};
}

Interval decode(double default_center, double default_duration, double code_c,
                double code_d) {
  const double center = default_center + code_c * default_duration;
  const double duration = default_duration * std::exp(code_d);
  return Interval::from_center(center, duration);
}

Matching match(const DefaultGrid& grid, const std::vector<Event>& truths,
               const MatchConfig& cfg) {
  const std::size_t nd = grid.size();
  Matching m;
  m.assignment.assign(nd, std::nullopt);
  if (truths.empty()) return m;

  // truths in ascending start order
  std::vector<std::size_t> order(truths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return truths[a].start() < truths[b].start();
                   });

  std::vector<char> taken(nd, 0);
  for (std::size_t j : order) {
    const Interval tj{truths[j].start(), truths[j].end()};
    double best = 0.0;
    std::size_t best_i = nd;
    for (std::size_t i = 0; i < nd; ++i) {
      if (taken[i]) continue;
      const double v = iou(grid.interval(i), tj);
      if (v > best) {
        best = v;
        best_i = i;
      }
    }
    if (best_i < nd) {
      taken[best_i] = 1;
      m.assignment[best_i] = j;
    }
  }

  for (std::size_t i = 0; i < nd; ++i) {
    if (taken[i]) continue;
    const Interval di = grid.interval(i);
    double best = 0.0;
    std::size_t best_j = truths.size();
    for (std::size_t j = 0; j < truths.size(); ++j) {
      const double v = iou(di, Interval{truths[j].start(), truths[j].end()});
      if (v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best_j < truths.size() && best > cfg.eta) m.assignment[i] = best_j;
  }
  return m;
}

std::vector<ScoredInterval> nms(std::vector<ScoredInterval> events,
                                double iou_threshold) {
  // highest score first, ties by earlier start
  std::stable_sort(events.begin(), events.end(),
                   [](const ScoredInterval& a, const ScoredInterval& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.interval.start < b.interval.start;
                   });
  std::vector<ScoredInterval> kept;
  std::vector<char> dead(events.size(), 0);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (dead[i]) continue;
    kept.push_back(events[i]);
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      if (dead[j]) continue;
      if (iou(events[i].interval, events[j].interval) >= iou_threshold)
        dead[j] = 1;
    }
  }
  std::sort(kept.begin(), kept.end(),
            [](const ScoredInterval& a, const ScoredInterval& b) {
              return a.interval.start < b.interval.start;
            });
  return kept;
}

}  // namespace evdet
