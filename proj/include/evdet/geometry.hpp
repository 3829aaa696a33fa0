#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "evdet/record.hpp"

namespace evdet {

struct Interval {
  double start = 0.0;
  double end = 0.0;  // >= start

  double length() const { return end - start; }
  static Interval from_center(double center, double duration) {
    return Interval{center - duration / 2.0, center + duration / 2.0};
  }
  double center() const { return (start + end) / 2.0; }
};

// Intersection over union of two intervals, in [0,1]. Degenerate zero-length
// intervals give 0.
double iou(const Interval& a, const Interval& b);

// Default events tiled over a window. All defaults share one duration; the
// step is duration * (1 - overlap) and centers sit at (i + 0.5) * step, so
// defaults may overhang the window edges.
struct DefaultGrid {
  double window_duration = 0.0;
  double default_duration = 0.0;
  double overlap = 0.0;
  std::vector<double> centers;

  std::size_t size() const { return centers.size(); }
  Interval interval(std::size_t i) const {
    return Interval::from_center(centers[i], default_duration);
  }
};

DefaultGrid build_grid(double window_duration, double default_duration,
                       double overlap);

struct MatchConfig {
  double eta = 0.5;  // IoU threshold for stage-2 matching
};

// assignment[i] = index of the matched true event, or nullopt for background.
struct Matching {
  std::vector<std::optional<std::size_t>> assignment;

  std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& a : assignment) n += a.has_value() ? 1 : 0;
    return n;
  }
};

// (relative center offset, log duration ratio) of a truth w.r.t. a default.
std::pair<double, double> encode(double default_center, double default_duration,
                                 double truth_center, double truth_duration);

// Inverse of encode; decode(d, encode(d, e)) reproduces e.
Interval decode(double default_center, double default_duration, double code_c,
                double code_d);

// Two-stage matching. Stage 1: each truth (ascending start order) claims the
// unassigned default with highest IoU, ties to the lowest default index;
// truths with zero IoU against every default stay unmatched. Stage 2: every
// remaining default goes to its argmax-IoU truth iff that IoU > cfg.eta.
Matching match(const DefaultGrid& grid, const std::vector<Event>& truths,
               const MatchConfig& cfg = {});

struct ScoredInterval {
  Interval interval;
  double score = 0.0;
};

// Greedy non-maximum suppression: keep the highest score (ties to the earlier
// start), drop everything at IoU >= threshold against it, repeat. Output
// sorted by start time. Idempotent.
std::vector<ScoredInterval> nms(std::vector<ScoredInterval> events,
                                double iou_threshold);

}  // namespace evdet
