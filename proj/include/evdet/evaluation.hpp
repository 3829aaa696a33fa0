#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evdet/inference.hpp"
#include "evdet/record.hpp"
#include "evdet/trainer.hpp"

namespace evdet {

struct EvalConfig {
  std::vector<double> deltas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> theta_grid = [] {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
    return g;
  }();
};

struct MatchCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  double precision() const {
    return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct MetricsCell {
  std::string record_id;
  int label = 0;
  double delta = 0.0;
  MatchCounts counts;
};

struct MetricsMean {
  int label = 0;
  double delta = 0.0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  std::vector<MetricsCell> per_record;
  std::vector<MetricsMean> means;  // unweighted over records
};

// Greedy one-to-one matching of a single-label stream: predictions in
// descending probability (ties by earlier start) each claim the unclaimed
// truth of highest IoU when that IoU >= delta.
MatchCounts match_detections(const std::vector<Detection>& predictions,
                             const std::vector<Event>& truths, double delta);

// Per-record counts for every (delta, label), then unweighted means across
// records. Labels 1..n_labels are always reported, present or not.
MetricsReport evaluate(
    const std::map<std::string, std::vector<Detection>>& predictions,
    const std::vector<Annotation>& annotations, const EvalConfig& cfg,
    std::size_t n_labels);

// Grid search of the per-label detection threshold maximizing the mean
// validation F1 at the given delta; ties go to the lower threshold.
DetectionThresholds calibrate_thresholds(
    const DetectorModel<float>& model,
    const std::vector<LabeledRecord>& validation, const DefaultGrid& grid,
    double delta, const EvalConfig& cfg, std::size_t n_labels,
    double nms_iou = 0.4);

void write_metrics_csv(const MetricsReport& report,
                       const std::filesystem::path& path);
void write_metrics_summary(const MetricsReport& report,
                           const std::filesystem::path& path);

void write_detections(const std::vector<Detection>& detections,
                      const std::filesystem::path& path);
std::vector<Detection> read_detections(const std::filesystem::path& path);

void write_thresholds(const DetectionThresholds& thresholds,
                      const std::filesystem::path& path);
DetectionThresholds read_thresholds(const std::filesystem::path& path);

}  // namespace evdet
