#pragma once

#include <map>
#include <vector>

#include "evdet/network.hpp"
#include "evdet/record.hpp"

namespace evdet {

struct DetectionThresholds {
  std::map<int, double> theta;  // label -> threshold in [0,1]
};

struct Detection {
  std::string record_id;
  Interval interval;  // record coordinates
  int label = 0;
  double probability = 0.0;
};

struct TiledWindow {
  double window_start = 0.0;  // seconds
  std::vector<float> data;    // C x T, zero padded when partial
  bool padded = false;
  double valid_seconds = 0.0;  // unpadded extent
};

// Non-overlapping consecutive windows from t=0; a trailing partial window is
// zero padded and flagged. An explicit stride below window_duration gives
// overlapped tiling.
std::vector<TiledWindow> tile_record(const Record& record,
                                     double window_duration,
                                     double stride = 0.0);

// Raw per-record candidates (pre-threshold, pre-NMS), used by detection and
// by threshold calibration so the network runs once per record.
std::vector<Detection> raw_candidates(const DetectorModel<float>& model,
                                      const Record& record,
                                      const DefaultGrid& grid,
                                      double stride = 0.0);

// Threshold + per-label NMS + clipping over precomputed candidates.
std::vector<Detection> select_detections(std::vector<Detection> candidates,
                                         const DetectionThresholds& thresholds,
                                         double record_seconds,
                                         double nms_iou = 0.4);

// Full-record detection pipeline.
std::vector<Detection> detect_record(const DetectorModel<float>& model,
                                     const Record& record,
                                     const DefaultGrid& grid,
                                     const DetectionThresholds& thresholds,
                                     double nms_iou = 0.4, double stride = 0.0);

}  // namespace evdet
