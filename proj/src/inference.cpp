#include "evdet/inference.hpp"

#include <algorithm>
#include <cmath>

namespace evdet {

std::vector<TiledWindow> tile_record(const Record& record,
                                     double window_duration, double stride) {
  const double rec_seconds = record.seconds();
  if (rec_seconds + 1e-9 < window_duration)
    throw Error("RecordTooShort",
                std::to_string(rec_seconds) + " s record, " +
                    std::to_string(window_duration) + " s window");
  if (stride <= 0.0) stride = window_duration;
  const std::size_t T = static_cast<std::size_t>(
      std::llround(window_duration * record.sample_rate));
  const std::size_t C = record.channels();

  std::vector<TiledWindow> out;
  for (double start = 0.0; start + 1e-9 < rec_seconds; start += stride) {
    if (start + window_duration > rec_seconds + 1e-9 &&
        stride < window_duration)
      break;  // overlapped tiling emits full windows only
    TiledWindow w;
    w.window_start = start;
    w.valid_seconds = std::min(window_duration, rec_seconds - start);
    w.padded = w.valid_seconds + 1e-9 < window_duration;
    w.data.assign(C * T, 0.f);
    const std::size_t t0 = static_cast<std::size_t>(
        std::llround(start * record.sample_rate));
    for (std::size_t c = 0; c < C; ++c) {
      const auto& row = record.data[c];
      const std::size_t avail = row.size() > t0 ? row.size() - t0 : 0;
      const std::size_t ncopy = std::min(T, avail);
      std::copy(row.begin() + static_cast<std::ptrdiff_t>(t0),
                row.begin() + static_cast<std::ptrdiff_t>(t0 + ncopy),
                w.data.begin() + static_cast<std::ptrdiff_t>(c * T));
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Detection> raw_candidates(const DetectorModel<float>& model,
                                      const Record& record,
                                      const DefaultGrid& grid, double stride) {
  const auto windows = tile_record(record, grid.window_duration, stride);
  std::vector<Detection> cands;
  for (const auto& w : windows) {
    for (const Candidate& c : predict_window(model, w.data.data(), grid)) {
      // detections entirely inside the zero-padded tail are artifacts
      if (w.padded && c.interval.start >= w.valid_seconds) continue;
      Detection d;
      d.record_id = record.id;
      d.interval = Interval{c.interval.start + w.window_start,
                            c.interval.end + w.window_start};
      d.label = c.label;
      d.probability = c.probability;
      cands.push_back(d);
    }
  }
  return cands;
}

std::vector<Detection> select_detections(std::vector<Detection> candidates,
                                         const DetectionThresholds& thresholds,
                                         double record_seconds,
                                         double nms_iou) {
  std::map<int, std::vector<ScoredInterval>> per_label;
  std::map<int, std::string> ids;
  std::string record_id;
  for (const auto& c : candidates) {
    const auto it = thresholds.theta.find(c.label);
    const double theta = it == thresholds.theta.end() ? 1.0 : it->second;
    if (c.probability < theta) continue;
    // clip before suppression, otherwise clipping could collapse two kept
    // intervals onto the same stretch of record
    const Interval clipped{std::clamp(c.interval.start, 0.0, record_seconds),
                           std::clamp(c.interval.end, 0.0, record_seconds)};
    if (clipped.length() <= 0.0) continue;
    per_label[c.label].push_back(ScoredInterval{clipped, c.probability});
    record_id = c.record_id;
  }
  std::vector<Detection> out;
  for (auto& [label, list] : per_label) {
    for (const auto& kept : nms(std::move(list), nms_iou)) {
      Detection d;
      d.record_id = record_id;
      d.interval = kept.interval;
      d.label = label;
      d.probability = kept.score;
      out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.interval.start != b.interval.start)
      return a.interval.start < b.interval.start;
    return a.label < b.label;
  });
  return out;
}

std::vector<Detection> detect_record(const DetectorModel<float>& model,
                                     const Record& record,
                                     const DefaultGrid& grid,
                                     const DetectionThresholds& thresholds,
                                     double nms_iou, double stride) {
  return select_detections(raw_candidates(model, record, grid, stride),
                           thresholds, record.seconds(), nms_iou);
}

}  // namespace evdet
