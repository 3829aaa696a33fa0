#include "evdet/record.hpp"

#include <algorithm>
#include <cmath>

namespace evdet {

void Annotation::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) {
                     return a.start() < b.start();
                   });
}

Record normalize_record(const Record& record) {
  Record out = record;
  for (std::size_t c = 0; c < record.channels(); ++c) {
    const auto& x = record.data[c];
    const std::size_t n = x.size();
    double mean = 0.0;
    for (float v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var == 0.0)
      throw Error("ZeroVariance",
                  "channel " + std::to_string(c) + " has zero variance");
    const double invstd = 1.0 / std::sqrt(var);
    auto& y = out.data[c];
    for (std::size_t i = 0; i < n; ++i)
      y[i] = static_cast<float>((x[i] - mean) * invstd);
  }
  return out;
}

double inclusion_fraction(const Event& e, double win_start, double win_end) {
  const double lo = std::max(e.start(), win_start);
  const double hi = std::min(e.end(), win_end);
  if (hi <= lo) return 0.0;
  return (hi - lo) / e.duration;
}

Sample extract_sample(const Record& record, const Annotation& annotation,
                      double window_start, double window_duration) {
  const double rec_seconds = record.seconds();
  if (window_start < 0.0 || window_start + window_duration > rec_seconds + 1e-9)
    throw Error("OutOfBounds", "window [" + std::to_string(window_start) +
                                   ", " +
                                   std::to_string(window_start +
                                                  window_duration) +
                                   ") exceeds record of " +
                                   std::to_string(rec_seconds) + " s");

  const std::size_t t0 =
      static_cast<std::size_t>(std::llround(window_start * record.sample_rate));
  const std::size_t T = static_cast<std::size_t>(
      std::llround(window_duration * record.sample_rate));

  Sample s;
  s.window_start = window_start;
  s.data.resize(record.channels());
  for (std::size_t c = 0; c < record.channels(); ++c) {
    const auto& row = record.data[c];
    auto& dst = s.data[c];
    dst.resize(T, 0.f);
    const std::size_t avail = row.size() > t0 ? row.size() - t0 : 0;
    const std::size_t ncopy = std::min(T, avail);
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(t0),
              row.begin() + static_cast<std::ptrdiff_t>(t0 + ncopy),
              dst.begin());
  }

  const double win_end = window_start + window_duration;
  for (const Event& e : annotation.events) {
    if (inclusion_fraction(e, window_start, win_end) < 0.5) continue;
    // clipped extent, shifted to window coordinates
    const double lo = std::max(e.start(), window_start) - window_start;
    const double hi = std::min(e.end(), win_end) - window_start;
    s.events.push_back(
        Event::from_start(lo, hi - lo, e.label));
  }
  return s;
}

}  // namespace evdet
