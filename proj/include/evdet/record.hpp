#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "evdet/error.hpp"

namespace evdet {

// A labeled event. Label 0 means background and is never stored in
// annotations; stored events carry labels in {1..L}.
struct Event {
  double center = 0.0;    // seconds
  double duration = 0.0;  // seconds, > 0
  int label = 1;

  double start() const { return center - duration / 2.0; }
  double end() const { return center + duration / 2.0; }

  static Event from_start(double start, double duration, int label) {
    return Event{start + duration / 2.0, duration, label};
  }
};

// Multichannel uniformly sampled signal. Immutable after load; shared
// read-only across workers.
struct Record {
  std::string id;
  double sample_rate = 0.0;  // Hz
  std::vector<std::string> channel_names;
  std::vector<std::vector<float>> data;  // C rows of S samples

  std::size_t channels() const { return data.size(); }
  std::size_t samples() const { return data.empty() ? 0 : data[0].size(); }
  double seconds() const {
    return static_cast<double>(samples()) / sample_rate;
  }
};

struct Annotation {
  std::string record_id;
  std::vector<Event> events;  // sorted ascending by start time

  void sort_events();
};

// A training window: C x T slice with events shifted to window coordinates.
struct Sample {
  std::vector<std::vector<float>> data;  // C x T
  std::vector<Event> events;
  double window_start = 0.0;  // seconds within the source record
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Per-channel centering and standardization with statistics over the full
// recording. Throws Error("ZeroVariance") when a channel is constant.
Record normalize_record(const Record& record);

// Slices [window_start, window_start + window_duration) out of the record.
// An annotated event is kept (clipped to the window, shifted to window
// coordinates) iff at least 50% of its duration falls inside the window.
Sample extract_sample(const Record& record, const Annotation& annotation,
                      double window_start, double window_duration);

// Fraction of the event's duration that falls inside [win_start, win_end).
double inclusion_fraction(const Event& e, double win_start, double win_end);

}  // namespace evdet
