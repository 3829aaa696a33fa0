#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evdet/record.hpp"

namespace evdet {

// Morphology of one planted event class.
struct EventMix {
  int label = 1;
  double rate_per_minute = 0.0;
  double min_duration = 0.5;  // seconds
  double max_duration = 2.0;
  double min_amplitude = 2.0;  // multiples of the background std
  double max_amplitude = 3.0;
  enum class Kind { kSpindle, kKComplex, kArousal } kind = Kind::kSpindle;
};

struct SynthConfig {
  double sample_rate = 128.0;
  double record_seconds = 600.0;
  std::size_t channels = 1;
  std::vector<EventMix> mix = default_mix();
  std::uint64_t seed = 0;

  static std::vector<EventMix> default_mix() {
    return {
        {1, 3.0, 0.5, 2.0, 2.0, 3.0, EventMix::Kind::kSpindle},
        {2, 2.0, 0.7, 0.9, 3.0, 5.0, EventMix::Kind::kKComplex},
        {3, 0.5, 5.0, 15.0, 3.0, 3.0, EventMix::Kind::kArousal},
    };
  }
};

// One record of 1/f-shaped background noise with non-overlapping planted
// events: 11-16 Hz Hann-windowed bursts (spindle-like), ~0.8 s biphasic
// transients (K-complex-like), and broadband variance bumps (arousal-like).
std::pair<Record, Annotation> generate_record(const SynthConfig& cfg,
                                              const std::string& id);

struct SynthDataset {
  std::vector<Record> records;
  std::vector<Annotation> annotations;
  DatasetSplit split;  // 60 / 20 / 20
};

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t n_records,
                              std::uint64_t seed);

}  // namespace evdet
