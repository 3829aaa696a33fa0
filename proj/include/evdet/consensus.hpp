#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evdet/record.hpp"

namespace evdet {

struct ConsensusConfig {
  double kappa = 0.2;       // fraction of scorers that must mark a step
  double resolution = 0.0;  // grid step in seconds; <= 0: one signal sample
};

// y[i] = 1 iff step i's midpoint lies inside any event.
std::vector<std::uint8_t> events_to_binary(const std::vector<Event>& events,
                                           std::size_t steps,
                                           double resolution);

// Maximal runs of 1s become events; inverse of events_to_binary on the grid.
std::vector<Event> binary_to_events(const std::vector<std::uint8_t>& marks,
                                    double resolution, int label);

// Mean of the scorers' binary vectors thresholded at kappa (>= on the exact
// rational count), runs of surviving steps emitted as events. Multi-label
// annotations are merged per label.
Annotation consensus_events(const std::vector<Annotation>& scorers,
                            double kappa, std::size_t steps,
                            double resolution);

}  // namespace evdet
