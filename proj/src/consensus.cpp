#include "evdet/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace evdet {

std::vector<std::uint8_t> events_to_binary(const std::vector<Event>& events,
                                           std::size_t steps,
                                           double resolution) {
  const double span = double(steps) * resolution;
  for (const Event& e : events)
    if (e.start() < -1e-9 || e.end() > span + 1e-9)
      throw Error("OutOfRange", "event outside the binary grid");
  std::vector<std::uint8_t> y(steps, 0);
  for (const Event& e : events) {
    // midpoint membership
    auto first = static_cast<std::ptrdiff_t>(
        std::ceil(e.start() / resolution - 0.5));
    auto last = static_cast<std::ptrdiff_t>(
        std::floor(e.end() / resolution - 0.5));
    first = std::max<std::ptrdiff_t>(first, 0);
    last = std::min<std::ptrdiff_t>(last, std::ptrdiff_t(steps) - 1);
    for (std::ptrdiff_t i = first; i <= last; ++i) {
      const double mid = (double(i) + 0.5) * resolution;
      if (mid >= e.start() && mid < e.end()) y[std::size_t(i)] = 1;
    }
  }
  return y;
}

std::vector<Event> binary_to_events(const std::vector<std::uint8_t>& marks,
                                    double resolution, int label) {
  std::vector<Event> out;
  std::size_t i = 0;
  while (i < marks.size()) {
    if (!marks[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < marks.size() && marks[j]) ++j;
    const double start = double(i) * resolution;
    const double dur = double(j - i) * resolution;
    out.push_back(Event::from_start(start, dur, label));
    i = j;
  }
  return out;
}

Annotation consensus_events(const std::vector<Annotation>& scorers,
                            double kappa, std::size_t steps,
                            double resolution) {
  if (scorers.empty())
    throw Error("InvalidConfig", "consensus needs at least one scorer");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw Error("InvalidConfig", "kappa must be in (0, 1]");

  std::set<int> labels;
  for (const auto& a : scorers)
    for (const auto& e : a.events) labels.insert(e.label);

  Annotation out;
  out.record_id = scorers.front().record_id;
  const std::size_t ns = scorers.size();
  for (int label : labels) {
    std::vector<std::size_t> counts(steps, 0);
    for (const auto& a : scorers) {
      std::vector<Event> mine;
      for (const auto& e : a.events)
        if (e.label == label) mine.push_back(e);
      const auto y = events_to_binary(mine, steps, resolution);
      for (std::size_t i = 0; i < steps; ++i) counts[i] += y[i];
    }
    // mean >= kappa, compared on the exact rational count / ns
    std::vector<std::uint8_t> marks(steps, 0);
    for (std::size_t i = 0; i < steps; ++i)
      marks[i] = double(counts[i]) + 1e-9 >= kappa * double(ns) ? 1 : 0;
    for (const Event& e : binary_to_events(marks, resolution, label))
      out.events.push_back(e);
  }
  out.sort_events();
  return out;
}

}  // namespace evdet
