#include "evdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace evdet {
namespace {

// 1/f-shaped noise from summed octave noises: white noise held at
// progressively coarser rates, equal per-octave power.
std::vector<float> pink_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> acc(n, 0.0);
  for (std::size_t octave = 0; octave < 6; ++octave) {
    const std::size_t hold = std::size_t(1) << octave;
    double value = gauss(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i % hold == 0) value = gauss(rng);
      acc[i] += value;
    }
  }
  // normalize to unit variance
  double mean = 0.0;
  for (double v : acc) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : acc) var += (v - mean) * (v - mean);
  var /= double(n);
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>((acc[i] - mean) * scale);
  return out;
}

bool overlaps_any(const std::vector<Event>& events, double start, double end) {
  for (const Event& e : events)
    if (start < e.end() && e.start() < end) return true;
  return false;
}

}  // namespace

std::pair<Record, Annotation> generate_record(const SynthConfig& cfg,
                                              const std::string& id) {
  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<std::size_t>(
      std::llround(cfg.record_seconds * cfg.sample_rate));

  Record rec;
  rec.id = id;
  rec.sample_rate = cfg.sample_rate;
  rec.data.resize(cfg.channels);
  rec.channel_names.resize(cfg.channels);
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    rec.channel_names[c] = "ch" + std::to_string(c);
    rec.data[c] = pink_noise(n, rng);
  }

  Annotation ann;
  ann.record_id = id;
  const double minutes = cfg.record_seconds / 60.0;

  for (const EventMix& mix : cfg.mix) {
    if (mix.rate_per_minute <= 0.0) continue;
    std::poisson_distribution<int> howmany(mix.rate_per_minute * minutes);
    const int count = howmany(rng);
    std::uniform_real_distribution<double> dur_d(mix.min_duration,
                                                 mix.max_duration);
    std::uniform_real_distribution<double> amp_d(mix.min_amplitude,
                                                 mix.max_amplitude);
    for (int e = 0; e < count; ++e) {
      const double dur = dur_d(rng);
      std::uniform_real_distribution<double> start_d(
          0.0, cfg.record_seconds - dur);
      double start = 0.0;
      bool placed = false;
      for (int attempt = 0; attempt < 10000; ++attempt) {
        start = start_d(rng);
        if (!overlaps_any(ann.events, start, start + dur)) {
          placed = true;
          break;
        }
      }
      if (!placed)
        throw Error("PlacementFailure",
                    "cannot fit events without overlap at the requested "
                    "density");
      const double amp = amp_d(rng);
      const auto i0 =
          static_cast<std::size_t>(std::llround(start * cfg.sample_rate));
      const auto len =
          static_cast<std::size_t>(std::llround(dur * cfg.sample_rate));
      const auto i1 = std::min(i0 + len, n);

      switch (mix.kind) {
        case EventMix::Kind::kSpindle: {
          std::uniform_real_distribution<double> freq_d(11.0, 16.0);
          const double freq = freq_d(rng);
          std::uniform_real_distribution<double> phase_d(
              0.0, 2.0 * std::numbers::pi);
          const double phase = phase_d(rng);
          for (std::size_t c = 0; c < cfg.channels; ++c)
            for (std::size_t i = i0; i < i1; ++i) {
              const double u = double(i - i0) / double(i1 - i0);
              const double hann =
                  0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
              const double t = double(i) / cfg.sample_rate;
              rec.data[c][i] += static_cast<float>(
                  amp * hann *
                  std::sin(2.0 * std::numbers::pi * freq * t + phase));
            }
          break;
        }
        case EventMix::Kind::kKComplex: {
          // one negative then one positive half-wave over the event extent
          for (std::size_t c = 0; c < cfg.channels; ++c)
            for (std::size_t i = i0; i < i1; ++i) {
              const double u = double(i - i0) / double(i1 - i0);
              double shape;
              if (u < 0.5)
                shape = -std::sin(std::numbers::pi * (u / 0.5));
              else
                shape = 0.6 * std::sin(std::numbers::pi * ((u - 0.5) / 0.5));
              rec.data[c][i] += static_cast<float>(amp * shape);
            }
          break;
        }
        case EventMix::Kind::kArousal: {
          // broadband variance step: extra noise so total variance triples
          std::normal_distribution<double> gauss(0.0, std::sqrt(2.0));
          for (std::size_t c = 0; c < cfg.channels; ++c)
            for (std::size_t i = i0; i < i1; ++i)
              rec.data[c][i] += static_cast<float>(gauss(rng));
          break;
        }
      }
      ann.events.push_back(Event::from_start(start, dur, mix.label));
    }
  }
  ann.sort_events();
  return {std::move(rec), std::move(ann)};
}

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t n_records,
                              std::uint64_t seed) {
  if (n_records < 3)
    throw Error("InvalidConfig", "need at least 3 records for a split");
  SynthDataset ds;
  std::mt19937_64 master(seed);
  for (std::size_t r = 0; r < n_records; ++r) {
    SynthConfig one = cfg;
    one.seed = master();  // per-record seed derived from the master seed
    const std::string id = "synth" + std::to_string(r);
    auto [rec, ann] = generate_record(one, id);
    ds.records.push_back(std::move(rec));
    ds.annotations.push_back(std::move(ann));
  }
  std::size_t n_train = std::max<std::size_t>(1, (n_records * 6) / 10);
  std::size_t n_val =
      std::max<std::size_t>(1, (n_records * 2) / 10);
  if (n_train + n_val >= n_records) n_train = n_records - n_val - 1;
  for (std::size_t r = 0; r < n_records; ++r) {
    const std::string& id = ds.records[r].id;
    if (r < n_train)
      ds.split.train.push_back(id);
    else if (r < n_train + n_val)
      ds.split.validation.push_back(id);
    else
      ds.split.test.push_back(id);
  }
  return ds;
}

}  // namespace evdet
