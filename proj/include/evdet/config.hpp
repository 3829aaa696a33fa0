#pragma once

#include <filesystem>

#include "evdet/evaluation.hpp"
#include "evdet/geometry.hpp"
#include "evdet/loss.hpp"
#include "evdet/network.hpp"
#include "evdet/synth.hpp"
#include "evdet/trainer.hpp"

namespace evdet {

// One configuration document for the whole pipeline. The input length T and
// the default count Nd are derived (T = window_duration * sample_rate; Nd
// from the default-event grid), everything else is explicit.
struct RunConfig {
  double sample_rate = 64.0;
  double window_duration = 20.0;
  std::size_t channels = 1;
  std::size_t blocks = 6;  // K
  std::size_t labels = 2;  // L

  double default_duration = 1.0;
  double default_overlap = 0.75;

  LossConfig loss;
  TrainConfig train;
  SynthConfig synth;
  EvalConfig eval;
  double calibration_delta = 0.3;
  double nms_iou = 0.4;

  NetConfig net_config() const;
  DefaultGrid grid() const;
  void validate() const;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace evdet
