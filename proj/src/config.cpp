#include "evdet/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace evdet {

using json = nlohmann::json;

NetConfig RunConfig::net_config() const {
  NetConfig nc;
  nc.C = channels;
  nc.T = static_cast<std::size_t>(
      std::llround(window_duration * sample_rate));
  nc.K = blocks;
  nc.L = labels;
  nc.Nd = grid().size();
  return nc;
}

DefaultGrid RunConfig::grid() const {
  return build_grid(window_duration, default_duration, default_overlap);
}

void RunConfig::validate() const {
  net_config().validate();
  if (!(train.positive_fraction >= 0.0 && train.positive_fraction <= 1.0))
    throw Error("InvalidConfig", "positive_fraction must be in [0,1]");
  if (train.lr <= 0.0) throw Error("InvalidConfig", "lr must be positive");
  if (!(train.momentum >= 0.0 && train.momentum < 1.0))
    throw Error("InvalidConfig", "momentum must be in [0,1)");
  if (std::abs(window_duration * sample_rate -
               double(net_config().T)) > 1e-6)
    throw Error("InvalidConfig",
                "window_duration * sample_rate must be integral");
  if (synth.sample_rate != sample_rate)
    throw Error("InvalidConfig",
                "synth sample rate differs from pipeline sample rate");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.train.max_epochs = 50;
  cfg.train.window_duration = cfg.window_duration;
  cfg.synth.sample_rate = cfg.sample_rate;
  cfg.synth.mix = {
      {1, 3.0, 0.5, 2.0, 2.0, 3.0, EventMix::Kind::kSpindle},
      {2, 2.0, 0.7, 0.9, 3.0, 5.0, EventMix::Kind::kKComplex},
  };
  return cfg;
}

namespace {

json mix_to_json(const std::vector<EventMix>& mix) {
  json out = json::array();
  for (const auto& m : mix) {
    const char* kind = m.kind == EventMix::Kind::kSpindle    ? "spindle"
                       : m.kind == EventMix::Kind::kKComplex ? "kcomplex"
                                                             : "arousal";
    out.push_back({{"label", m.label},
                   {"rate_per_minute", m.rate_per_minute},
                   {"min_duration", m.min_duration},
                   {"max_duration", m.max_duration},
                   {"min_amplitude", m.min_amplitude},
                   {"max_amplitude", m.max_amplitude},
                   {"kind", kind}});
  }
  return out;
}

std::vector<EventMix> mix_from_json(const json& j) {
  std::vector<EventMix> out;
  for (const auto& e : j) {
    EventMix m;
    m.label = e.at("label").get<int>();
    m.rate_per_minute = e.at("rate_per_minute").get<double>();
    m.min_duration = e.at("min_duration").get<double>();
    m.max_duration = e.at("max_duration").get<double>();
    m.min_amplitude = e.at("min_amplitude").get<double>();
    m.max_amplitude = e.at("max_amplitude").get<double>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "spindle")
      m.kind = EventMix::Kind::kSpindle;
    else if (kind == "kcomplex")
      m.kind = EventMix::Kind::kKComplex;
    else if (kind == "arousal")
      m.kind = EventMix::Kind::kArousal;
    else
      throw Error("InvalidConfig", "unknown event kind '" + kind + "'");
    out.push_back(m);
  }
  return out;
}

}  // namespace

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  json j = {
      {"sample_rate", cfg.sample_rate},
      {"window_duration", cfg.window_duration},
      {"channels", cfg.channels},
      {"blocks", cfg.blocks},
      {"labels", cfg.labels},
      {"default_duration", cfg.default_duration},
      {"default_overlap", cfg.default_overlap},
      {"loss",
       {{"neg_pos_ratio", cfg.loss.neg_pos_ratio},
        {"min_negatives", cfg.loss.min_negatives},
        {"eta", cfg.loss.match.eta}}},
      {"train",
       {{"lr", cfg.train.lr},
        {"momentum", cfg.train.momentum},
        {"batch_size", cfg.train.batch_size},
        {"max_epochs", cfg.train.max_epochs},
        {"positive_fraction", cfg.train.positive_fraction},
        {"early_stop_patience", cfg.train.early_stop_patience},
        {"plateau_patience", cfg.train.plateau_patience},
        {"lr_decay_factor", cfg.train.lr_decay_factor},
        {"steps_per_epoch", cfg.train.steps_per_epoch},
        {"seed", cfg.train.seed}}},
      {"synth",
       {{"sample_rate", cfg.synth.sample_rate},
        {"record_seconds", cfg.synth.record_seconds},
        {"channels", cfg.synth.channels},
        {"mix", mix_to_json(cfg.synth.mix)},
        {"seed", cfg.synth.seed}}},
      {"eval",
       {{"deltas", cfg.eval.deltas},
        {"theta_grid", cfg.eval.theta_grid}}},
      {"calibration_delta", cfg.calibration_delta},
      {"nms_iou", cfg.nms_iou},
  };
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os << j.dump(2) << '\n';
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("FileNotFound", path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("InvalidConfig", path.string() + ": " + e.what());
  }
  RunConfig cfg = default_run_config();
  try {
    cfg.sample_rate = j.at("sample_rate").get<double>();
    cfg.window_duration = j.at("window_duration").get<double>();
    cfg.channels = j.at("channels").get<std::size_t>();
    cfg.blocks = j.at("blocks").get<std::size_t>();
    cfg.labels = j.at("labels").get<std::size_t>();
    cfg.default_duration = j.at("default_duration").get<double>();
    cfg.default_overlap = j.at("default_overlap").get<double>();
    const auto& jl = j.at("loss");
    cfg.loss.neg_pos_ratio = jl.at("neg_pos_ratio").get<double>();
    cfg.loss.min_negatives = jl.at("min_negatives").get<std::size_t>();
    cfg.loss.match.eta = jl.at("eta").get<double>();
    const auto& jt = j.at("train");
    cfg.train.lr = jt.at("lr").get<double>();
    cfg.train.momentum = jt.at("momentum").get<double>();
    cfg.train.batch_size = jt.at("batch_size").get<std::size_t>();
    cfg.train.max_epochs = jt.at("max_epochs").get<std::size_t>();
    cfg.train.positive_fraction = jt.at("positive_fraction").get<double>();
    cfg.train.early_stop_patience =
        jt.at("early_stop_patience").get<std::size_t>();
    cfg.train.plateau_patience = jt.at("plateau_patience").get<std::size_t>();
    cfg.train.lr_decay_factor = jt.at("lr_decay_factor").get<double>();
    cfg.train.steps_per_epoch = jt.at("steps_per_epoch").get<std::size_t>();
    cfg.train.seed = jt.at("seed").get<std::uint64_t>();
    cfg.train.window_duration = cfg.window_duration;
    const auto& js = j.at("synth");
    cfg.synth.sample_rate = js.at("sample_rate").get<double>();
    cfg.synth.record_seconds = js.at("record_seconds").get<double>();
    cfg.synth.channels = js.at("channels").get<std::size_t>();
    cfg.synth.mix = mix_from_json(js.at("mix"));
    cfg.synth.seed = js.at("seed").get<std::uint64_t>();
    const auto& je = j.at("eval");
    cfg.eval.deltas = je.at("deltas").get<std::vector<double>>();
    cfg.eval.theta_grid = je.at("theta_grid").get<std::vector<double>>();
    cfg.calibration_delta = j.at("calibration_delta").get<double>();
    cfg.nms_iou = j.at("nms_iou").get<double>();
  } catch (const json::exception& e) {
    throw Error("InvalidConfig", path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace evdet
