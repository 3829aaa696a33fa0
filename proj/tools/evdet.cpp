// Command-line pipeline: generate | train | calibrate | detect | evaluate |
// consensus | config init. All outputs are machine readable; errors print a
// single "Category: message" line and exit nonzero.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "evdet/checkpoint.hpp"
#include "evdet/config.hpp"
#include "evdet/consensus.hpp"
#include "evdet/evaluation.hpp"
#include "evdet/inference.hpp"
#include "evdet/io.hpp"
#include "evdet/synth.hpp"
#include "evdet/trainer.hpp"

namespace {

using namespace evdet;
namespace fs = std::filesystem;

struct Global {
  std::string config_path;
  std::int64_t seed = -1;  // -1: take the config's seeds
  std::size_t threads = std::thread::hardware_concurrency();
};

RunConfig load_config(const Global& g) {
  RunConfig cfg = g.config_path.empty() ? default_run_config()
                                        : load_run_config(g.config_path);
  if (g.seed >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(g.seed);
    cfg.synth.seed = static_cast<std::uint64_t>(g.seed);
  }
  cfg.validate();
  return cfg;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<LabeledRecord> load_labeled(const fs::path& data_dir,
                                        const std::vector<std::string>& ids,
                                        bool normalize) {
  const auto annotations = read_annotations(data_dir / "annotations.jsonl");
  std::vector<LabeledRecord> out;
  for (const std::string& id : ids) {
    LabeledRecord lr;
    lr.record = read_record(data_dir / (id + ".dsr"));
    if (normalize) lr.record = normalize_record(lr.record);
    lr.annotation.record_id = id;
    for (const auto& a : annotations)
      if (a.record_id == id) lr.annotation = a;
    out.push_back(std::move(lr));
  }
  return out;
}

int cmd_config_init(const std::string& out) {
  save_run_config(default_run_config(), out);
  return 0;
}

int cmd_generate(const Global& g, const std::string& out_dir,
                 std::size_t n_records) {
  const RunConfig cfg = load_config(g);
  fs::create_directories(out_dir);
  SynthDataset ds = generate_dataset(cfg.synth, n_records, cfg.synth.seed);
  parallel_for(ds.records.size(), g.threads, [&](std::size_t i) {
    write_record(ds.records[i], fs::path(out_dir) / (ds.records[i].id + ".dsr"));
  });
  write_annotations(ds.annotations, fs::path(out_dir) / "annotations.jsonl");
  write_split(ds.split, fs::path(out_dir) / "split.json");
  std::cout << "records=" << ds.records.size() << " out=" << out_dir << "\n";
  return 0;
}

int cmd_train(const Global& g, const std::string& data_dir,
              const std::string& out_dir) {
  const RunConfig cfg = load_config(g);
  fs::create_directories(out_dir);
  const auto split = read_split(fs::path(data_dir) / "split.json");
  const auto train_set = load_labeled(data_dir, split.train, true);
  const auto val_set = load_labeled(data_dir, split.validation, true);

  const NetConfig nc = cfg.net_config();
  const DefaultGrid grid = cfg.grid();
  auto model = init_model<float>(nc, cfg.train.seed);
  const fs::path ckpt = fs::path(out_dir) / "model_best.dsm";
  auto result = train<float>(
      std::move(model), train_set, val_set, grid, cfg.loss, cfg.train,
      [&](const DetectorModel<float>& best, std::size_t epoch) {
        write_checkpoint(best, ckpt);
        std::cout << "best epoch=" << epoch << "\n";
      });

  std::ofstream log(fs::path(out_dir) / "trainlog.csv");
  log << "epoch,train_loc,train_cls,val_loc,val_cls,lr,seconds\n";
  for (const auto& row : result.log)
    log << row.epoch << ',' << row.train_loc << ',' << row.train_cls << ','
        << row.val_loc << ',' << row.val_cls << ',' << row.lr << ','
        << row.seconds << '\n';
  std::cout << "epochs=" << result.log.size()
            << " best_epoch=" << result.best_epoch << " checkpoint=" << ckpt
            << "\n";
  return 0;
}

int cmd_calibrate(const Global& g, const std::string& checkpoint,
                  const std::string& data_dir, double delta,
                  const std::string& out) {
  const RunConfig cfg = load_config(g);
  const auto model = read_checkpoint(checkpoint);
  const auto split = read_split(fs::path(data_dir) / "split.json");
  const auto val_set = load_labeled(data_dir, split.validation, true);
  const double d = delta > 0.0 ? delta : cfg.calibration_delta;
  const auto thresholds = calibrate_thresholds(
      model, val_set, cfg.grid(), d, cfg.eval, model.cfg.L, cfg.nms_iou);
  write_thresholds(thresholds, out);
  for (const auto& [label, theta] : thresholds.theta)
    std::cout << "label=" << label << " theta=" << theta << "\n";
  return 0;
}

int cmd_detect(const Global& g, const std::string& checkpoint,
               const std::string& data_dir,
               std::vector<std::string> record_files,
               const std::string& thresholds_path, const std::string& out) {
  const RunConfig cfg = load_config(g);
  const auto model = read_checkpoint(checkpoint);
  const auto thresholds = read_thresholds(thresholds_path);
  if (record_files.empty()) {
    if (data_dir.empty())
      throw Error("InvalidConfig", "need --data or record files");
    const auto split = read_split(fs::path(data_dir) / "split.json");
    for (const auto& id : split.test)
      record_files.push_back((fs::path(data_dir) / (id + ".dsr")).string());
  }
  const DefaultGrid grid = cfg.grid();
  std::vector<std::vector<Detection>> per_file(record_files.size());
  parallel_for(record_files.size(), g.threads, [&](std::size_t i) {
    const Record rec = normalize_record(read_record(record_files[i]));
    per_file[i] = detect_record(model, rec, grid, thresholds, cfg.nms_iou);
  });
  std::vector<Detection> all;
  for (auto& v : per_file)
    all.insert(all.end(), v.begin(), v.end());
  write_detections(all, out);
  std::cout << "detections=" << all.size() << " out=" << out << "\n";
  return 0;
}

int cmd_evaluate(const Global& g, const std::string& detections_path,
                 const std::string& annotations_path,
                 const std::string& data_dir, const std::string& out_prefix) {
  const RunConfig cfg = load_config(g);
  auto annotations = read_annotations(annotations_path);
  if (!data_dir.empty()) {
    // restrict to the test split
    const auto split = read_split(fs::path(data_dir) / "split.json");
    std::vector<Annotation> kept;
    for (const std::string& id : split.test) {
      Annotation a;
      a.record_id = id;
      for (const auto& ann : annotations)
        if (ann.record_id == id) a = ann;
      kept.push_back(std::move(a));
    }
    annotations = std::move(kept);
  }
  std::map<std::string, std::vector<Detection>> preds;
  for (auto& d : read_detections(detections_path))
    preds[d.record_id].push_back(d);
  const auto report = evaluate(preds, annotations, cfg.eval, cfg.labels);
  write_metrics_csv(report, out_prefix + ".csv");
  write_metrics_summary(report, out_prefix + ".json");
  // F1-vs-delta table per label
  for (const auto& m : report.means)
    std::cout << "label=" << m.label << " delta=" << m.delta
              << " f1=" << m.f1 << "\n";
  return 0;
}

int cmd_consensus(const Global& g, const std::vector<std::string>& files,
                  double kappa, double duration, double resolution,
                  const std::string& out) {
  const RunConfig cfg = load_config(g);
  if (resolution <= 0.0) resolution = 1.0 / cfg.sample_rate;
  std::vector<Annotation> scorers;
  for (const auto& f : files) {
    auto anns = read_annotations(f);
    if (anns.empty()) {
      Annotation empty;
      scorers.push_back(empty);
    } else {
      scorers.push_back(anns.front());
    }
  }
  const auto steps = static_cast<std::size_t>(
      std::llround(duration / resolution));
  Annotation merged = consensus_events(scorers, kappa, steps, resolution);
  if (merged.record_id.empty() && !scorers.empty())
    for (const auto& s : scorers)
      if (!s.record_id.empty()) merged.record_id = s.record_id;
  write_annotations({merged}, out);
  std::cout << "events=" << merged.events.size() << " out=" << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot event detector for multichannel physiological "
               "time series"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config_path, "run configuration JSON");
  app.add_option("--seed", g.seed, "override the config seeds");
  app.add_option("--threads", g.threads, "worker parallelism cap");

  auto* config = app.add_subcommand("config", "configuration helpers");
  auto* config_init = config->add_subcommand("init", "write a default config");
  std::string config_out = "config.json";
  config_init->add_option("out", config_out, "output path");

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  std::string gen_out = "data";
  std::size_t gen_records = 10;
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--records", gen_records, "number of records");

  auto* train_cmd = app.add_subcommand("train", "train a detector");
  std::string train_data, train_out = "run";
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory");

  auto* calibrate = app.add_subcommand("calibrate",
                                       "grid-search detection thresholds");
  std::string cal_ckpt, cal_data, cal_out = "thresholds.json";
  double cal_delta = 0.0;
  calibrate->add_option("--checkpoint", cal_ckpt)->required();
  calibrate->add_option("--data", cal_data)->required();
  calibrate->add_option("--delta", cal_delta, "IoU criterion");
  calibrate->add_option("--out", cal_out);

  auto* detect = app.add_subcommand("detect", "detect events in records");
  std::string det_ckpt, det_data, det_thresholds, det_out = "detections.jsonl";
  std::vector<std::string> det_records;
  detect->add_option("--checkpoint", det_ckpt)->required();
  detect->add_option("--thresholds", det_thresholds)->required();
  detect->add_option("--data", det_data, "dataset directory (test split)");
  detect->add_option("--out", det_out);
  detect->add_option("records", det_records, "explicit record files");

  auto* evaluate = app.add_subcommand("evaluate", "by-event metrics");
  std::string ev_det, ev_ann, ev_data, ev_out = "metrics";
  evaluate->add_option("--detections", ev_det)->required();
  evaluate->add_option("--annotations", ev_ann)->required();
  evaluate->add_option("--data", ev_data, "restrict to the test split");
  evaluate->add_option("--out-prefix", ev_out);

  auto* consensus = app.add_subcommand("consensus",
                                       "merge scorers' annotations");
  std::vector<std::string> con_files;
  double con_kappa = 0.2, con_duration = 0.0, con_resolution = 0.0;
  std::string con_out = "consensus.jsonl";
  consensus->add_option("files", con_files, "scorer annotation files")
      ->required();
  consensus->add_option("--kappa", con_kappa, "consensus level");
  consensus->add_option("--duration", con_duration, "record duration, seconds")
      ->required();
  consensus->add_option("--resolution", con_resolution,
                        "binary grid step, seconds");
  consensus->add_option("--out", con_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_init->parsed()) return cmd_config_init(config_out);
    if (generate->parsed()) return cmd_generate(g, gen_out, gen_records);
    if (train_cmd->parsed()) return cmd_train(g, train_data, train_out);
    if (calibrate->parsed())
      return cmd_calibrate(g, cal_ckpt, cal_data, cal_delta, cal_out);
    if (detect->parsed())
      return cmd_detect(g, det_ckpt, det_data, det_records, det_thresholds,
                        det_out);
    if (evaluate->parsed())
      return cmd_evaluate(g, ev_det, ev_ann, ev_data, ev_out);
    if (consensus->parsed())
      return cmd_consensus(g, con_files, con_kappa, con_duration,
                           con_resolution, con_out);
    std::cerr << "InvalidConfig: no subcommand\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Internal: " << e.what() << "\n";
    return 1;
  }
}
