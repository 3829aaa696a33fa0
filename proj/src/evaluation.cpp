#include "evdet/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace evdet {

using json = nlohmann::json;

MatchCounts match_detections(const std::vector<Detection>& predictions,
                             const std::vector<Event>& truths, double delta) {
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (predictions[a].probability !=
                         predictions[b].probability)
                       return predictions[a].probability >
                              predictions[b].probability;
                     return predictions[a].interval.start <
                            predictions[b].interval.start;
                   });
  std::vector<char> claimed(truths.size(), 0);
  MatchCounts out;
  for (std::size_t pi : order) {
    double best = 0.0;
    std::size_t best_j = truths.size();
    for (std::size_t j = 0; j < truths.size(); ++j) {
      if (claimed[j]) continue;
      const double v = iou(predictions[pi].interval,
                           Interval{truths[j].start(), truths[j].end()});
      if (v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best_j < truths.size() && best >= delta) {
      claimed[best_j] = 1;
      ++out.tp;
    } else {
      ++out.fp;
    }
  }
  out.fn = truths.size() - out.tp;
  return out;
}

MetricsReport evaluate(
    const std::map<std::string, std::vector<Detection>>& predictions,
    const std::vector<Annotation>& annotations, const EvalConfig& cfg,
    std::size_t n_labels) {
  MetricsReport report;
  for (const Annotation& ann : annotations) {
    const auto it = predictions.find(ann.record_id);
    static const std::vector<Detection> kEmpty;
    const auto& preds = it == predictions.end() ? kEmpty : it->second;
    for (int label = 1; label <= int(n_labels); ++label) {
      std::vector<Detection> p;
      for (const auto& d : preds)
        if (d.label == label) p.push_back(d);
      std::vector<Event> t;
      for (const auto& e : ann.events)
        if (e.label == label) t.push_back(e);
      for (double delta : cfg.deltas)
        report.per_record.push_back(
            MetricsCell{ann.record_id, label, delta,
                        match_detections(p, t, delta)});
    }
  }
  // every prediction id must have an annotation row
  for (const auto& [id, _] : predictions) {
    const bool known =
        std::any_of(annotations.begin(), annotations.end(),
                    [&](const Annotation& a) { return a.record_id == id; });
    if (!known) throw Error("MissingRecord", "no annotation for " + id);
  }

  for (int label = 1; label <= int(n_labels); ++label)
    for (double delta : cfg.deltas) {
      MetricsMean m;
      m.label = label;
      m.delta = delta;
      std::size_t n = 0;
      for (const auto& cell : report.per_record) {
        if (cell.label != label || cell.delta != delta) continue;
        m.precision += cell.counts.precision();
        m.recall += cell.counts.recall();
        m.f1 += cell.counts.f1();
        ++n;
      }
      if (n > 0) {
        m.precision /= double(n);
        m.recall /= double(n);
        m.f1 /= double(n);
      }
      report.means.push_back(m);
    }
  return report;
}

DetectionThresholds calibrate_thresholds(
    const DetectorModel<float>& model,
    const std::vector<LabeledRecord>& validation, const DefaultGrid& grid,
    double delta, const EvalConfig& cfg, std::size_t n_labels,
    double nms_iou) {
  if (validation.empty())
    throw Error("InvalidConfig", "validation set is empty");
  // one network pass per record; threshold sweeps reuse the raw candidates
  std::vector<std::vector<Detection>> raw;
  raw.reserve(validation.size());
  for (const auto& lr : validation)
    raw.push_back(raw_candidates(model, lr.record, grid));

  DetectionThresholds best;
  for (int label = 1; label <= int(n_labels); ++label) {
    double best_f1 = -1.0, best_theta = cfg.theta_grid.empty()
                                            ? 1.0
                                            : cfg.theta_grid.front();
    for (double theta : cfg.theta_grid) {
      DetectionThresholds t;
      t.theta[label] = theta;
      double mean_f1 = 0.0;
      for (std::size_t r = 0; r < validation.size(); ++r) {
        auto dets = select_detections(raw[r], t,
                                      validation[r].record.seconds(), nms_iou);
        std::vector<Event> truths;
        for (const auto& e : validation[r].annotation.events)
          if (e.label == label) truths.push_back(e);
        std::vector<Detection> preds;
        for (const auto& d : dets)
          if (d.label == label) preds.push_back(d);
        mean_f1 += match_detections(preds, truths, delta).f1();
      }
      mean_f1 /= double(validation.size());
      if (mean_f1 > best_f1) {  // strict: ties keep the lower theta
        best_f1 = mean_f1;
        best_theta = theta;
      }
    }
    best.theta[label] = best_theta;
  }
  return best;
}

void write_metrics_csv(const MetricsReport& report,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os << "record_id,label,delta,precision,recall,f1,tp,fp,fn\n";
  for (const auto& c : report.per_record)
    os << c.record_id << ',' << c.label << ',' << c.delta << ','
       << c.counts.precision() << ',' << c.counts.recall() << ','
       << c.counts.f1() << ',' << c.counts.tp << ',' << c.counts.fp << ','
       << c.counts.fn << '\n';
}

void write_metrics_summary(const MetricsReport& report,
                           const std::filesystem::path& path) {
  json out = json::array();
  for (const auto& m : report.means)
    out.push_back({{"label", m.label},
                   {"delta", m.delta},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1}});
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os << out.dump(2) << '\n';
}

void write_detections(const std::vector<Detection>& detections,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  for (const auto& d : detections) {
    json j = {{"record_id", d.record_id},
              {"start", d.interval.start},
              {"duration", d.interval.length()},
              {"label", d.label},
              {"prob", d.probability}};
    os << j.dump() << '\n';
  }
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("FileNotFound", path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("MalformedHeader", path.string() + ":" +
                                         std::to_string(lineno) + ": " +
                                         e.what());
    }
    Detection d;
    d.record_id = j.at("record_id").get<std::string>();
    const double start = j.at("start").get<double>();
    d.interval = Interval{start, start + j.at("duration").get<double>()};
    d.label = j.at("label").get<int>();
    d.probability = j.at("prob").get<double>();
    out.push_back(d);
  }
  return out;
}

void write_thresholds(const DetectionThresholds& thresholds,
                      const std::filesystem::path& path) {
  json theta = json::object();
  for (const auto& [label, value] : thresholds.theta)
    theta[std::to_string(label)] = value;
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os << json{{"theta", theta}}.dump(2) << '\n';
}

DetectionThresholds read_thresholds(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("FileNotFound", path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("MalformedHeader", path.string() + ": " + e.what());
  }
  DetectionThresholds t;
  for (const auto& [key, value] : j.at("theta").items())
    t.theta[std::stoi(key)] = value.get<double>();
  return t;
}

}  // namespace evdet
