#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "evdet/inference.hpp"

using namespace evdet;

namespace {

Record noise_record(double seconds, double rate, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Record r;
  r.id = "r";
  r.sample_rate = rate;
  r.channel_names = {"c0"};
  r.data.resize(1);
  r.data[0].resize(std::size_t(seconds * rate));
  for (auto& v : r.data[0]) v = d(rng);
  return r;
}

// A model whose class head depends on the input through the conv stack, so
// detections differ across windows; zero thresholds let everything through.
DetectorModel<float> small_model(std::size_t labels) {
  NetConfig cfg{1, 640, 5, labels, 80};
  return init_model<float>(cfg, 55);
}

}  // namespace

TEST_CASE("tiling starts and padding") {
  const Record r60 = noise_record(60.0, 32.0, 1);
  auto tiles = tile_record(r60, 20.0);
  REQUIRE(tiles.size() == 3);
  CHECK(tiles[0].window_start == doctest::Approx(0.0));
  CHECK(tiles[1].window_start == doctest::Approx(20.0));
  CHECK(tiles[2].window_start == doctest::Approx(40.0));
  for (const auto& t : tiles) {
    CHECK(!t.padded);
    CHECK(t.data.size() == 640);
  }

  const Record r50 = noise_record(50.0, 32.0, 2);
  auto padded = tile_record(r50, 20.0);
  REQUIRE(padded.size() == 3);
  CHECK(padded[2].padded);
  CHECK(padded[2].valid_seconds == doctest::Approx(10.0));
  // the padded tail is zero
  for (std::size_t i = 320; i < 640; ++i) CHECK(padded[2].data[i] == 0.0f);

  CHECK_THROWS_WITH_AS(tile_record(noise_record(5.0, 32.0, 3), 20.0),
                       doctest::Contains("RecordTooShort"), Error);
}

TEST_CASE("overlapped tiling with an explicit stride") {
  const Record r = noise_record(60.0, 32.0, 4);
  auto tiles = tile_record(r, 20.0, 10.0);
  REQUIRE(tiles.size() == 5);
  CHECK(tiles[1].window_start == doctest::Approx(10.0));
  CHECK(tiles[4].window_start == doctest::Approx(40.0));
}

TEST_CASE("detect_record output respects record bounds and thresholds") {
  auto model = small_model(1);
  Record rec = noise_record(70.0, 32.0, 5);
  DefaultGrid grid = build_grid(20.0, 1.0, 0.75);

  DetectionThresholds open;
  open.theta[1] = 0.05;
  auto dets = detect_record(model, rec, grid, open, 0.4);
  for (const auto& d : dets) {
    CHECK(d.interval.start >= 0.0);
    CHECK(d.interval.end <= doctest::Approx(70.0));
    CHECK(d.probability >= 0.05);
    CHECK(d.label == 1);
  }
  for (std::size_t i = 1; i < dets.size(); ++i)
    CHECK(dets[i - 1].interval.start <= dets[i].interval.start);
  // per-label pairwise IoU stays under the NMS threshold
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = i + 1; j < dets.size(); ++j)
      CHECK(iou(dets[i].interval, dets[j].interval) < 0.4);

  // float softmax can saturate at exactly 1, so "no candidate passes" needs
  // a threshold strictly above every representable probability
  DetectionThresholds closed;
  closed.theta[1] = std::nextafter(1.0, 2.0);
  CHECK(detect_record(model, rec, grid, closed, 0.4).empty());
}

TEST_CASE("detection is deterministic") {
  auto model = small_model(2);
  Record rec = noise_record(60.0, 32.0, 6);
  DefaultGrid grid = build_grid(20.0, 1.0, 0.75);
  DetectionThresholds th;
  th.theta[1] = 0.3;
  th.theta[2] = 0.3;
  auto a = detect_record(model, rec, grid, th, 0.4);
  auto b = detect_record(model, rec, grid, th, 0.4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].interval.start == b[i].interval.start);
    CHECK(a[i].probability == b[i].probability);
    CHECK(a[i].label == b[i].label);
  }
}

TEST_CASE("candidates of different labels never suppress each other") {
  std::vector<Detection> cands;
  cands.push_back({"r", {1.0, 2.0}, 1, 0.9});
  cands.push_back({"r", {1.05, 2.05}, 2, 0.8});  // high IoU, other label
  cands.push_back({"r", {1.1, 2.1}, 1, 0.7});    // suppressed by the first
  DetectionThresholds th;
  th.theta[1] = 0.1;
  th.theta[2] = 0.1;
  auto out = select_detections(cands, th, 10.0, 0.4);
  REQUIRE(out.size() == 2);
  CHECK(out[0].label == 1);
  CHECK(out[0].probability == doctest::Approx(0.9));
  CHECK(out[1].label == 2);
}

TEST_CASE("labels without a threshold entry are rejected entirely") {
  std::vector<Detection> cands;
  cands.push_back({"r", {1.0, 2.0}, 1, 0.99});
  DetectionThresholds th;  // empty: no label passes
  CHECK(select_detections(cands, th, 10.0, 0.4).empty());
}

TEST_CASE("selection clips to the record extent") {
  std::vector<Detection> cands;
  cands.push_back({"r", {-0.5, 1.5}, 1, 0.9});
  cands.push_back({"r", {9.0, 12.0}, 1, 0.8});
  cands.push_back({"r", {10.5, 11.0}, 1, 0.7});  // entirely outside
  DetectionThresholds th;
  th.theta[1] = 0.1;
  auto out = select_detections(cands, th, 10.0, 0.4);
  REQUIRE(out.size() == 2);
  CHECK(out[0].interval.start == doctest::Approx(0.0));
  CHECK(out[1].interval.end == doctest::Approx(10.0));
}

TEST_CASE("duplicate candidates from overlapped tiling collapse under NMS") {
  auto model = small_model(1);
  Record rec = noise_record(60.0, 32.0, 7);
  DefaultGrid grid = build_grid(20.0, 1.0, 0.75);
  DetectionThresholds th;
  th.theta[1] = 0.05;
  // overlapped tiling produces near-duplicates; the pooled NMS output must
  // still be pairwise below the threshold
  auto dets = detect_record(model, rec, grid, th, 0.4, 5.0);
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = i + 1; j < dets.size(); ++j)
      CHECK(iou(dets[i].interval, dets[j].interval) < 0.4);
}
