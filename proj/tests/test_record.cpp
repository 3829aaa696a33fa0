#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "evdet/io.hpp"
#include "evdet/record.hpp"

using namespace evdet;
namespace fs = std::filesystem;

namespace {

Record make_record(std::size_t channels, std::size_t samples, double rate,
                   unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.3f, 2.0f);
  Record r;
  r.id = "r" + std::to_string(seed);
  r.sample_rate = rate;
  for (std::size_t c = 0; c < channels; ++c) {
    r.channel_names.push_back("ch" + std::to_string(c));
    std::vector<float> row(samples);
    for (auto& v : row) v = d(rng);
    r.data.push_back(std::move(row));
  }
  return r;
}

struct TempDir {
  fs::path p;
  TempDir() {
    p = fs::temp_directory_path() /
        ("evdet_rec_" + std::to_string(std::random_device{}()));
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
};

}  // namespace

TEST_CASE("normalize_record standardizes each channel") {
  Record r = make_record(2, 4096, 100.0, 1);
  Record n = normalize_record(r);
  for (const auto& row : n.data) {
    double mean = 0.0;
    for (float v : row) mean += v;
    mean /= double(row.size());
    double var = 0.0;
    for (float v : row) var += (v - mean) * (v - mean);
    var /= double(row.size());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
  // idempotent
  Record n2 = normalize_record(n);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n.data[c].size(); ++i)
      CHECK(n2.data[c][i] == doctest::Approx(n.data[c][i]).epsilon(1e-6));
}

TEST_CASE("normalize_record rejects a constant channel") {
  Record r;
  r.id = "flat";
  r.sample_rate = 10.0;
  r.channel_names = {"c0"};
  r.data = {{5.0f, 5.0f, 5.0f, 5.0f}};
  CHECK_THROWS_WITH_AS(normalize_record(r), doctest::Contains("ZeroVariance"),
                       Error);
}

TEST_CASE("already standardized channel is a fixed point") {
  Record r;
  r.sample_rate = 4.0;
  r.channel_names = {"c0"};
  r.data = {{}};
  for (int i = 0; i < 64; ++i) r.data[0].push_back(i % 2 ? 1.0f : -1.0f);
  Record n = normalize_record(r);
  for (std::size_t i = 0; i < n.data[0].size(); ++i)
    CHECK(std::abs(n.data[0][i] - r.data[0][i]) < 1e-9);
}

TEST_CASE("extract_sample applies the 50% inclusion rule") {
  Record r = make_record(1, 30 * 10, 10.0, 2);  // 30 s at 10 Hz
  Annotation a;
  a.record_id = r.id;
  a.events = {
      Event::from_start(2.0, 1.0, 1),   // fully inside
      Event::from_start(19.6, 1.0, 1),  // 40% inside [0,20) -> dropped
      Event::from_start(19.2, 1.0, 2),  // 80% inside -> kept, clipped
  };
  a.sort_events();
  Sample s = extract_sample(r, a, 0.0, 20.0);
  REQUIRE(s.data.size() == 1);
  CHECK(s.data[0].size() == 200);
  REQUIRE(s.events.size() == 2);
  CHECK(s.events[0].center == doctest::Approx(2.5));
  CHECK(s.events[0].duration == doctest::Approx(1.0));
  // clipped to end at the window edge: [19.2, 20.0)
  CHECK(s.events[1].label == 2);
  CHECK(s.events[1].start() == doctest::Approx(19.2));
  CHECK(s.events[1].end() == doctest::Approx(20.0));
}

TEST_CASE("extract_sample shifts events to window coordinates") {
  Record r = make_record(1, 400, 10.0, 3);
  Annotation a;
  a.record_id = r.id;
  a.events = {Event::from_start(12.0, 2.0, 1)};
  Sample s = extract_sample(r, a, 10.0, 20.0);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].start() == doctest::Approx(2.0));
  CHECK(s.window_start == doctest::Approx(10.0));
  // signal slice matches the source
  CHECK(s.data[0][0] == r.data[0][100]);
}

TEST_CASE("extract_sample rejects out-of-bounds windows") {
  Record r = make_record(1, 100, 10.0, 4);  // 10 s
  Annotation a;
  CHECK_THROWS_WITH_AS(extract_sample(r, a, 5.0, 20.0),
                       doctest::Contains("OutOfBounds"), Error);
}

TEST_CASE("inclusion fraction never below half in extracted samples") {
  std::mt19937 rng(5);
  Record r = make_record(1, 1200, 10.0, 6);
  std::uniform_real_distribution<double> start_d(0.0, 110.0);
  std::uniform_real_distribution<double> dur_d(0.2, 8.0);
  for (int trial = 0; trial < 200; ++trial) {
    Annotation a;
    a.record_id = r.id;
    for (int e = 0; e < 5; ++e) {
      const double d = dur_d(rng);
      const double st = std::min(start_d(rng), 120.0 - d);
      a.events.push_back(Event::from_start(st, d, 1));
    }
    a.sort_events();
    const double w0 = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
    Sample s = extract_sample(r, a, w0, 20.0);
    for (const Event& kept : s.events) {
      // some source event must explain the kept one and pass the rule
      bool found = false;
      for (const Event& src : a.events) {
        if (src.label != kept.label) continue;
        const double frac = inclusion_fraction(src, w0, w0 + 20.0);
        const double clip_start = std::max(src.start() - w0, 0.0);
        const double clip_end = std::min(src.end() - w0, 20.0);
        if (std::abs(clip_start - kept.start()) < 1e-9 &&
            std::abs(clip_end - kept.end()) < 1e-9 && frac >= 0.5)
          found = true;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("record files round trip bit-identically") {
  TempDir dir;
  Record r = make_record(3, 777, 123.5, 7);
  const fs::path path = dir.p / "r7.dsr";
  write_record(r, path);
  Record back = read_record(path);
  CHECK(back.id == "r7");
  CHECK(back.sample_rate == r.sample_rate);
  CHECK(back.channel_names == r.channel_names);
  CHECK(back.data == r.data);
}

TEST_CASE("record reader rejects damaged files") {
  TempDir dir;
  Record r = make_record(1, 16, 10.0, 8);
  const fs::path good = dir.p / "good.dsr";
  write_record(r, good);

  auto bytes = [&](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  };
  auto rewrite = [&](const fs::path& p, const std::vector<char>& b) {
    std::ofstream os(p, std::ios::binary);
    os.write(b.data(), std::streamsize(b.size()));
  };

  auto b = bytes(good);
  auto wrong_magic = b;
  wrong_magic[0] = 'X';
  rewrite(dir.p / "bad1.dsr", wrong_magic);
  CHECK_THROWS_WITH_AS(read_record(dir.p / "bad1.dsr"),
                       doctest::Contains("MalformedHeader"), Error);

  auto wrong_version = b;
  wrong_version[3] = '2';
  rewrite(dir.p / "bad2.dsr", wrong_version);
  CHECK_THROWS_WITH_AS(read_record(dir.p / "bad2.dsr"),
                       doctest::Contains("UnknownVersion"), Error);

  auto truncated = b;
  truncated.resize(b.size() - 8);
  rewrite(dir.p / "bad3.dsr", truncated);
  CHECK_THROWS_WITH_AS(read_record(dir.p / "bad3.dsr"),
                       doctest::Contains("TruncatedPayload"), Error);
}

TEST_CASE("annotation files round trip and enforce labels") {
  TempDir dir;
  Annotation a1;
  a1.record_id = "a";
  a1.events = {Event::from_start(1.0, 0.5, 1), Event::from_start(3.0, 2.0, 2)};
  Annotation a2;
  a2.record_id = "b";
  a2.events = {Event::from_start(0.25, 1.0, 1)};
  const fs::path path = dir.p / "ann.jsonl";
  write_annotations({a1, a2}, path);
  auto back = read_annotations(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].record_id == "a");
  REQUIRE(back[0].events.size() == 2);
  CHECK(back[0].events[0].start() == doctest::Approx(1.0));
  CHECK(back[0].events[1].label == 2);
  CHECK(back[1].events[0].duration == doctest::Approx(1.0));

  std::ofstream os(dir.p / "bad.jsonl");
  os << R"({"record_id":"x","start":1.0,"duration":0.5,"label":0})" << "\n";
  os.close();
  CHECK_THROWS_AS(read_annotations(dir.p / "bad.jsonl"), Error);
}

TEST_CASE("split files round trip") {
  TempDir dir;
  DatasetSplit s;
  s.train = {"r0", "r1", "r2"};
  s.validation = {"r3"};
  s.test = {"r4", "r5"};
  write_split(s, dir.p / "split.json");
  auto back = read_split(dir.p / "split.json");
  CHECK(back.train == s.train);
  CHECK(back.validation == s.validation);
  CHECK(back.test == s.test);
}
