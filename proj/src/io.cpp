#include "evdet/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian");

namespace evdet {
namespace {

using json = nlohmann::json;

constexpr char kRecordMagic[4] = {'D', 'S', 'R', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("TruncatedPayload", std::string("while reading ") + what);
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("FileNotFound", path.string());
  return is;
}

}  // namespace

void write_record(const Record& record, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os.write(kRecordMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(record.channels()));
  put<double>(os, record.sample_rate);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(record.samples()));
  for (std::size_t c = 0; c < record.channels(); ++c) {
    const std::string& name =
        c < record.channel_names.size() ? record.channel_names[c] : "";
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (const auto& row : record.data)
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  if (!os) throw Error("WriteFailed", path.string());
}

Record read_record(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kRecordMagic, 4) != 0) {
    if (is && std::memcmp(magic, "DSR", 3) == 0)
      throw Error("UnknownVersion",
                  std::string("record format version '") + magic[3] + "'");
    throw Error("MalformedHeader", "bad magic in " + path.string());
  }
  Record r;
  r.id = path.stem().string();
  const auto C = get<std::uint32_t>(is, "channel count");
  r.sample_rate = get<double>(is, "sample rate");
  const auto S = get<std::uint64_t>(is, "sample count");
  if (C == 0 || r.sample_rate <= 0.0 || S == 0)
    throw Error("MalformedHeader", "invalid dimensions in " + path.string());
  r.channel_names.resize(C);
  for (auto& name : r.channel_names) {
    const auto len = get<std::uint32_t>(is, "channel name length");
    name.resize(len);
    is.read(name.data(), len);
    if (!is) throw Error("TruncatedPayload", "channel name");
  }
  r.data.assign(C, std::vector<float>(S));
  for (auto& row : r.data) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(S * sizeof(float)));
    if (!is) throw Error("TruncatedPayload", "sample data");
  }
  return r;
}

void write_annotations(const std::vector<Annotation>& annotations,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  for (const Annotation& a : annotations) {
    for (const Event& e : a.events) {
      json j = {{"record_id", a.record_id},
                {"start", e.start()},
                {"duration", e.duration},
                {"label", e.label}};
      os << j.dump() << '\n';
    }
  }
  if (!os) throw Error("WriteFailed", path.string());
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  std::map<std::string, Annotation> by_id;
  std::vector<std::string> order;
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
    if (!j.contains("record_id") || !j.contains("start") ||
        !j.contains("duration") || !j.contains("label"))
      throw Error("MalformedHeader",
                  path.string() + ":" + std::to_string(lineno) +
                      ": missing field");
    const int label = j["label"].get<int>();
    const double dur = j["duration"].get<double>();
    if (label < 1)
      throw Error("MalformedHeader", path.string() + ":" +
                                         std::to_string(lineno) +
                                         ": label must be >= 1");
    if (dur <= 0.0)
      throw Error("MalformedHeader", path.string() + ":" +
                                         std::to_string(lineno) +
                                         ": duration must be > 0");
    const std::string id = j["record_id"].get<std::string>();
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) {
      it->second.record_id = id;
      order.push_back(id);
    }
    it->second.events.push_back(
        Event::from_start(j["start"].get<double>(), dur, label));
  }
  std::vector<Annotation> out;
  out.reserve(order.size());
  for (const std::string& id : order) {
    Annotation& a = by_id[id];
    a.sort_events();
    out.push_back(std::move(a));
  }
  return out;
}

void write_split(const DatasetSplit& split,
                 const std::filesystem::path& path) {
  json j = {{"train", split.train},
            {"validation", split.validation},
            {"test", split.test}};
  std::ofstream os(path);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os << j.dump(2) << '\n';
}

DatasetSplit read_split(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("MalformedHeader", path.string() + ": " + e.what());
  }
  DatasetSplit s;
  s.train = j.at("train").get<std::vector<std::string>>();
  s.validation = j.at("validation").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

}  // namespace evdet
