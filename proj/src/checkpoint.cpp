#include "evdet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace evdet {
namespace {

using json = nlohmann::json;

constexpr char kModelMagic[4] = {'D', 'S', 'M', '1'};

}  // namespace

void write_checkpoint(const DetectorModel<float>& model,
                      const std::filesystem::path& path) {
  json manifest = json::array();
  std::size_t offset = 0;
  std::vector<const std::vector<float>*> tensors;
  visit_params(
      model,
      [&](const std::string& name, const std::vector<float>& v,
          const std::vector<std::size_t>& shape) {
        manifest.push_back({{"name", name},
                            {"shape", shape},
                            {"offset", offset}});
        offset += v.size() * sizeof(float);
        tensors.push_back(&v);
      },
      /*include_running=*/true);
  json header = {{"config",
                  {{"C", model.cfg.C},
                   {"T", model.cfg.T},
                   {"K", model.cfg.K},
                   {"L", model.cfg.L},
                   {"Nd", model.cfg.Nd}}},
                 {"manifest", manifest}};
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("FileNotFound", "cannot open " + path.string());
  os.write(kModelMagic, 4);
  const std::uint64_t hlen = hs.size();
  os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto* t : tensors)
    os.write(reinterpret_cast<const char*>(t->data()),
             static_cast<std::streamsize>(t->size() * sizeof(float)));
  if (!os) throw Error("WriteFailed", path.string());
}

DetectorModel<float> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("FileNotFound", path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kModelMagic, 4) != 0)
    throw Error("MalformedHeader", "bad magic in " + path.string());
  std::uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!is) throw Error("TruncatedPayload", "header length");
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw Error("TruncatedPayload", "header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw Error("MalformedHeader", e.what());
  }
  const auto& jc = header.at("config");
  NetConfig cfg;
  cfg.C = jc.at("C").get<std::size_t>();
  cfg.T = jc.at("T").get<std::size_t>();
  cfg.K = jc.at("K").get<std::size_t>();
  cfg.L = jc.at("L").get<std::size_t>();
  cfg.Nd = jc.at("Nd").get<std::size_t>();
  cfg.validate();

  auto model = DetectorModel<float>::zeros(cfg);
  std::size_t idx = 0;
  const auto& manifest = header.at("manifest");
  visit_params(
      model,
      [&](const std::string& name, std::vector<float>& v,
          const std::vector<std::size_t>&) {
        if (idx >= manifest.size() ||
            manifest[idx].at("name").get<std::string>() != name)
          throw Error("MalformedHeader",
                      "manifest entry mismatch for " + name);
        ++idx;
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(float)));
        if (!is) throw Error("TruncatedPayload", "parameters of " + name);
      },
      /*include_running=*/true);
  if (idx != manifest.size())
    throw Error("MalformedHeader", "manifest has extra entries");
  return model;
}

}  // namespace evdet
