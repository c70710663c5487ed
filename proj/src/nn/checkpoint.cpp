#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fracgen/core/error.hpp"
#include "fracgen/nn/model.hpp"

namespace fracgen::nn {

// "GCK1" checkpoint: magic, u32 tensor count, then per tensor u16 name
// length, name bytes, u8 rank, u32 dims, f32 little-endian data. Config
// lives in a JSON sidecar next to the binary.

namespace {

constexpr char kMagic[4] = {'G', 'C', 'K', '1'};

std::string config_path(const std::string& path) { return path + ".json"; }

void write_tensor(std::ofstream& out, const std::string& name, const std::vector<int>& shape,
                  const std::vector<float>& data) {
  const uint16_t len = static_cast<uint16_t>(name.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(name.data(), len);
  const uint8_t rank = static_cast<uint8_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (int d : shape) {
    const uint32_t dim = static_cast<uint32_t>(d);
    out.write(reinterpret_cast<const char*>(&dim), 4);
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

struct StoredTensor {
  std::vector<int> shape;
  std::vector<float> data;
};

std::vector<std::pair<std::string, StoredTensor>> read_all_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("no such checkpoint: " + path);
  char magic[4];
  uint32_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("bad checkpoint magic: " + path);
  if (count > 4096) throw ConfigError("implausible checkpoint tensor count: " + path);

  std::vector<std::pair<std::string, StoredTensor>> tensors;
  tensors.reserve(count);
  for (uint32_t t = 0; t < count; ++t) {
    uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    std::string name(len, '\0');
    in.read(name.data(), len);
    uint8_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (!in || rank > 5) throw ConfigError("corrupt checkpoint payload: " + path);
    StoredTensor st;
    size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      uint32_t dim = 0;
      in.read(reinterpret_cast<char*>(&dim), 4);
      if (!in || dim == 0 || dim > (1u << 24)) throw ConfigError("corrupt checkpoint payload: " + path);
      st.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    st.data.resize(n);
    in.read(reinterpret_cast<char*>(st.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
      throw ConfigError("corrupt checkpoint payload: " + path);
    tensors.emplace_back(std::move(name), std::move(st));
  }
  return tensors;
}

ModelConfig read_config(const std::string& path) {
  std::ifstream cfg_in(config_path(path));
  if (!cfg_in) throw MissingInputError("no checkpoint config: " + config_path(path));
  ModelConfig cfg;
  try {
    nlohmann::json j;
    cfg_in >> j;
    cfg.resolution = j.at("resolution").get<int>();
    cfg.stages = j.at("stages").get<int>();
    cfg.c0 = j.at("c0").get<int>();
    cfg.dz = j.at("dz").get<int>();
    cfg.omega0 = j.at("omega0").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint config: " + std::string(e.what()));
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const FractureModel& model,
                     const ExtraTensors& extras) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingInputError("cannot open for write: " + path);

  const auto params = model.named_params();
  out.write(kMagic, 4);
  const uint32_t count = static_cast<uint32_t>(params.size() + extras.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, tensor] : params)
    write_tensor(out, name, tensor.shape(), tensor.values());
  for (const auto& [name, data] : extras)
    write_tensor(out, name, {static_cast<int>(data.size())}, data);

  const ModelConfig& cfg = model.config();
  nlohmann::ordered_json j;
  j["resolution"] = cfg.resolution;
  j["stages"] = cfg.stages;
  j["c0"] = cfg.c0;
  j["dz"] = cfg.dz;
  j["omega0"] = cfg.omega0;
  std::ofstream cfg_out(config_path(path));
  if (!cfg_out) throw MissingInputError("cannot open for write: " + config_path(path));
  cfg_out << j.dump(2) << "\n";
}

FractureModel load_checkpoint(const std::string& path, ExtraTensors& extras_out) {
  const ModelConfig cfg = read_config(path);
  FractureModel model(cfg);

  auto stored = read_all_tensors(path);
  auto params = model.named_params();
  size_t cursor = 0;
  for (auto& [name, tensor] : params) {
    if (cursor >= stored.size() || stored[cursor].first != name ||
        stored[cursor].second.shape != tensor.shape())
      throw ConfigError("checkpoint layout mismatch at tensor '" + name + "': " + path);
    tensor.values() = std::move(stored[cursor].second.data);
    ++cursor;
  }
  extras_out.clear();
  for (; cursor < stored.size(); ++cursor)
    extras_out.emplace_back(std::move(stored[cursor].first),
                            std::move(stored[cursor].second.data));
  return model;
}

FractureModel load_checkpoint(const std::string& path) {
  ExtraTensors ignored;
  return load_checkpoint(path, ignored);
}

}  // namespace fracgen::nn
