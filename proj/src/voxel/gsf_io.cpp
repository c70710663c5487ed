#include "fracgen/voxel/gsf_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fracgen/core/error.hpp"

namespace fracgen::voxel {

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian; big-endian hosts need byte swaps");

namespace {

constexpr char kMagic[4] = {'G', 'S', 'F', '1'};

void write_header(std::ofstream& out, uint32_t resolution, GsfKind kind) {
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&resolution), 4);
  const uint8_t k = static_cast<uint8_t>(kind);
  out.write(reinterpret_cast<const char*>(&k), 1);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingInputError("cannot open for write: " + path);
  return out;
}

struct Header {
  uint32_t resolution;
  GsfKind kind;
};

Header read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  uint32_t res = 0;
  uint8_t kind = 255;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&res), 4);
  in.read(reinterpret_cast<char*>(&kind), 1);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("bad magic: " + path);
  if (kind > 2) throw ConfigError("unknown field kind: " + path);
  if (res == 0 || res > 4096) throw ConfigError("implausible resolution: " + path);
  return {res, static_cast<GsfKind>(kind)};
}

template <typename T>
void read_payload(std::ifstream& in, std::vector<T>& data, size_t count, const std::string& path) {
  data.resize(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(T)))
    throw ConfigError("corrupt payload: " + path);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("no such file: " + path);
  return in;
}

}  // namespace

void write_gsf(const std::string& path, const ScalarField& field) {
  auto out = open_out(path);
  write_header(out, static_cast<uint32_t>(field.meta.resolution), GsfKind::Scalar);
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(float)));
}

void write_gsf(const std::string& path, const LabelGrid& labels) {
  auto out = open_out(path);
  write_header(out, static_cast<uint32_t>(labels.meta.resolution), GsfKind::Labels);
  out.write(reinterpret_cast<const char*>(labels.labels.data()),
            static_cast<std::streamsize>(labels.labels.size() * sizeof(uint32_t)));
}

void write_gsf(const std::string& path, const OccupancyGrid& occ) {
  auto out = open_out(path);
  write_header(out, static_cast<uint32_t>(occ.meta.resolution), GsfKind::Occupancy);
  out.write(reinterpret_cast<const char*>(occ.bits.data()),
            static_cast<std::streamsize>(occ.bits.size()));
}

GsfKind peek_gsf_kind(const std::string& path) {
  auto in = open_in(path);
  return read_header(in, path).kind;
}

ScalarField read_gsf_scalar(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != GsfKind::Scalar) throw ConfigError("not a scalar field: " + path);
  ScalarField field;
  field.meta.resolution = static_cast<int>(h.resolution);
  read_payload(in, field.values, field.meta.cell_count(), path);
  return field;
}

LabelGrid read_gsf_labels(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != GsfKind::Labels) throw ConfigError("not a label grid: " + path);
  LabelGrid grid;
  grid.meta.resolution = static_cast<int>(h.resolution);
  read_payload(in, grid.labels, grid.meta.cell_count(), path);
  grid.num_regions = grid.labels.empty() ? 0 : *std::max_element(grid.labels.begin(), grid.labels.end());
  return grid;
}

OccupancyGrid read_gsf_occupancy(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != GsfKind::Occupancy) throw ConfigError("not an occupancy grid: " + path);
  OccupancyGrid occ;
  occ.meta.resolution = static_cast<int>(h.resolution);
  read_payload(in, occ.bits, occ.meta.cell_count(), path);
  return occ;
}

static std::string sidecar_path(const std::string& gsf_path) { return gsf_path + ".meta.json"; }

void write_gsf_sidecar(const std::string& gsf_path, const GsfSidecar& sidecar) {
  nlohmann::ordered_json j;
  j["target"] = sidecar.target;
  j["resolution"] = sidecar.resolution;
  j["transform"] = sidecar.transform;
  std::ofstream out(sidecar_path(gsf_path));
  if (!out) throw MissingInputError("cannot open for write: " + sidecar_path(gsf_path));
  out << j.dump(2) << "\n";
}

std::optional<GsfSidecar> read_gsf_sidecar(const std::string& gsf_path) {
  std::ifstream in(sidecar_path(gsf_path));
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    GsfSidecar s;
    s.target = j.at("target").get<std::string>();
    s.resolution = j.at("resolution").get<int>();
    const auto xf = j.at("transform");
    for (size_t i = 0; i < 12; ++i) s.transform[i] = xf.at(i).get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed sidecar " + sidecar_path(gsf_path) + ": " + e.what());
  }
}

}  // namespace fracgen::voxel
