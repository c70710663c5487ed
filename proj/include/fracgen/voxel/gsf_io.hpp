#pragma once

#include <array>
#include <optional>
#include <string>

#include "fracgen/voxel/grid.hpp"

namespace fracgen::voxel {

// "GSF1" container: magic, u32-le resolution, u8 kind, little-endian
// x-fastest payload. Kinds: 0 = f32 scalar, 1 = u32 labels, 2 = u8 occupancy.
enum class GsfKind : uint8_t { Scalar = 0, Labels = 1, Occupancy = 2 };

void write_gsf(const std::string& path, const ScalarField& field);
void write_gsf(const std::string& path, const LabelGrid& labels);
void write_gsf(const std::string& path, const OccupancyGrid& occ);

GsfKind peek_gsf_kind(const std::string& path);
ScalarField read_gsf_scalar(const std::string& path);
LabelGrid read_gsf_labels(const std::string& path);
OccupancyGrid read_gsf_occupancy(const std::string& path);

/// `<name>.meta.json` sidecar written next to a .gsf file.
struct GsfSidecar {
  std::string target;
  int resolution = 0;
  std::array<double, 12> transform{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
};

void write_gsf_sidecar(const std::string& gsf_path, const GsfSidecar& sidecar);
std::optional<GsfSidecar> read_gsf_sidecar(const std::string& gsf_path);

}  // namespace fracgen::voxel
