#pragma once

#include <cstdint>
#include <vector>

#include "fracgen/core/vec.hpp"

namespace fracgen::voxel {

/// Cubic grid over the world domain [-1,1]^3. World (-1,-1,-1)..(1,1,1) maps
/// to continuous voxel coordinates (0,0,0)..(R,R,R); the cell (i,j,k) has its
/// center at voxel coordinate (i+0.5, j+0.5, k+0.5).
struct GridMeta {
  int resolution = 32;

  double spacing() const { return 2.0 / resolution; }

  Vec3 world_to_voxel(const Vec3& p) const {
    const double h = spacing();
    return {(p.x + 1.0) / h, (p.y + 1.0) / h, (p.z + 1.0) / h};
  }
  Vec3 voxel_to_world(const Vec3& v) const {
    const double h = spacing();
    return {-1.0 + v.x * h, -1.0 + v.y * h, -1.0 + v.z * h};
  }
  Vec3 cell_center(int ix, int iy, int iz) const {
    return voxel_to_world({ix + 0.5, iy + 0.5, iz + 0.5});
  }

  size_t cell_count() const {
    const size_t r = static_cast<size_t>(resolution);
    return r * r * r;
  }
  // x-fastest memory order
  size_t index(int ix, int iy, int iz) const {
    const size_t r = static_cast<size_t>(resolution);
    return static_cast<size_t>(ix) + r * (static_cast<size_t>(iy) + r * static_cast<size_t>(iz));
  }
  bool in_bounds(int ix, int iy, int iz) const {
    return ix >= 0 && iy >= 0 && iz >= 0 && ix < resolution && iy < resolution && iz < resolution;
  }
  bool operator==(const GridMeta& o) const { return resolution == o.resolution; }
};

struct ScalarField {
  GridMeta meta;
  std::vector<float> values;

  ScalarField() = default;
  explicit ScalarField(GridMeta m, float fill = 0.0f) : meta(m), values(m.cell_count(), fill) {}

  float& at(int ix, int iy, int iz) { return values[meta.index(ix, iy, iz)]; }
  float at(int ix, int iy, int iz) const { return values[meta.index(ix, iy, iz)]; }
};

struct OccupancyGrid {
  GridMeta meta;
  std::vector<uint8_t> bits;  // 1 = inside

  OccupancyGrid() = default;
  explicit OccupancyGrid(GridMeta m, bool fill = false)
      : meta(m), bits(m.cell_count(), fill ? 1 : 0) {}

  uint8_t& at(int ix, int iy, int iz) { return bits[meta.index(ix, iy, iz)]; }
  uint8_t at(int ix, int iy, int iz) const { return bits[meta.index(ix, iy, iz)]; }

  size_t count() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b != 0;
    return n;
  }
};

/// Per-voxel fragment ids; 0 is background, fragments are 1..num_regions.
struct LabelGrid {
  GridMeta meta;
  std::vector<uint32_t> labels;
  uint32_t num_regions = 0;

  LabelGrid() = default;
  explicit LabelGrid(GridMeta m) : meta(m), labels(m.cell_count(), 0) {}

  uint32_t& at(int ix, int iy, int iz) { return labels[meta.index(ix, iy, iz)]; }
  uint32_t at(int ix, int iy, int iz) const { return labels[meta.index(ix, iy, iz)]; }
};

}  // namespace fracgen::voxel
