#pragma once

#include "fracgen/voxel/grid.hpp"
#include "fracgen/voxel/mesh.hpp"

namespace fracgen::voxel {

/// A voxel is inside iff its center is inside the mesh (parity test along +x
/// rays). Throws on non-watertight input.
OccupancyGrid voxelize(const TriMesh& mesh, const GridMeta& meta);

}  // namespace fracgen::voxel
