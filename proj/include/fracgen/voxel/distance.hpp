#pragma once

#include "fracgen/voxel/grid.hpp"

namespace fracgen::voxel {

enum class Region { Inside, Outside };

/// Exact Euclidean distance (world units) from each voxel center in `region`
/// to the nearest voxel center of the complementary region; voxels outside
/// the region get 0. Separable squared-distance transform, O(R^3).
/// If the complementary region is empty, the distance to the domain boundary
/// [-1,1]^3 is used instead so values stay finite.
ScalarField distance_transform(const OccupancyGrid& occ, Region region);

/// Squared cell-distance transform to the nearest seed (seed voxels get 0);
/// the shared kernel behind all distance fields here. Result is in voxel^2
/// units. If there are no seeds, every value is +inf (1e30).
std::vector<double> squared_cell_distance(const GridMeta& meta, const std::vector<uint8_t>& seeds);

}  // namespace fracgen::voxel
