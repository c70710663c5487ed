#pragma once

#include <string>

#include "fracgen/voxel/grid.hpp"

namespace fracgen::seg {

struct WatershedConfig {
  float step = 0.04f;    // flood threshold increment, field units
  int connectivity = 6;  // 6 or 26
  float min_depth = -1;  // minimum basin depth for seeding; < 0 resolves to 2*step

  void validate() const;
  float resolved_min_depth() const { return min_depth < 0 ? 2 * step : min_depth; }
};

/// Split an unsigned distance field into basins around its maxima.
///
/// Maxima shallower than the minimum basin depth are merged into their
/// dominant neighbor before flooding. The flood rises in `step` increments;
/// where two basins meet, the voxel goes to the basin that reached it first,
/// ties to the lower label. Voxels with usdf < step stay background (0).
/// Labels are renumbered 1..N by descending voxel count. An all-background
/// field yields an empty grid with zero regions.
voxel::LabelGrid watershed_segment(const voxel::ScalarField& usdf,
                                   const WatershedConfig& cfg = {});

/// Keep only labels with more than half their voxels inside the mask, clip
/// them to it, and relabel 1..M by descending clipped size. Masked voxels
/// left without a surviving label are absorbed by the nearest surviving
/// region (breadth-first, ties to the lower label), so the result partitions
/// the mask whenever at least one label survives.
voxel::LabelGrid filter_labels(const voxel::LabelGrid& labels,
                               const voxel::OccupancyGrid& mask);

/// CSV report: label, voxel count, centroid (world units).
void write_region_report(const voxel::LabelGrid& labels, const std::string& path);

}  // namespace fracgen::seg
