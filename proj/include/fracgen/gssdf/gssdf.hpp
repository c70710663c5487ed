#pragma once

#include "fracgen/voxel/grid.hpp"

namespace fracgen::gssdf {

using voxel::GridMeta;
using voxel::LabelGrid;
using voxel::OccupancyGrid;
using voxel::ScalarField;

/// Geometrically-segmented signed distance field. Positive inside fragments
/// (distance to the nearest fragment boundary, crack faces included),
/// negative outside (minus the distance to the material), world units.
struct GssdfField {
  ScalarField field;
};

/// Encode a fragment labeling into the signed field. Interior voxels get the
/// distance to the nearest differently-labeled voxel center, so values dip
/// toward zero along cracks as well as at the outer surface.
GssdfField encode_gssdf(const LabelGrid& parts);

/// Material mask: f >= 0. Zero is inside by convention.
OccupancyGrid extract_mask(const GssdfField& g);

/// Unsigned field |f|.
ScalarField extract_usdf(const GssdfField& g);

}  // namespace fracgen::gssdf
