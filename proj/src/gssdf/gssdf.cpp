#include "fracgen/gssdf/gssdf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fracgen/core/error.hpp"
#include "fracgen/voxel/distance.hpp"

namespace fracgen::gssdf {

GssdfField encode_gssdf(const LabelGrid& parts) {
  const GridMeta& meta = parts.meta;
  const size_t n = meta.cell_count();

  uint32_t max_label = 0;
  size_t material = 0;
  for (uint32_t l : parts.labels) {
    max_label = std::max(max_label, l);
    material += l != 0;
  }
  if (material == 0) throw ConfigError("label grid has no fragments");
  if (parts.num_regions == 0 || max_label > parts.num_regions)
    throw ConfigError("label ids exceed the declared region count");

  GssdfField out;
  out.field = ScalarField(meta, 0.0f);

  // exterior: minus the distance to the nearest material voxel
  voxel::OccupancyGrid occ(meta);
  for (size_t i = 0; i < n; ++i) occ.bits[i] = parts.labels[i] != 0;
  const ScalarField dist_out = voxel::distance_transform(occ, voxel::Region::Outside);
  for (size_t i = 0; i < n; ++i)
    if (parts.labels[i] == 0) out.field.values[i] = -dist_out.values[i];

  // interior: per fragment, distance to anything not carrying its label.
  // A fragment filling the whole grid falls back to domain-wall distance
  // inside distance_transform.
  for (uint32_t r = 1; r <= parts.num_regions; ++r) {
    bool present = false;
    for (size_t i = 0; i < n; ++i) {
      occ.bits[i] = parts.labels[i] == r;
      present |= occ.bits[i] != 0;
    }
    if (!present) continue;
    const ScalarField dist_r = voxel::distance_transform(occ, voxel::Region::Inside);
    for (size_t i = 0; i < n; ++i)
      if (parts.labels[i] == r) out.field.values[i] = dist_r.values[i];
  }
  return out;
}

OccupancyGrid extract_mask(const GssdfField& g) {
  OccupancyGrid occ(g.field.meta);
  for (size_t i = 0; i < occ.bits.size(); ++i) occ.bits[i] = g.field.values[i] >= 0.0f;
  return occ;
}

ScalarField extract_usdf(const GssdfField& g) {
  ScalarField usdf(g.field.meta);
  for (size_t i = 0; i < usdf.values.size(); ++i) usdf.values[i] = std::abs(g.field.values[i]);
  return usdf;
}

}  // namespace fracgen::gssdf
