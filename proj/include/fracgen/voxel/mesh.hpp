#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fracgen/core/vec.hpp"

namespace fracgen::voxel {

struct TriMesh {
  std::vector<Vec3> vertices;            // world units
  std::vector<std::array<uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

/// p' = scale * p + offset (uniform scale, no rotation).
struct SimilarityTransform {
  double scale = 1.0;
  Vec3 offset{0, 0, 0};

  Vec3 apply(const Vec3& p) const { return p * scale + offset; }

  // row-major 3x4 matrix, the on-disk sidecar layout
  std::array<double, 12> matrix() const {
    return {scale, 0, 0, offset.x, 0, scale, 0, offset.y, 0, 0, scale, offset.z};
  }
};

/// Rescale and recenter so the longest bounding-box edge is 2 and the box
/// center sits at the origin. Throws on a degenerate (zero extent) mesh.
std::pair<TriMesh, SimilarityTransform> normalize_shape(const TriMesh& mesh);

/// Every edge shared by exactly two triangles.
bool is_watertight(const TriMesh& mesh);

// procedural test shapes
TriMesh make_box(const Vec3& half_extents, const Vec3& center = {0, 0, 0});
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = {0, 0, 0});

}  // namespace fracgen::voxel
