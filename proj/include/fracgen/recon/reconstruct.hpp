#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fracgen/voxel/grid.hpp"
#include "fracgen/voxel/mesh.hpp"

namespace fracgen::recon {

/// Mass and velocity of the body that is being replaced.
struct SourceState {
  double m_origin = 1.0;
  Vec3 v_origin{0, 0, 0};

  void validate() const;
};

/// A reconstructed fragment ready for reinjection into the simulation.
struct FragmentBody {
  voxel::TriMesh mesh;
  double mass = 0;
  Vec3 velocity{0, 0, 0};
  uint32_t label = 0;
  size_t voxel_count = 0;
};

/// Isosurface of the binary indicator of one label at iso 0.5. Vertices sit
/// on midpoints between voxel centers; the grid is zero-padded by one voxel
/// so regions touching the border still close. Ambiguous faces connect so
/// that diagonal inside corners stay separate, which keeps the surface
/// watertight with outward normals. Throws if the label has no voxels.
voxel::TriMesh marching_cubes(const voxel::LabelGrid& labels, uint32_t label);

/// Mass proportional to voxel count, velocity copied from the source.
std::vector<FragmentBody> assign_rigid_attrs(
    const std::vector<std::pair<voxel::TriMesh, size_t>>& fragments, const SourceState& src);

/// Mesh every label in the grid and attach rigid attributes.
std::vector<FragmentBody> reconstruct_fragments(const voxel::LabelGrid& labels,
                                                const SourceState& src);

/// Text OBJ, `v` records then 1-based `f` records. Refuses an empty mesh.
void export_obj(const voxel::TriMesh& mesh, const std::string& path);

/// Reads `v` and triangular `f` records; ignores comments and other tags.
voxel::TriMesh import_obj(const std::string& path);

}  // namespace fracgen::recon
