#include "fracgen/voxel/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fracgen/core/error.hpp"

namespace fracgen::voxel {

namespace {

// 2D orientation of point q against segment a->b in the (y,z) plane
double edge_fn(double ay, double az, double by, double bz, double qy, double qz) {
  return (by - ay) * (qz - az) - (bz - az) * (qy - ay);
}

// Point-in-triangle with a deterministic nudge when the query sits exactly on
// an edge, so a crossing through a shared edge lands in exactly one triangle.
bool inside_projected(double ay, double az, double by, double bz, double cy, double cz, double qy,
                      double qz) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const double e0 = edge_fn(ay, az, by, bz, qy, qz);
    const double e1 = edge_fn(by, bz, cy, cz, qy, qz);
    const double e2 = edge_fn(cy, cz, ay, az, qy, qz);
    if (e0 == 0.0 || e1 == 0.0 || e2 == 0.0) {
      qy += 1.0e-12;
      qz += 2.0e-12;
      continue;
    }
    return (e0 > 0 && e1 > 0 && e2 > 0) || (e0 < 0 && e1 < 0 && e2 < 0);
  }
  return false;
}

}  // namespace

OccupancyGrid voxelize(const TriMesh& mesh, const GridMeta& meta) {
  if (mesh.empty()) return OccupancyGrid(meta, false);
  if (!is_watertight(mesh)) throw ConfigError("open surface");

  const int r = meta.resolution;
  // crossings[y][z] = x positions where the +x ray through that row's centers
  // pierces the surface
  std::vector<std::vector<double>> crossings(static_cast<size_t>(r) * r);

  for (const auto& tri : mesh.triangles) {
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];

    const Vec3 n = (b - a).cross(c - a);
    if (n.x == 0.0) continue;  // parallel to the ray, zero-area projection

    const double ylo = std::min({a.y, b.y, c.y}), yhi = std::max({a.y, b.y, c.y});
    const double zlo = std::min({a.z, b.z, c.z}), zhi = std::max({a.z, b.z, c.z});
    const Vec3 vlo = meta.world_to_voxel({0, ylo, zlo});
    const Vec3 vhi = meta.world_to_voxel({0, yhi, zhi});
    const int y0 = std::max(0, static_cast<int>(std::floor(vlo.y - 0.5)));
    const int y1 = std::min(r - 1, static_cast<int>(std::ceil(vhi.y - 0.5)));
    const int z0 = std::max(0, static_cast<int>(std::floor(vlo.z - 0.5)));
    const int z1 = std::min(r - 1, static_cast<int>(std::ceil(vhi.z - 0.5)));

    for (int iz = z0; iz <= z1; ++iz) {
      for (int iy = y0; iy <= y1; ++iy) {
        const Vec3 q = meta.cell_center(0, iy, iz);
        if (!inside_projected(a.y, a.z, b.y, b.z, c.y, c.z, q.y, q.z)) continue;
        // plane intersection: n . (p - a) = 0 at (x, q.y, q.z)
        const double x = a.x - (n.y * (q.y - a.y) + n.z * (q.z - a.z)) / n.x;
        crossings[static_cast<size_t>(iy) + static_cast<size_t>(r) * iz].push_back(x);
      }
    }
  }

  OccupancyGrid occ(meta, false);
  const double h = meta.spacing();
  for (int iz = 0; iz < r; ++iz) {
    for (int iy = 0; iy < r; ++iy) {
      auto& xs = crossings[static_cast<size_t>(iy) + static_cast<size_t>(r) * iz];
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      size_t k = 0;
      bool inside = false;
      for (int ix = 0; ix < r; ++ix) {
        const double xc = -1.0 + (ix + 0.5) * h;
        while (k < xs.size() && xs[k] < xc) {
          inside = !inside;
          ++k;
        }
        occ.at(ix, iy, iz) = inside ? 1 : 0;
      }
    }
  }
  return occ;
}

}  // namespace fracgen::voxel
