#include "fracgen/voxel/mesh.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "fracgen/core/error.hpp"

namespace fracgen::voxel {

std::pair<TriMesh, SimilarityTransform> normalize_shape(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw ConfigError("degenerate shape: empty mesh");

  Vec3 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max());
  Vec3 hi = -lo;
  for (const Vec3& v : mesh.vertices) {
    lo = min3(lo, v);
    hi = max3(hi, v);
  }
  const Vec3 ext = hi - lo;
  const double longest = std::max(ext.x, std::max(ext.y, ext.z));
  if (longest <= 0.0) throw ConfigError("degenerate shape");

  SimilarityTransform xf;
  xf.scale = 2.0 / longest;
  const Vec3 center = (lo + hi) * 0.5;
  xf.offset = -(center * xf.scale);

  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = xf.apply(v);
  return {out, xf};
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  std::map<std::pair<uint32_t, uint32_t>, int> edge_count;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      uint32_t a = t[e], b = t[(e + 1) % 3];
      if (a == b) return false;
      if (a > b) std::swap(a, b);
      edge_count[{a, b}]++;
    }
  }
  for (const auto& [edge, n] : edge_count)
    if (n != 2) return false;
  return true;
}

TriMesh make_box(const Vec3& he, const Vec3& c) {
  TriMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({c.x + (i & 1 ? he.x : -he.x), c.y + (i & 2 ? he.y : -he.y),
                          c.z + (i & 4 ? he.z : -he.z)});
  }
  // two triangles per face, outward winding
  const uint32_t f[6][4] = {
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  };
  for (const auto& q : f) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

namespace {

uint32_t midpoint_vertex(std::vector<Vec3>& verts, std::map<std::pair<uint32_t, uint32_t>, uint32_t>& cache,
                         uint32_t a, uint32_t b, const Vec3& center, double radius) {
  if (a > b) std::swap(a, b);
  auto it = cache.find({a, b});
  if (it != cache.end()) return it->second;
  Vec3 mid = (verts[a] + verts[b]) * 0.5 - center;
  mid = center + mid.normalized() * radius;
  verts.push_back(mid);
  const uint32_t idx = static_cast<uint32_t>(verts.size() - 1);
  cache[{a, b}] = idx;
  return idx;
}

}  // namespace

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  const Vec3 base[12] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (const Vec3& v : base) m.vertices.push_back(center + v.normalized() * radius);
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::vector<std::array<uint32_t, 3>> next;
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> cache;
    next.reserve(m.triangles.size() * 4);
    for (const auto& tri : m.triangles) {
      const uint32_t ab = midpoint_vertex(m.vertices, cache, tri[0], tri[1], center, radius);
      const uint32_t bc = midpoint_vertex(m.vertices, cache, tri[1], tri[2], center, radius);
      const uint32_t ca = midpoint_vertex(m.vertices, cache, tri[2], tri[0], center, radius);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  return m;
}

}  // namespace fracgen::voxel
