#include "fracgen/recon/reconstruct.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "fracgen/core/error.hpp"

namespace fracgen::recon {

using voxel::LabelGrid;
using voxel::TriMesh;

void SourceState::validate() const {
  if (!(m_origin > 0)) throw ConfigError("source mass must be positive");
}

namespace {

// Directed marching-squares segments per face case, inside corners kept to
// the right of each segment so assembled loops wind with outward normals.
// Face corners c00|c10<<1|c11<<2|c01<<3; edges B=0 R=1 T=2 L=3.
constexpr int8_t kFaceSegments[16][2][2] = {
    {{-1, -1}, {-1, -1}},  // 0
    {{3, 0}, {-1, -1}},    // c00
    {{0, 1}, {-1, -1}},    // c10
    {{3, 1}, {-1, -1}},    // bottom row
    {{1, 2}, {-1, -1}},    // c11
    {{3, 0}, {1, 2}},      // c00+c11, kept separate
    {{0, 2}, {-1, -1}},    // right column
    {{3, 2}, {-1, -1}},    // all but c01
    {{2, 3}, {-1, -1}},    // c01
    {{2, 0}, {-1, -1}},    // left column
    {{0, 1}, {2, 3}},      // c10+c01, kept separate
    {{2, 1}, {-1, -1}},    // all but c11
    {{1, 3}, {-1, -1}},    // top row
    {{1, 0}, {-1, -1}},    // all but c10
    {{0, 3}, {-1, -1}},    // all but c00
    {{-1, -1}, {-1, -1}},  // 15
};

struct Face {
  std::array<int, 3> base;  // corner offset of (u,v) = (0,0) within the cell
  int u, v;                 // axes with e_u x e_v pointing out of the cell
};

constexpr Face kFaces[6] = {
    {{1, 0, 0}, 1, 2},  // +x
    {{0, 0, 0}, 2, 1},  // -x
    {{0, 1, 0}, 2, 0},  // +y
    {{0, 0, 0}, 0, 2},  // -y
    {{0, 0, 1}, 0, 1},  // +z
    {{0, 0, 0}, 1, 0},  // -z
};

}  // namespace

TriMesh marching_cubes(const LabelGrid& labels, uint32_t label) {
  if (label == 0) throw ConfigError("label 0 is background");
  bool present = false;
  for (uint32_t l : labels.labels)
    if (l == label) {
      present = true;
      break;
    }
  if (!present) throw ConfigError("label " + std::to_string(label) + " has no voxels");

  const int r = labels.meta.resolution;
  const double h = labels.meta.spacing();
  const int corners = r + 2;  // padded lattice of voxel centers per axis

  auto inside = [&](int x, int y, int z) -> int {
    if (x < 1 || y < 1 || z < 1 || x > r || y > r || z > r) return 0;
    return labels.at(x - 1, y - 1, z - 1) == label;
  };
  auto corner_world = [&](int x, int y, int z) -> Vec3 {
    return {-1.0 + (x - 0.5) * h, -1.0 + (y - 0.5) * h, -1.0 + (z - 0.5) * h};
  };
  auto edge_key = [&](const std::array<int, 3>& lower, int axis) -> uint64_t {
    const uint64_t lin =
        (static_cast<uint64_t>(lower[2]) * corners + lower[1]) * corners + lower[0];
    return lin * 3 + static_cast<uint64_t>(axis);
  };

  TriMesh mesh;
  std::unordered_map<uint64_t, uint32_t> weld;
  auto vertex_of = [&](uint64_t key, const std::array<int, 3>& lower, int axis) -> uint32_t {
    const auto it = weld.find(key);
    if (it != weld.end()) return it->second;
    std::array<int, 3> upper = lower;
    upper[axis] += 1;
    const Vec3 a = corner_world(lower[0], lower[1], lower[2]);
    const Vec3 b = corner_world(upper[0], upper[1], upper[2]);
    const uint32_t id = static_cast<uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back((a + b) * 0.5);
    weld.emplace(key, id);
    return id;
  };

  std::map<uint64_t, std::pair<uint64_t, uint32_t>> next;  // segment chain within one cell
  for (int cz = 0; cz < corners - 1; ++cz)
    for (int cy = 0; cy < corners - 1; ++cy)
      for (int cx = 0; cx < corners - 1; ++cx) {
        int occupied = 0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) occupied += inside(cx + dx, cy + dy, cz + dz);
        if (occupied == 0 || occupied == 8) continue;

        next.clear();
        for (const Face& f : kFaces) {
          std::array<int, 3> base = {cx + f.base[0], cy + f.base[1], cz + f.base[2]};
          std::array<int, 3> cu = base, cv = base, cuv = base;
          cu[f.u] += 1;
          cv[f.v] += 1;
          cuv[f.u] += 1;
          cuv[f.v] += 1;
          const int code = inside(base[0], base[1], base[2]) | inside(cu[0], cu[1], cu[2]) << 1 |
                           inside(cuv[0], cuv[1], cuv[2]) << 2 | inside(cv[0], cv[1], cv[2]) << 3;

          for (const auto& seg : kFaceSegments[code]) {
            if (seg[0] < 0) break;
            // face edge to (lower lattice corner, axis)
            auto resolve = [&](int e) -> std::pair<std::array<int, 3>, int> {
              switch (e) {
                case 0: return {base, f.u};
                case 1: return {cu, f.v};
                case 2: return {cv, f.u};
                default: return {base, f.v};
              }
            };
            const auto [from_lower, from_axis] = resolve(seg[0]);
            const auto [to_lower, to_axis] = resolve(seg[1]);
            const uint64_t to_key = edge_key(to_lower, to_axis);
            const uint32_t to_id = vertex_of(to_key, to_lower, to_axis);
            next.emplace(edge_key(from_lower, from_axis), std::pair{to_key, to_id});
          }
        }

        while (!next.empty()) {
          const uint64_t start = next.begin()->first;
          std::vector<uint32_t> loop;
          uint64_t cur = start;
          do {
            const auto [to_key, to_id] = next.at(cur);
            next.erase(cur);
            loop.push_back(to_id);
            cur = to_key;
          } while (cur != start);
          if (loop.size() == 3) {
            mesh.triangles.push_back({loop[0], loop[1], loop[2]});
            continue;
          }
          // longer loops fan from their centroid: an anchor on a cell face
          // can pair with a segment of that same face, and the mirrored fan
          // in the adjacent cell would then duplicate the coplanar triangle
          Vec3 c{};
          for (uint32_t id : loop) c += mesh.vertices[id];
          const uint32_t cid = static_cast<uint32_t>(mesh.vertices.size());
          mesh.vertices.push_back(c / static_cast<double>(loop.size()));
          for (size_t i = 0; i < loop.size(); ++i)
            mesh.triangles.push_back({cid, loop[i], loop[(i + 1) % loop.size()]});
        }
      }
  return mesh;
}

std::vector<FragmentBody> assign_rigid_attrs(
    const std::vector<std::pair<TriMesh, size_t>>& fragments, const SourceState& src) {
  src.validate();
  size_t total = 0;
  for (const auto& [mesh, count] : fragments) total += count;
  if (total == 0) throw ConfigError("fragments hold no voxels");

  std::vector<FragmentBody> bodies;
  bodies.reserve(fragments.size());
  for (size_t i = 0; i < fragments.size(); ++i) {
    FragmentBody b;
    b.mesh = fragments[i].first;
    b.voxel_count = fragments[i].second;
    b.mass = src.m_origin * (static_cast<double>(b.voxel_count) / static_cast<double>(total));
    b.velocity = src.v_origin;
    b.label = static_cast<uint32_t>(i + 1);
    bodies.push_back(std::move(b));
  }
  return bodies;
}

std::vector<FragmentBody> reconstruct_fragments(const LabelGrid& labels, const SourceState& src) {
  std::vector<std::pair<TriMesh, size_t>> parts;
  for (uint32_t l = 1; l <= labels.num_regions; ++l) {
    size_t count = 0;
    for (uint32_t v : labels.labels) count += v == l;
    parts.emplace_back(marching_cubes(labels, l), count);
  }
  auto bodies = assign_rigid_attrs(parts, src);
  for (uint32_t l = 1; l <= labels.num_regions; ++l) bodies[l - 1].label = l;
  return bodies;
}

void export_obj(const TriMesh& mesh, const std::string& path) {
  if (mesh.empty()) throw ConfigError("refusing to export an empty mesh");
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot open for write: " + path);
  char line[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    f << line;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(line, sizeof line, "f %" PRIu32 " %" PRIu32 " %" PRIu32 "\n", t[0] + 1,
                  t[1] + 1, t[2] + 1);
    f << line;
  }
  if (!f.good()) throw MissingInputError("write failed: " + path);
}

TriMesh import_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingInputError("cannot open: " + path);
  TriMesh mesh;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x >> v.y >> v.z)) throw ConfigError("malformed vertex in " + path);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<uint32_t, 3> tri;
      for (auto& idx : tri) {
        std::string token;
        if (!(ss >> token)) throw ConfigError("malformed face in " + path);
        idx = static_cast<uint32_t>(std::stoul(token.substr(0, token.find('/'))));
        if (idx == 0 || idx > mesh.vertices.size())
          throw ConfigError("face index out of range in " + path);
        --idx;
      }
      mesh.triangles.push_back(tri);
      std::string extra;
      if (ss >> extra) throw ConfigError("non-triangular face in " + path);
    }
  }
  return mesh;
}

}  // namespace fracgen::recon
