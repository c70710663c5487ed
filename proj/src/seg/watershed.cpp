#include "fracgen/seg/watershed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

#include "fracgen/core/error.hpp"

namespace fracgen::seg {

using voxel::GridMeta;
using voxel::LabelGrid;
using voxel::OccupancyGrid;
using voxel::ScalarField;

void WatershedConfig::validate() const {
  if (!(step > 0)) throw ConfigError("watershed step must be positive");
  if (connectivity != 6 && connectivity != 26)
    throw ConfigError("connectivity must be 6 or 26");
}

namespace {

std::vector<std::array<int, 3>> neighbor_offsets(int connectivity) {
  std::vector<std::array<int, 3>> offs;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1) continue;
        offs.push_back({dx, dy, dz});
      }
  return offs;
}

constexpr float kBackground = -std::numeric_limits<float>::infinity();

/// Grayscale reconstruction by dilation of (usdf - h) under usdf, restricted
/// to foreground voxels (background carries -inf and never propagates).
std::vector<float> reconstruct_shaved(const ScalarField& usdf, const std::vector<uint8_t>& fg,
                                      float h, const std::vector<std::array<int, 3>>& offs) {
  const int r = usdf.meta.resolution;
  const size_t n = usdf.values.size();
  std::vector<float> rec(n);
  for (size_t i = 0; i < n; ++i) rec[i] = fg[i] ? usdf.values[i] - h : kBackground;

  auto scan = [&](bool forward) {
    for (int step_z = 0; step_z < r; ++step_z)
      for (int step_y = 0; step_y < r; ++step_y)
        for (int step_x = 0; step_x < r; ++step_x) {
          const int z = forward ? step_z : r - 1 - step_z;
          const int y = forward ? step_y : r - 1 - step_y;
          const int x = forward ? step_x : r - 1 - step_x;
          const size_t i = usdf.meta.index(x, y, z);
          if (!fg[i]) continue;
          float best = rec[i];
          for (const auto& o : offs) {
            const int sign = forward ? -1 : 1;
            // visit only neighbors already updated in this scan direction
            const int lin = o[2] * r * r + o[1] * r + o[0];
            if (sign * lin <= 0) continue;
            const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
            if (!usdf.meta.in_bounds(nx, ny, nz)) continue;
            const size_t j = usdf.meta.index(nx, ny, nz);
            best = std::max(best, rec[j]);
          }
          rec[i] = std::min(usdf.values[i], best);
        }
  };
  scan(true);
  scan(false);

  std::deque<size_t> queue;
  for (size_t i = 0; i < n; ++i)
    if (fg[i]) queue.push_back(i);

  const int rr = r * r;
  while (!queue.empty()) {
    const size_t i = queue.front();
    queue.pop_front();
    const int z = static_cast<int>(i) / rr;
    const int y = (static_cast<int>(i) / r) % r;
    const int x = static_cast<int>(i) % r;
    for (const auto& o : offs) {
      const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
      if (!usdf.meta.in_bounds(nx, ny, nz)) continue;
      const size_t j = usdf.meta.index(nx, ny, nz);
      if (!fg[j]) continue;
      if (rec[j] < rec[i] && rec[j] != usdf.values[j]) {
        rec[j] = std::min(rec[i], usdf.values[j]);
        queue.push_back(j);
      }
    }
  }
  return rec;
}

/// Connected equal-value plateaus of rec with no strictly greater neighbor
/// become markers, labeled 1..K in scan order.
std::vector<uint32_t> label_markers(const GridMeta& meta, const std::vector<float>& rec,
                                    const std::vector<uint8_t>& fg,
                                    const std::vector<std::array<int, 3>>& offs,
                                    uint32_t& num_markers) {
  const int r = meta.resolution;
  const size_t n = rec.size();
  std::vector<uint32_t> marker(n, 0);
  num_markers = 0;

  std::vector<size_t> stack;
  std::vector<size_t> plateau;
  std::vector<uint8_t> visited(n, 0);
  for (size_t start = 0; start < n; ++start) {
    if (!fg[start] || visited[start]) continue;
    const float level = rec[start];
    bool is_max = true;
    plateau.clear();
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const size_t i = stack.back();
      stack.pop_back();
      plateau.push_back(i);
      const int z = static_cast<int>(i) / (r * r);
      const int y = (static_cast<int>(i) / r) % r;
      const int x = static_cast<int>(i) % r;
      for (const auto& o : offs) {
        const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
        if (!meta.in_bounds(nx, ny, nz)) continue;
        const size_t j = meta.index(nx, ny, nz);
        if (!fg[j]) continue;
        if (rec[j] > level) is_max = false;
        if (rec[j] == level && !visited[j]) {
          visited[j] = 1;
          stack.push_back(j);
        }
      }
    }
    if (is_max) {
      ++num_markers;
      for (size_t i : plateau) marker[i] = num_markers;
    }
  }
  return marker;
}

struct FloodEntry {
  uint32_t bucket;
  uint32_t gen;
  uint32_t label;
  uint64_t seq;
  size_t voxel;
};

struct FloodOrder {
  bool operator()(const FloodEntry& a, const FloodEntry& b) const {
    return std::tie(a.bucket, a.gen, a.label, a.seq) > std::tie(b.bucket, b.gen, b.label, b.seq);
  }
};

}  // namespace

LabelGrid watershed_segment(const ScalarField& usdf, const WatershedConfig& cfg) {
  cfg.validate();
  for (float v : usdf.values)
    if (v < 0) throw ConfigError("watershed input must be non-negative");

  const GridMeta& meta = usdf.meta;
  LabelGrid out(meta);

  const size_t n = usdf.values.size();
  std::vector<uint8_t> fg(n);
  float usdf_max = 0;
  size_t fg_count = 0;
  for (size_t i = 0; i < n; ++i) {
    fg[i] = usdf.values[i] >= cfg.step;
    fg_count += fg[i];
    usdf_max = std::max(usdf_max, usdf.values[i]);
  }
  if (fg_count == 0) return out;

  const auto offs = neighbor_offsets(cfg.connectivity);
  const auto rec = reconstruct_shaved(usdf, fg, cfg.resolved_min_depth(), offs);
  uint32_t num_markers = 0;
  auto labels = label_markers(meta, rec, fg, offs, num_markers);

  auto bucket_of = [&](size_t i) {
    return static_cast<uint32_t>(std::floor((usdf_max - usdf.values[i]) / cfg.step));
  };

  std::priority_queue<FloodEntry, std::vector<FloodEntry>, FloodOrder> heap;
  uint64_t seq = 0;
  for (size_t i = 0; i < n; ++i)
    if (labels[i]) heap.push({bucket_of(i), 0, labels[i], seq++, i});

  const int r = meta.resolution;
  std::vector<uint8_t> done(n, 0);
  while (!heap.empty()) {
    const FloodEntry e = heap.top();
    heap.pop();
    if (done[e.voxel]) continue;
    done[e.voxel] = 1;
    labels[e.voxel] = e.label;
    const int z = static_cast<int>(e.voxel) / (r * r);
    const int y = (static_cast<int>(e.voxel) / r) % r;
    const int x = static_cast<int>(e.voxel) % r;
    for (const auto& o : offs) {
      const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
      if (!meta.in_bounds(nx, ny, nz)) continue;
      const size_t j = meta.index(nx, ny, nz);
      if (!fg[j] || done[j]) continue;
      // claims entering a later flood level start that level's growth afresh,
      // so within one level voxels nearest an established basin go first
      const uint32_t nb = std::max(e.bucket, bucket_of(j));
      heap.push({nb, nb > e.bucket ? 0 : e.gen + 1, e.label, seq++, j});
    }
  }

  // renumber by descending voxel count, ties to the older label
  std::vector<uint64_t> counts(num_markers + 1, 0);
  for (size_t i = 0; i < n; ++i)
    if (labels[i]) ++counts[labels[i]];
  std::vector<uint32_t> order;
  for (uint32_t l = 1; l <= num_markers; ++l)
    if (counts[l]) order.push_back(l);
  std::stable_sort(order.begin(), order.end(),
                   [&](uint32_t a, uint32_t b) { return counts[a] > counts[b]; });
  std::vector<uint32_t> remap(num_markers + 1, 0);
  for (size_t k = 0; k < order.size(); ++k) remap[order[k]] = static_cast<uint32_t>(k + 1);

  out.num_regions = static_cast<uint32_t>(order.size());
  for (size_t i = 0; i < n; ++i) out.labels[i] = remap[labels[i]];
  return out;
}

LabelGrid filter_labels(const LabelGrid& labels, const OccupancyGrid& mask) {
  if (!(labels.meta == mask.meta)) throw ConfigError("label and mask shapes differ");

  const GridMeta& meta = labels.meta;
  const size_t n = labels.labels.size();
  std::vector<uint64_t> total(labels.num_regions + 1, 0);
  std::vector<uint64_t> inside(labels.num_regions + 1, 0);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t l = labels.labels[i];
    if (!l) continue;
    ++total[l];
    if (mask.bits[i]) ++inside[l];
  }

  std::vector<uint8_t> survives(labels.num_regions + 1, 0);
  for (uint32_t l = 1; l <= labels.num_regions; ++l)
    survives[l] = total[l] && 2 * inside[l] > total[l];

  LabelGrid out(meta);
  std::vector<uint32_t> cur(n, 0);
  bool any = false;
  for (size_t i = 0; i < n; ++i)
    if (mask.bits[i] && survives[labels.labels[i]]) {
      cur[i] = labels.labels[i];
      any = true;
    }
  if (!any) return out;

  // absorb masked voxels whose label died into the nearest surviving region;
  // non-mask voxels conduct the search but stay unlabeled in the result
  std::vector<uint8_t> orphan(n, 0);
  for (size_t i = 0; i < n; ++i)
    orphan[i] = mask.bits[i] && labels.labels[i] && !survives[labels.labels[i]];

  const int r = meta.resolution;
  const auto offs = neighbor_offsets(6);
  std::vector<size_t> frontier;
  for (size_t i = 0; i < n; ++i)
    if (cur[i]) frontier.push_back(i);
  std::vector<uint8_t> reached(n, 0);
  std::vector<std::pair<size_t, uint32_t>> claims;
  size_t orphans_left = 0;
  for (uint8_t o : orphan) orphans_left += o;
  while (!frontier.empty() && orphans_left > 0) {
    claims.clear();
    for (size_t i : frontier) {
      const int z = static_cast<int>(i) / (r * r);
      const int y = (static_cast<int>(i) / r) % r;
      const int x = static_cast<int>(i) % r;
      for (const auto& o : offs) {
        const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
        if (!meta.in_bounds(nx, ny, nz)) continue;
        const size_t j = meta.index(nx, ny, nz);
        if (!cur[j] && !reached[j]) claims.emplace_back(j, cur[i]);
      }
    }
    std::sort(claims.begin(), claims.end());
    frontier.clear();
    for (const auto& [j, l] : claims)
      if (!reached[j]) {
        reached[j] = 1;
        cur[j] = l;
        frontier.push_back(j);
        if (orphan[j]) --orphans_left;
      }
  }

  std::vector<uint64_t> counts(labels.num_regions + 1, 0);
  for (size_t i = 0; i < n; ++i) {
    if (!mask.bits[i] || (!orphan[i] && !survives[labels.labels[i]])) cur[i] = 0;
    if (cur[i]) ++counts[cur[i]];
  }
  std::vector<uint32_t> order;
  for (uint32_t l = 1; l <= labels.num_regions; ++l)
    if (counts[l]) order.push_back(l);
  std::stable_sort(order.begin(), order.end(),
                   [&](uint32_t a, uint32_t b) { return counts[a] > counts[b]; });
  std::vector<uint32_t> remap(labels.num_regions + 1, 0);
  for (size_t k = 0; k < order.size(); ++k) remap[order[k]] = static_cast<uint32_t>(k + 1);

  out.num_regions = static_cast<uint32_t>(order.size());
  for (size_t i = 0; i < n; ++i) out.labels[i] = remap[cur[i]];
  return out;
}

void write_region_report(const LabelGrid& labels, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot open for write: " + path);
  f << "label,voxels,centroid_x,centroid_y,centroid_z\n";
  const int r = labels.meta.resolution;
  std::vector<uint64_t> counts(labels.num_regions + 1, 0);
  std::vector<Vec3> sums(labels.num_regions + 1, Vec3{0, 0, 0});
  for (int z = 0; z < r; ++z)
    for (int y = 0; y < r; ++y)
      for (int x = 0; x < r; ++x) {
        const uint32_t l = labels.at(x, y, z);
        if (!l) continue;
        ++counts[l];
        sums[l] = sums[l] + labels.meta.cell_center(x, y, z);
      }
  for (uint32_t l = 1; l <= labels.num_regions; ++l) {
    const double c = std::max<uint64_t>(counts[l], 1);
    f << l << ',' << counts[l] << ',' << sums[l].x / c << ',' << sums[l].y / c << ','
      << sums[l].z / c << '\n';
  }
}

}  // namespace fracgen::seg
