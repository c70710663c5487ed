#include "fracgen/voxel/distance.hpp"

#include <cmath>
#include <vector>

namespace fracgen::voxel {

namespace {

constexpr double kInf = 1e30;

// 1D lower-envelope pass: out[i] = min_j ((i-j)^2 + f[j]). Parabolas at kInf
// (rows with no site yet) are skipped.
void dt1d(const double* f, double* out, int n, int* v, double* z) {
  int k = -1;
  double s = 0.0;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    while (k >= 0) {
      const int p = v[k];
      s = ((f[q] + q * (double)q) - (f[p] + p * (double)p)) / (2.0 * (q - p));
      if (s <= z[k])
        --k;
      else
        break;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
    }
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - (double)v[k];
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace

std::vector<double> squared_cell_distance(const GridMeta& meta, const std::vector<uint8_t>& seeds) {
  const int r = meta.resolution;
  std::vector<double> d(meta.cell_count());
  for (size_t i = 0; i < d.size(); ++i) d[i] = seeds[i] ? 0.0 : kInf;

  std::vector<double> f(r), out(r), z(r + 1);
  std::vector<int> v(r);

  // x pass
  for (int iz = 0; iz < r; ++iz)
    for (int iy = 0; iy < r; ++iy) {
      const size_t base = meta.index(0, iy, iz);
      for (int i = 0; i < r; ++i) f[i] = d[base + i];
      dt1d(f.data(), out.data(), r, v.data(), z.data());
      for (int i = 0; i < r; ++i) d[base + i] = out[i];
    }
  // y pass
  for (int iz = 0; iz < r; ++iz)
    for (int ix = 0; ix < r; ++ix) {
      for (int i = 0; i < r; ++i) f[i] = d[meta.index(ix, i, iz)];
      dt1d(f.data(), out.data(), r, v.data(), z.data());
      for (int i = 0; i < r; ++i) d[meta.index(ix, i, iz)] = out[i];
    }
  // z pass
  for (int iy = 0; iy < r; ++iy)
    for (int ix = 0; ix < r; ++ix) {
      for (int i = 0; i < r; ++i) f[i] = d[meta.index(ix, iy, i)];
      dt1d(f.data(), out.data(), r, v.data(), z.data());
      for (int i = 0; i < r; ++i) d[meta.index(ix, iy, i)] = out[i];
    }
  return d;
}

ScalarField distance_transform(const OccupancyGrid& occ, Region region) {
  const GridMeta& meta = occ.meta;
  const int r = meta.resolution;
  const double h = meta.spacing();
  const uint8_t region_bit = region == Region::Inside ? 1 : 0;

  std::vector<uint8_t> seeds(meta.cell_count());
  size_t n_seeds = 0;
  for (size_t i = 0; i < seeds.size(); ++i) {
    seeds[i] = (occ.bits[i] != 0) != (region_bit != 0);
    n_seeds += seeds[i];
  }

  ScalarField field(meta, 0.0f);
  if (n_seeds == 0) {
    // no complementary voxels: fall back to distance to the domain walls
    for (int iz = 0; iz < r; ++iz)
      for (int iy = 0; iy < r; ++iy)
        for (int ix = 0; ix < r; ++ix) {
          const double dx = std::min(ix + 0.5, r - ix - 0.5);
          const double dy = std::min(iy + 0.5, r - iy - 0.5);
          const double dz = std::min(iz + 0.5, r - iz - 0.5);
          field.at(ix, iy, iz) = static_cast<float>(std::min({dx, dy, dz}) * h);
        }
    return field;
  }

  const std::vector<double> d2 = squared_cell_distance(meta, seeds);
  for (size_t i = 0; i < d2.size(); ++i) {
    const bool in_region = (occ.bits[i] != 0) == (region_bit != 0);
    field.values[i] = in_region ? static_cast<float>(std::sqrt(d2[i]) * h) : 0.0f;
  }
  return field;
}

}  // namespace fracgen::voxel
