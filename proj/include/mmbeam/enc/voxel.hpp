#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mmbeam/core/mat.hpp"
#include "mmbeam/data/pointcloud.hpp"
#include "mmbeam/enc/config.hpp"

namespace mmbeam::enc {

// Points bucketed into the dense voxel grid, rows in canonical order
// (voxel id, then lexicographic point coordinates). The canonical order makes
// every downstream reduction bit-exactly invariant to input point order.
template <typename T>
struct VoxelizedPoints {
  Mat<T> features;        // [P_kept x 7] per-point features
  std::vector<int> seg;   // voxel id per row
  int n_voxels = 0;
};

struct VoxelGridSpec {
  std::array<int, 3> dims;
  std::array<double, 3> lo, hi, cell;

  explicit VoxelGridSpec(const EncoderConfig& cfg) {
    dims = cfg.voxel_grid;
    lo = {-cfg.voxel_extent[0] / 2.0, 0.0, -1.0};
    hi = {cfg.voxel_extent[0] / 2.0, cfg.voxel_extent[1],
          cfg.voxel_extent[2] - 1.0};
    for (int a = 0; a < 3; ++a) cell[a] = (hi[a] - lo[a]) / dims[a];
  }

  int n_voxels() const { return dims[0] * dims[1] * dims[2]; }

  // Voxel id for a point, or -1 when outside the extent.
  int voxel_of(const data::Point& p) const {
    std::array<int, 3> v;
    for (int a = 0; a < 3; ++a) {
      if (p[a] < lo[a] || p[a] >= hi[a]) return -1;
      v[a] = static_cast<int>((p[a] - lo[a]) / cell[a]);
      v[a] = std::min(v[a], dims[a] - 1);
    }
    return (v[0] * dims[1] + v[1]) * dims[2] + v[2];
  }

  std::array<double, 3> voxel_center(int id) const {
    int iz = id % dims[2];
    int iy = (id / dims[2]) % dims[1];
    int ix = id / (dims[1] * dims[2]);
    return {lo[0] + (ix + 0.5) * cell[0], lo[1] + (iy + 0.5) * cell[1],
            lo[2] + (iz + 0.5) * cell[2]};
  }
};

// Per-point feature: coordinates normalized by the extent, raw intensity,
// and the offset from the owning voxel's center normalized by half a cell.
template <typename T>
VoxelizedPoints<T> voxelize(const data::PointCloud& points,
                            const EncoderConfig& cfg) {
  VoxelGridSpec spec(cfg);
  struct Kept {
    int voxel;
    data::Point p;
  };
  std::vector<Kept> kept;
  kept.reserve(points.size());
  for (const data::Point& p : points) {
    for (double c : p)
      if (!std::isfinite(c))
        throw std::invalid_argument("voxelize: non-finite point coordinate");
    int v = spec.voxel_of(p);
    if (v >= 0) kept.push_back({v, p});
  }
  if (kept.empty())
    throw std::invalid_argument("voxelize: all points outside the voxel extent");

  std::sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    if (a.voxel != b.voxel) return a.voxel < b.voxel;
    return a.p < b.p;
  });

  VoxelizedPoints<T> out;
  out.n_voxels = spec.n_voxels();
  out.features.resize(static_cast<Eigen::Index>(kept.size()), 7);
  out.seg.resize(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    const data::Point& p = kept[i].p;
    auto c = spec.voxel_center(kept[i].voxel);
    Eigen::Index r = static_cast<Eigen::Index>(i);
    for (int a = 0; a < 3; ++a) {
      double mid = (spec.lo[a] + spec.hi[a]) / 2.0;
      double half = (spec.hi[a] - spec.lo[a]) / 2.0;
      out.features(r, a) = static_cast<T>((p[a] - mid) / half);
      out.features(r, 4 + a) =
          static_cast<T>((p[a] - c[a]) / (spec.cell[a] / 2.0));
    }
    out.features(r, 3) = static_cast<T>(p[3]);
    out.seg[i] = kept[i].voxel;
  }
  return out;
}

}  // namespace mmbeam::enc
