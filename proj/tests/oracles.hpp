#pragma once

// Brute-force reference implementations used only by tests. Each oracle is
// deliberately independent of the library's algorithmic path: rays are
// fine-sampled instead of walked, confusion counts come from scalar loops,
// and visibility is re-derived from first principles.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "ovo/geometry.hpp"
#include "ovo/volume.hpp"

namespace ovo::oracles {

inline Eigen::Vector3i cell_of(const Eigen::Vector3d& p, const VoxelGrid& grid) {
  const Eigen::Vector3d g = (p - grid.origin) / grid.voxel_size;
  return {static_cast<int>(std::floor(g.x())), static_cast<int>(std::floor(g.y())),
          static_cast<int>(std::floor(g.z()))};
}

/// Fine-step sampling along the segment, deduplicated and ordered.
inline std::vector<Eigen::Vector3i> sampled_ray_voxels(const Eigen::Vector3d& origin,
                                                       const Eigen::Vector3d& target,
                                                       const VoxelGrid& grid,
                                                       int samples = 1000) {
  std::vector<Eigen::Vector3i> seq;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const Eigen::Vector3i cell = cell_of(origin + t * (target - origin), grid);
    if (!grid.contains(cell)) {
      continue;
    }
    if (seq.empty() || seq.back() != cell) {
      seq.push_back(cell);
    }
  }
  return seq;
}

/// Exact segment-cell enumeration by brute force: collect every parameter
/// where the segment crosses an integer grid plane, sort them, and read the
/// cell of each interval midpoint. Unlike uniform sampling this cannot miss
/// corner slivers, and unlike the production walk it is not incremental.
inline std::vector<Eigen::Vector3i> crossing_ray_voxels(const Eigen::Vector3d& origin,
                                                        const Eigen::Vector3d& target,
                                                        const VoxelGrid& grid) {
  const Eigen::Vector3d a = (origin - grid.origin) / grid.voxel_size;
  const Eigen::Vector3d b = (target - grid.origin) / grid.voxel_size;
  const Eigen::Vector3d d = b - a;
  std::vector<double> ts{0.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      continue;
    }
    const double lo = std::min(a[k], b[k]);
    const double hi = std::max(a[k], b[k]);
    for (double m = std::ceil(lo); m <= std::floor(hi); m += 1.0) {
      const double t = (m - a[k]) / d[k];
      if (t > 0.0 && t < 1.0) {
        ts.push_back(t);
      }
    }
  }
  std::sort(ts.begin(), ts.end());
  std::vector<Eigen::Vector3i> seq;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    if (ts[i + 1] - ts[i] < 1e-12) {
      continue;
    }
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    Eigen::Vector3i cell;
    for (int k = 0; k < 3; ++k) {
      cell[k] = static_cast<int>(std::floor(a[k] + tm * d[k]));
    }
    if (!grid.contains(cell)) {
      continue;
    }
    if (seq.empty() || seq.back() != cell) {
      seq.push_back(cell);
    }
  }
  return seq;
}

/// Visibility from the exact enumeration: fewer than `threshold` distinct
/// occupied voxels (excluding the target and the camera's own voxel)
/// strictly before the target.
inline bool crossing_visible(const Eigen::Vector3d& camera_center,
                             const Eigen::Vector3i& target_voxel, const LabelVolume& occupancy,
                             int threshold = 1) {
  const VoxelGrid& grid = occupancy.grid;
  const Eigen::Vector3d target = voxel_center(target_voxel, grid);
  const Eigen::Vector3i cam_voxel = cell_of(camera_center, grid);
  int blockers = 0;
  for (const Eigen::Vector3i& cell : crossing_ray_voxels(camera_center, target, grid)) {
    if (cell == target_voxel) {
      break;
    }
    if (grid.contains(cam_voxel) && cell == cam_voxel) {
      continue;
    }
    if (occupancy.occupied(grid.linear_index(cell))) {
      if (++blockers >= threshold) {
        return false;
      }
    }
  }
  return true;
}

/// Visibility by fine sampling: a voxel is visible iff fewer than
/// `threshold` distinct occupied voxels (excluding the target and the
/// camera's own voxel) appear strictly before the target along the segment.
inline bool sampled_visible(const Eigen::Vector3d& camera_center,
                            const Eigen::Vector3i& target_voxel, const LabelVolume& occupancy,
                            int threshold = 1, int samples = 1000) {
  const VoxelGrid& grid = occupancy.grid;
  const Eigen::Vector3d target = voxel_center(target_voxel, grid);
  const Eigen::Vector3i cam_voxel = cell_of(camera_center, grid);
  std::set<std::int64_t> blockers;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const Eigen::Vector3i cell = cell_of(camera_center + t * (target - camera_center), grid);
    if (!grid.contains(cell)) {
      continue;
    }
    if (cell == target_voxel) {
      break;
    }
    if (grid.contains(cam_voxel) && cell == cam_voxel) {
      continue;
    }
    const std::int64_t linear = grid.linear_index(cell);
    if (occupancy.occupied(linear)) {
      blockers.insert(linear);
      if (static_cast<int>(blockers.size()) >= threshold) {
        return false;
      }
    }
  }
  return true;
}

/// First occupied voxel along a sampled camera ray, or -1.
inline std::int64_t sampled_first_hit(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                      const LabelVolume& labels, double max_range,
                                      int samples = 4000) {
  const VoxelGrid& grid = labels.grid;
  const Eigen::Vector3i cam_voxel = cell_of(origin, grid);
  for (int i = 0; i < samples; ++i) {
    const double t = max_range * static_cast<double>(i) / (samples - 1);
    const Eigen::Vector3i cell = cell_of(origin + t * dir, grid);
    if (!grid.contains(cell) || (grid.contains(cam_voxel) && cell == cam_voxel)) {
      continue;
    }
    const std::int64_t linear = grid.linear_index(cell);
    if (labels.occupied(linear)) {
      return linear;
    }
  }
  return -1;
}

/// Scalar confusion counting without the ConfusionMatrix type.
inline std::int64_t count_pairs(const LabelVolume& pred, const LabelVolume& gt, int g, int p,
                                const std::set<int>& ignore) {
  std::int64_t n = 0;
  for (std::int64_t v = 0; v < gt.grid.voxel_count(); ++v) {
    if (gt.at(v) == LabelVolume::kInvalid || ignore.count(gt.at(v)) > 0) {
      continue;
    }
    if (gt.at(v) == g && pred.at(v) == p) {
      ++n;
    }
  }
  return n;
}

/// Scalar IoU for one class straight from the definition.
inline double scalar_iou(const LabelVolume& pred, const LabelVolume& gt, int cls,
                         const std::set<int>& ignore, bool& defined) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::int64_t v = 0; v < gt.grid.voxel_count(); ++v) {
    const int g = gt.at(v);
    if (g == LabelVolume::kInvalid || ignore.count(g) > 0) {
      continue;
    }
    const int p = pred.at(v);
    if (g == cls && p == cls) {
      ++tp;
    } else if (g != cls && p == cls) {
      ++fp;
    } else if (g == cls && p != cls) {
      ++fn;
    }
  }
  defined = (tp + fp + fn) > 0;
  return defined ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 0.0;
}

}  // namespace ovo::oracles
