#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace ovo {

/// Pinhole camera with a rigid world-to-camera extrinsic transform.
/// Pixel (i, j) covers [i, i+1) x [j, j+1): a projection (u, v) lands in
/// pixel (floor(u), floor(v)).
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix4d extrinsics = Eigen::Matrix4d::Identity();  // world -> camera
  int image_width = 0;
  int image_height = 0;

  CameraModel() = default;
  CameraModel(double fx_, double fy_, double cx_, double cy_, const Eigen::Matrix4d& extrinsics_,
              int width, int height);

  Eigen::Matrix3d rotation() const { return extrinsics.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return extrinsics.topRightCorner<3, 1>(); }

  /// Camera center expressed in world coordinates.
  Eigen::Vector3d center() const;

  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& point_world) const;

  /// Throws std::invalid_argument when focal lengths, image dims, the
  /// rotation block, or the last extrinsic row are out of contract.
  void validate() const;
};

/// Axis-aligned voxel lattice. Voxel (0,0,0) has its minimum corner at
/// `origin`; the linear index x + X*(y + Y*z) orders voxels x-fastest.
struct VoxelGrid {
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.0;

  VoxelGrid() = default;
  VoxelGrid(const Eigen::Vector3i& dims_, const Eigen::Vector3d& origin_, double voxel_size_);

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims.x()) * dims.y() * dims.z();
  }
  bool contains(const Eigen::Vector3i& idx) const {
    return (idx.array() >= 0).all() && (idx.array() < dims.array()).all();
  }
  std::int64_t linear_index(const Eigen::Vector3i& idx) const {
    return idx.x() + static_cast<std::int64_t>(dims.x()) *
                         (idx.y() + static_cast<std::int64_t>(dims.y()) * idx.z());
  }
  Eigen::Vector3i index_of(std::int64_t linear) const;

  Eigen::Vector3d min_corner() const { return origin; }
  Eigen::Vector3d max_corner() const {
    return origin + voxel_size * dims.cast<double>();
  }

  void validate() const;
};

/// Unit-direction ray; direction norm is checked to 1e-9 on construction.
struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();

  Ray() = default;
  Ray(const Eigen::Vector3d& origin_, const Eigen::Vector3d& direction_);
};

/// World coordinates of a voxel's center. Throws "index outside grid".
Eigen::Vector3d voxel_center(const Eigen::Vector3i& idx, const VoxelGrid& grid);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool in_front = false;  // false: point is behind the camera (z_c <= 0)
};

/// Projects a world point through the pinhole model. Points with z_c <= 0
/// come back with in_front = false; a strictly positive depth below 1e-12
/// throws "degenerate depth".
Projection project(const Eigen::Vector3d& point_world, const CameraModel& camera);

/// Amanatides-Woo style segment traversal over a voxel grid.
///
/// Enumerates every voxel the segment [origin, target] intersects, in
/// strictly increasing ray-parameter order, skipping voxels outside the
/// grid. When the traversal reaches a boundary crossing where two or three
/// axes tie exactly, axes are stepped one at a time in fixed x, y, z order,
/// so the emitted sequence is deterministic and consecutive voxels always
/// differ by +-1 in exactly one coordinate.
class VoxelTraversal {
 public:
  /// Throws "degenerate ray" when target == origin.
  VoxelTraversal(const Eigen::Vector3d& origin, const Eigen::Vector3d& target,
                 const VoxelGrid& grid);

  /// Writes the next in-grid voxel into `voxel`; returns false when the
  /// segment is exhausted.
  bool next(Eigen::Vector3i& voxel);

 private:
  using Cell = Eigen::Matrix<std::int64_t, 3, 1>;

  const VoxelGrid* grid_;
  Cell cell_;
  Cell end_cell_;
  Eigen::Vector3i step_;
  Eigen::Vector3d t_max_;
  Eigen::Vector3d t_delta_;
  std::int64_t steps_left_;
  bool first_ = true;
  bool done_ = false;

  bool cell_in_grid() const;
};

/// Materialized traversal; see VoxelTraversal for ordering guarantees.
std::vector<Eigen::Vector3i> traverse_ray(const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& target, const VoxelGrid& grid);

}  // namespace ovo
