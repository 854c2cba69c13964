#include "ovo/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ovo {

namespace {

constexpr double kDegenerateDepth = 1e-12;

std::int64_t floor_to_int64(double v) { return static_cast<std::int64_t>(std::floor(v)); }

}  // namespace

CameraModel::CameraModel(double fx_, double fy_, double cx_, double cy_,
                         const Eigen::Matrix4d& extrinsics_, int width, int height)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_), extrinsics(extrinsics_), image_width(width),
      image_height(height) {
  validate();
}

Eigen::Vector3d CameraModel::center() const {
  return -rotation().transpose() * translation();
}

Eigen::Vector3d CameraModel::world_to_camera(const Eigen::Vector3d& point_world) const {
  return rotation() * point_world + translation();
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw std::invalid_argument("camera image dimensions must be positive");
  }
  const Eigen::Matrix3d r = rotation();
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity())
                               .cwiseAbs()
                               .maxCoeff();
  if (!(ortho_err < 1e-6)) {
    throw std::invalid_argument("camera rotation block is not orthonormal");
  }
  const Eigen::RowVector4d last = extrinsics.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("camera extrinsics last row must be [0,0,0,1]");
  }
}

VoxelGrid::VoxelGrid(const Eigen::Vector3i& dims_, const Eigen::Vector3d& origin_,
                     double voxel_size_)
    : dims(dims_), origin(origin_), voxel_size(voxel_size_) {
  validate();
}

Eigen::Vector3i VoxelGrid::index_of(std::int64_t linear) const {
  if (linear < 0 || linear >= voxel_count()) {
    throw std::invalid_argument("index outside grid");
  }
  const std::int64_t x = linear % dims.x();
  const std::int64_t y = (linear / dims.x()) % dims.y();
  const std::int64_t z = linear / (static_cast<std::int64_t>(dims.x()) * dims.y());
  return {static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
}

void VoxelGrid::validate() const {
  if ((dims.array() <= 0).any()) {
    throw std::invalid_argument("grid dims must be positive");
  }
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("voxel size must be positive");
  }
  if (!origin.allFinite()) {
    throw std::invalid_argument("grid origin must be finite");
  }
}

Ray::Ray(const Eigen::Vector3d& origin_, const Eigen::Vector3d& direction_)
    : origin(origin_), direction(direction_) {
  if (std::abs(direction.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("ray direction must be unit length");
  }
}

Eigen::Vector3d voxel_center(const Eigen::Vector3i& idx, const VoxelGrid& grid) {
  if (!grid.contains(idx)) {
    throw std::invalid_argument("index outside grid");
  }
  return grid.origin + grid.voxel_size * (idx.cast<double>() + Eigen::Vector3d::Constant(0.5));
}

Projection project(const Eigen::Vector3d& point_world, const CameraModel& camera) {
  const Eigen::Vector3d pc = camera.world_to_camera(point_world);
  Projection out;
  out.depth = pc.z();
  if (pc.z() <= 0.0) {
    out.in_front = false;
    return out;
  }
  if (pc.z() < kDegenerateDepth) {
    throw std::invalid_argument("degenerate depth");
  }
  out.in_front = true;
  out.u = camera.fx * pc.x() / pc.z() + camera.cx;
  out.v = camera.fy * pc.y() / pc.z() + camera.cy;
  return out;
}

VoxelTraversal::VoxelTraversal(const Eigen::Vector3d& origin, const Eigen::Vector3d& target,
                               const VoxelGrid& grid)
    : grid_(&grid) {
  const Eigen::Vector3d delta = target - origin;
  if (delta.squaredNorm() == 0.0) {
    throw std::invalid_argument("degenerate ray");
  }
  // Work in voxel units with the segment parameterized over t in [0, 1].
  const Eigen::Vector3d a = (origin - grid.origin) / grid.voxel_size;
  const Eigen::Vector3d b = (target - grid.origin) / grid.voxel_size;
  const Eigen::Vector3d dir = b - a;

  const double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    cell_[k] = floor_to_int64(a[k]);
    end_cell_[k] = floor_to_int64(b[k]);
    if (dir[k] > 0.0) {
      step_[k] = 1;
      t_delta_[k] = 1.0 / dir[k];
      t_max_[k] = (static_cast<double>(cell_[k]) + 1.0 - a[k]) / dir[k];
    } else if (dir[k] < 0.0) {
      step_[k] = -1;
      t_delta_[k] = -1.0 / dir[k];
      t_max_[k] = (static_cast<double>(cell_[k]) - a[k]) / dir[k];
    } else {
      step_[k] = 0;
      t_delta_[k] = inf;
      t_max_[k] = inf;
    }
  }
  // One axis step per crossing plus slack for endpoint rounding.
  steps_left_ = (end_cell_ - cell_).cwiseAbs().sum() + 3;
}

bool VoxelTraversal::cell_in_grid() const {
  return cell_.x() >= 0 && cell_.y() >= 0 && cell_.z() >= 0 && cell_.x() < grid_->dims.x() &&
         cell_.y() < grid_->dims.y() && cell_.z() < grid_->dims.z();
}

bool VoxelTraversal::next(Eigen::Vector3i& voxel) {
  while (!done_) {
    if (first_) {
      first_ = false;
    } else {
      if (cell_ == end_cell_ || steps_left_-- <= 0) {
        done_ = true;
        break;
      }
      // Smallest boundary-crossing parameter wins; exact ties step x, then
      // y, then z on successive iterations.
      int axis = 0;
      if (t_max_.y() < t_max_.x()) {
        axis = 1;
      }
      if (t_max_.z() < t_max_[axis]) {
        axis = 2;
      }
      if (t_max_[axis] > 1.0) {
        done_ = true;  // next crossing lies past the segment end
        break;
      }
      cell_[axis] += step_[axis];
      t_max_[axis] += t_delta_[axis];
    }
    if (cell_in_grid()) {
      voxel = cell_.cast<int>();
      return true;
    }
  }
  return false;
}

std::vector<Eigen::Vector3i> traverse_ray(const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& target, const VoxelGrid& grid) {
  VoxelTraversal walk(origin, target, grid);
  std::vector<Eigen::Vector3i> cells;
  Eigen::Vector3i v;
  while (walk.next(v)) {
    cells.push_back(v);
  }
  return cells;
}

}  // namespace ovo
