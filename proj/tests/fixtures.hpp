#pragma once

// Hand-built fixtures for filter and evaluation tests.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <random>
#include <vector>

#include "ovo/geometry.hpp"
#include "ovo/vocab.hpp"
#include "ovo/volume.hpp"

namespace ovo::fixtures {

/// Proper look-at rotation with image y pointing against world up.
inline CameraModel lookat_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                                 int width, int height, double focal,
                                 const Eigen::Vector3d& up = Eigen::Vector3d::UnitY()) {
  const Eigen::Vector3d forward = (target - position).normalized();
  const Eigen::Vector3d x_cam = (-up).cross(forward).normalized();
  const Eigen::Vector3d y_cam = forward.cross(x_cam);
  Eigen::Matrix4d ext = Eigen::Matrix4d::Identity();
  ext.block<1, 3>(0, 0) = x_cam.transpose();
  ext.block<1, 3>(1, 0) = y_cam.transpose();
  ext.block<1, 3>(2, 0) = forward.transpose();
  ext.topRightCorner<3, 1>() = -ext.topLeftCorner<3, 3>() * position;
  return CameraModel(focal, focal, 0.5 * width, 0.5 * height, ext, width, height);
}

inline LabelVolume random_labels(const VoxelGrid& grid, int classes, double occupancy,
                                 double invalid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cls(1, classes);
  LabelVolume volume = LabelVolume::empty(grid);
  for (auto& l : volume.labels) {
    const double r = unit(rng);
    if (r < invalid) {
      l = LabelVolume::kInvalid;
    } else if (r < invalid + occupancy) {
      l = static_cast<std::uint8_t>(cls(rng));
    }
  }
  return volume;
}

inline SegMap2D random_seg(int width, int height, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(1, classes);
  std::uniform_real_distribution<double> conf(0.05, 1.0);
  std::vector<std::uint8_t> ids(static_cast<std::size_t>(width) * height);
  Eigen::VectorXd confidence(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ids[i] = static_cast<std::uint8_t>(cls(rng));
    confidence[static_cast<Eigen::Index>(i)] = conf(rng);
  }
  return SegMap2D(width, height, std::move(ids), std::move(confidence));
}

/// base_count base classes, novel_count novel classes, one background.
inline CategorySchema simple_schema(int base_count, int novel_count) {
  std::vector<Category> cats;
  for (int b = 0; b < base_count; ++b) {
    cats.push_back({"base_" + std::to_string(b), true, false});
  }
  for (int n = 0; n < novel_count; ++n) {
    cats.push_back({"novel_" + std::to_string(n), false, false});
  }
  cats.push_back({"background", false, true});
  return CategorySchema(std::move(cats));
}

inline LabelVolume random_prediction(const VoxelGrid& grid, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, classes);
  LabelVolume volume = LabelVolume::empty(grid);
  for (auto& l : volume.labels) {
    l = static_cast<std::uint8_t>(cls(rng));
  }
  return volume;
}

}  // namespace ovo::fixtures
