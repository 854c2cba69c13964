#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

#include "ovo/geometry.hpp"

namespace ovo {

/// Per-voxel semantic labels: 0 = empty space, 1..K = semantic classes,
/// 255 = invalid/unknown ground truth.
struct LabelVolume {
  static constexpr std::uint8_t kEmpty = 0;
  static constexpr std::uint8_t kInvalid = 255;

  VoxelGrid grid;
  std::vector<std::uint8_t> labels;

  LabelVolume() = default;
  LabelVolume(VoxelGrid grid_, std::vector<std::uint8_t> labels_)
      : grid(std::move(grid_)), labels(std::move(labels_)) {
    validate();
  }
  static LabelVolume empty(const VoxelGrid& grid_) {
    return {grid_, std::vector<std::uint8_t>(static_cast<std::size_t>(grid_.voxel_count()), 0)};
  }

  std::uint8_t at(std::int64_t linear) const {
    return labels[static_cast<std::size_t>(linear)];
  }
  std::uint8_t& at(std::int64_t linear) { return labels[static_cast<std::size_t>(linear)]; }

  /// A voxel holds semantic content iff its label is neither empty nor
  /// invalid; this is the occupancy test used for occlusion reasoning.
  bool occupied(std::int64_t linear) const {
    const std::uint8_t l = at(linear);
    return l != kEmpty && l != kInvalid;
  }

  void validate() const;
};

/// Teacher 2D segmentation: per-pixel predicted class id plus the softmax
/// maximum as confidence. Pixel (i, j) lives at row j * width + i.
struct SegMap2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> class_ids;
  Eigen::VectorXd confidence;

  SegMap2D() = default;
  SegMap2D(int width_, int height_, std::vector<std::uint8_t> class_ids_,
           Eigen::VectorXd confidence_);

  std::int64_t pixel_index(int i, int j) const {
    return static_cast<std::int64_t>(j) * width + i;
  }
  void validate() const;
};

/// Dense per-pixel feature map: row y * width + x holds the C-dim feature
/// of pixel (x, y).
struct FeatureMap {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd values;  // (height * width) x channels

  FeatureMap() = default;
  FeatureMap(int width_, int height_, Eigen::MatrixXd values_);

  std::int64_t pixel_count() const { return static_cast<std::int64_t>(width) * height; }
  int channels() const { return static_cast<int>(values.cols()); }
  std::int64_t pixel_index(int x, int y) const {
    return static_cast<std::int64_t>(y) * width + x;
  }
};

}  // namespace ovo
