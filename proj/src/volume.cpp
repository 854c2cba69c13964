#include "ovo/volume.hpp"

#include <stdexcept>

namespace ovo {

void LabelVolume::validate() const {
  grid.validate();
  if (static_cast<std::int64_t>(labels.size()) != grid.voxel_count()) {
    throw std::invalid_argument("label volume size does not match grid");
  }
}

SegMap2D::SegMap2D(int width_, int height_, std::vector<std::uint8_t> class_ids_,
                   Eigen::VectorXd confidence_)
    : width(width_), height(height_), class_ids(std::move(class_ids_)),
      confidence(std::move(confidence_)) {
  validate();
}

void SegMap2D::validate() const {
  const std::int64_t n = static_cast<std::int64_t>(width) * height;
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("segmentation map dimensions must be positive");
  }
  if (static_cast<std::int64_t>(class_ids.size()) != n || confidence.size() != n) {
    throw std::invalid_argument("segmentation map size does not match dimensions");
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = confidence[i];
    if (!(w > 0.0) || w > 1.0) {
      throw std::invalid_argument("segmentation confidence must lie in (0, 1]");
    }
  }
}

FeatureMap::FeatureMap(int width_, int height_, Eigen::MatrixXd values_)
    : width(width_), height(height_), values(std::move(values_)) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("feature map dimensions must be positive");
  }
  if (values.rows() != static_cast<std::int64_t>(width) * height) {
    throw std::invalid_argument("feature map row count does not match dimensions");
  }
}

}  // namespace ovo
