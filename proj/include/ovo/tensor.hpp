#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ovo {

enum class Dtype : std::uint8_t { f32, f64 };

std::string dtype_name(Dtype dtype);
Dtype dtype_from_name(const std::string& name);
std::size_t dtype_width(Dtype dtype);

using RowMajorMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Contiguous row-major dense tensor. Values are held as doubles in memory
/// regardless of the dtype tag; the tag records the on-disk width (f32 data
/// is widened on load and narrowed on save, both exact round trips).
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(std::vector<std::int64_t> shape, Dtype dtype);
  static DenseTensor from_values(std::vector<std::int64_t> shape, Dtype dtype,
                                 Eigen::VectorXd values);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  Dtype dtype() const { return dtype_; }
  std::int64_t size() const { return values_.size(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  /// 2D view with the trailing dimension as columns (rows are all leading
  /// dimensions flattened in row-major order).
  Eigen::Map<const RowMajorMatrixXd> matrix() const;

  /// Rounds every value through the storage width (no-op for f64).
  void quantize_to_dtype();

 private:
  std::vector<std::int64_t> shape_;
  Dtype dtype_ = Dtype::f64;
  Eigen::VectorXd values_;
};

/// Writes manifest JSON at `manifest_path` and the raw little-endian payload
/// next to it (same stem, .bin extension). The manifest references the
/// payload by relative path.
void save_tensor(const DenseTensor& tensor, const std::filesystem::path& manifest_path);

/// Loads a tensor from its JSON manifest. Throws on malformed manifests and
/// on payloads whose byte size disagrees with the declared shape
/// ("payload size mismatch").
DenseTensor load_tensor(const std::filesystem::path& manifest_path);

}  // namespace ovo
