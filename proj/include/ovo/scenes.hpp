#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ovo/geometry.hpp"
#include "ovo/vocab.hpp"
#include "ovo/volume.hpp"

namespace ovo {

struct SynthConfig {
  Eigen::Vector3i grid_dims{24, 16, 24};
  Eigen::Vector3d origin{0.0, 0.0, 0.0};
  double voxel_size = 0.2;
  int image_width = 64;
  int image_height = 48;
  int base_count = 5;
  int novel_count = 3;
  int feat3d_dim = 200;    // student 3D channels (C)
  int teacher_dim = 512;   // teacher/text channels (C1)
  int student2d_dim = 200; // student 2D channels (C2)
  int object_count = 6;
  int min_object_size = 2;
  int max_object_size = 6;
  double sigma = 0.05;              // feature noise magnitude
  double invalid_fraction = 0.0;    // voxels overwritten with the invalid id
  double corrupt_fraction = 0.0;    // pixels given wrong-class teacher features
  double corrupt_confidence = 0.02; // confidence forced onto corrupted pixels
  double temperature = 1.0;         // teacher confidence softmax temperature
  int up_axis = 1;                  // 1 = y up, 2 = z up

  /// class_random: per-class seeded random feature vectors (default).
  /// text: 3D features reuse the text embeddings (requires C == C1).
  enum class FeatureMode { class_random, text };
  FeatureMode feature_mode = FeatureMode::class_random;

  /// When false, only geometry and the teacher segmentation are produced
  /// (full-size grids for selection benchmarks skip the feature tensors).
  bool generate_features = true;

  std::uint64_t seed = 0;

  void validate() const;
};

/// A fully materialized scene. Tensors that a data export may omit are
/// optional; the synthetic generator fills everything.
struct Scene {
  std::string name;
  std::string dataset = "synthetic";
  std::string provenance = "synthetic";
  VoxelGrid grid;
  CameraModel camera;
  CategorySchema schema;
  LabelVolume labels;
  std::optional<Eigen::MatrixXd> feat3d;  // N x C, rows ordered by linear voxel index
  std::optional<FeatureMap> teacher2d;
  std::optional<SegMap2D> seg;
  std::optional<FeatureMap> student2d;
};

/// Mask of semantic (occupied) voxels.
std::vector<std::uint8_t> occupied_mask(const LabelVolume& labels);

/// Per-pixel class of the first occupied voxel along the camera ray
/// through each pixel center (0 when the ray hits nothing), using the same
/// traversal geometry as the occlusion filter.
std::vector<std::uint8_t> render_first_hit_classes(const LabelVolume& labels,
                                                   const CameraModel& camera);

/// Deterministic synthetic dataset: one embedding bank and feature
/// generators shared across scenes, with per-scene geometry and noise
/// derived from (seed, scene index).
class SynthDataset {
 public:
  explicit SynthDataset(const SynthConfig& config);

  const SynthConfig& config() const { return config_; }
  const EmbeddingBank& bank() const { return bank_; }
  const CategorySchema& schema() const { return bank_.schema(); }

  /// Boxes of random classes over a floor plane, rendered by the oracle
  /// teacher. Fully determined by (config seed, scene_index).
  Scene make_scene(int scene_index) const;

 private:
  SynthConfig config_;
  EmbeddingBank bank_;
  Eigen::MatrixXd class_features_;      // semantic categories x C
  Eigen::MatrixXd student_projection_;  // C2 x C1
};

void save_scene(const Scene& scene, const std::filesystem::path& dir);
Scene load_scene(const std::filesystem::path& dir);

/// load_scene plus shape/schema validation against the declared dataset
/// (nyuv2: 60x36x60 grids, 11 semantic classes, novel = bed/table/other;
/// semantickitti: 256x256x32, 19 semantic classes, novel =
/// car/road/building).
Scene ingest_real(const std::filesystem::path& dir);

}  // namespace ovo
