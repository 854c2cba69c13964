#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ovo/heads.hpp"
#include "ovo/selection.hpp"
#include "ovo/vocab.hpp"

namespace ovo {

/// Mixing coefficients of the total loss:
/// lambda1 * pix-pix + lambda2 * vox-pix + lambda3 * vox-text.
struct LossWeights {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double lambda3 = 1.0;

  void validate() const;
};

/// Frozen per-scene operands gathered for the valid voxel set: student 3D
/// feature rows, teacher rows and confidences at the mapped pixels, merged
/// training labels with their text targets, and the 2D maps for the
/// pixel-to-pixel term.
struct TrainingBatch {
  std::string scene_name;
  Eigen::MatrixXd voxel_features;  // |omega| x C
  Eigen::MatrixXd teacher_rows;    // |omega| x C1
  Eigen::VectorXd confidences;     // |omega|
  std::vector<int> labels;         // merged training label per omega voxel
  Eigen::MatrixXd text_targets;    // |omega| x C1, bank row per label
  std::array<FeatureMap, MultiScaleFusion2D::kLevels> student_pyramid;
  FeatureMap teacher_map;

  std::int64_t omega_size() const { return voxel_features.rows(); }
};

TrainingBatch build_training_batch(const CorrespondenceSet& corr,
                                   const Eigen::Ref<const Eigen::MatrixXd>& voxel_features,
                                   const FeatureMap& teacher2d, const LabelVolume& labels,
                                   const CategorySchema& schema, const EmbeddingBank& bank,
                                   const FeatureMap& student2d, std::string scene_name);

struct LossResult {
  double value = 0.0;
  GradientBuffer grads;
};

struct FusionLossResult {
  double value = 0.0;
  FusionGradients grads;
};

/// Confidence-reweighted voxel-to-pixel alignment:
/// mean over omega of w * (1 - cos(phi3d(f3d), teacher)). With reweighting
/// off every w is 1. Throws "no valid voxels" on an empty batch.
LossResult loss_vox_pix(const TrainingBatch& batch, const AlignmentHead& head3d,
                        bool reweight = true, int workers = 1);

/// Voxel-to-text alignment: mean over omega of 1 - cos(phi3d(f3d),
/// text(label)); background voxels use the background embedding.
LossResult loss_vox_text(const TrainingBatch& batch, const AlignmentHead& head3d,
                         const EmbeddingBank& bank, int workers = 1);

/// Pixel-to-pixel distillation over a flat student map:
/// sum over pixels of 1 - cos(phi2d(f2d), teacher); optionally mean-reduced.
LossResult loss_pix_pix(const FeatureMap& student, const FeatureMap& teacher,
                        const AlignmentHead& head2d, bool mean_reduction = false,
                        int workers = 1);

/// Pixel-to-pixel distillation through the multi-scale fusion head.
FusionLossResult loss_pix_pix(const std::array<FeatureMap, MultiScaleFusion2D::kLevels>& pyramid,
                              const FeatureMap& teacher, const MultiScaleFusion2D& fusion,
                              bool mean_reduction = false, int workers = 1);

double total_loss(double l_pix_pix, double l_vox_pix, double l_vox_text,
                  const LossWeights& weights);

/// Adaptive moments with decoupled weight decay.
struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamW {
 public:
  AdamW(Eigen::Index parameter_count, AdamWConfig config);
  void step(Eigen::VectorXd& params, const Eigen::Ref<const Eigen::VectorXd>& grad);
  std::int64_t steps_taken() const { return step_; }

 private:
  AdamWConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t step_ = 0;
};

struct TrainSettings {
  LossWeights weights;
  AdamWConfig optimizer;
  int epochs = 100;
  std::uint64_t seed = 0;
  bool reweight = true;
  bool pix_mean = false;
  int workers = 1;
};

struct EpochLog {
  int epoch = 0;
  double l_pix_pix = 0.0;
  double l_vox_pix = 0.0;
  double l_vox_text = 0.0;
  double total = 0.0;
};

struct TrainResult {
  AlignmentHead head3d;
  MultiScaleFusion2D fusion;
  std::vector<EpochLog> log;
};

/// Seeded end-to-end optimization of the alignment heads over frozen
/// features: scenes are visited in a shuffled order each epoch, both heads
/// receive one AdamW step per scene, and the per-epoch means of each loss
/// are logged. Scenes with an empty omega skip the voxel losses with a
/// warning. Throws (naming the scene) when a loss goes non-finite.
TrainResult train(const std::vector<TrainingBatch>& batches, AlignmentHead head3d,
                  MultiScaleFusion2D fusion, const TrainSettings& settings);

void write_loss_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace ovo
