#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ovo/heads.hpp"
#include "ovo/volume.hpp"

namespace ovo {

struct Category {
  std::string name;
  bool base = false;
  bool background = false;
};

/// Ordered category list. Label ids are 1-based positions in this order;
/// id 0 is empty space and 255 is invalid ground truth. Semantic names are
/// partitioned into base (C_B) and novel (C_N = neither base nor
/// background); exactly one background entry is required.
class CategorySchema {
 public:
  CategorySchema() = default;
  explicit CategorySchema(std::vector<Category> categories,
                          std::optional<int> unknown_merge_label = std::nullopt);

  int category_count() const { return static_cast<int>(categories_.size()); }
  const std::vector<Category>& categories() const { return categories_; }
  const Category& category_for_label(int label) const;

  /// 1-based label id; throws on unknown names.
  int label_of(const std::string& name) const;
  /// 1-based label id or 0 when the name is absent.
  int find_label(const std::string& name) const;

  int background_label() const { return background_label_; }
  /// Novel classes collapse to this id for training (defaults to the
  /// background label).
  int unknown_merge_label() const { return unknown_merge_label_; }

  bool is_semantic(int label) const {
    return label >= 1 && label <= category_count();
  }
  bool is_base(int label) const;
  bool is_novel(int label) const;
  bool is_background(int label) const { return label == background_label_; }

  std::vector<int> base_labels() const;
  std::vector<int> novel_labels() const;

 private:
  std::vector<Category> categories_;
  int background_label_ = 0;
  int unknown_merge_label_ = 0;
};

enum class BankProvenance : std::uint8_t { ingested, synthetic };

/// Unit-norm text embeddings, one row per schema category.
class EmbeddingBank {
 public:
  EmbeddingBank() = default;
  EmbeddingBank(std::vector<Category> categories, Eigen::MatrixXd embeddings,
                BankProvenance provenance);

  /// Seeded random orthonormal rows; requires dim >= category count.
  static EmbeddingBank synthetic_orthonormal(std::vector<Category> categories, int dim,
                                             std::uint64_t seed);

  int dim() const { return static_cast<int>(embeddings_.cols()); }
  int category_count() const { return static_cast<int>(embeddings_.rows()); }
  const CategorySchema& schema() const { return schema_; }
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  BankProvenance provenance() const { return provenance_; }

  Eigen::RowVectorXd embedding_for_label(int label) const;
  /// Bank row index of a category name, or -1 when absent.
  int find(const std::string& name) const;

  struct Restriction {
    Eigen::MatrixXd rows;      // one row per kept category, schema order
    std::vector<int> labels;   // label id of each kept row
  };
  /// Rows for C_B plus the background category, in schema order.
  Restriction base_and_background() const;

 private:
  CategorySchema schema_;
  Eigen::MatrixXd embeddings_;
  BankProvenance provenance_ = BankProvenance::synthetic;
};

void save_bank(const EmbeddingBank& bank, const std::filesystem::path& manifest_path);
EmbeddingBank load_bank(const std::filesystem::path& manifest_path);

/// Substitutes the category into a template containing exactly one "{}"
/// placeholder. The default template follows the common photo prompt.
std::string build_prompt(const std::string& category,
                         const std::string& prompt_template = "a photo of {}");

/// Replaces every novel label by the schema's unknown merge id; empty,
/// invalid, and base labels pass through. Idempotent.
LabelVolume merge_novel_to_unknown(const LabelVolume& labels, const CategorySchema& schema);

/// Classifies every pixel of the teacher feature map against the bank
/// restricted to base + background: cosine similarities, temperature
/// softmax, argmax class and max probability as confidence.
SegMap2D confidence_from_teacher(const FeatureMap& teacher, const EmbeddingBank& bank,
                                 double temperature);

struct VoxelClassification {
  LabelVolume labels;
  Eigen::VectorXd max_scores;  // cosine of the winning query, 0 when unmasked
};

/// Open-vocabulary voxel classification: for each masked voxel, the aligned
/// feature is scored against every query embedding and the argmax wins
/// (ties break to the lowest query index). Unmasked voxels stay empty.
VoxelClassification classify_voxels(const Eigen::Ref<const Eigen::MatrixXd>& voxel_features,
                                    const AlignmentHead& head3d, const EmbeddingBank& bank,
                                    const std::vector<std::string>& query_names,
                                    const std::vector<std::uint8_t>& mask, const VoxelGrid& grid,
                                    int workers = 1);

}  // namespace ovo
