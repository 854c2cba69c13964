#include "ovo/vocab.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "ovo/parallel.hpp"
#include "ovo/similarity.hpp"
#include "ovo/tensor.hpp"

namespace ovo {

CategorySchema::CategorySchema(std::vector<Category> categories,
                               std::optional<int> unknown_merge_label)
    : categories_(std::move(categories)) {
  if (categories_.empty()) {
    throw std::invalid_argument("schema requires at least one category");
  }
  if (categories_.size() >= 255) {
    throw std::invalid_argument("schema exceeds the 254-category label range");
  }
  int background_count = 0;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const auto& c = categories_[i];
    if (c.name.empty()) {
      throw std::invalid_argument("category names must be non-empty");
    }
    for (std::size_t j = i + 1; j < categories_.size(); ++j) {
      if (categories_[j].name == c.name) {
        throw std::invalid_argument("duplicate category name: " + c.name);
      }
    }
    if (c.background) {
      if (c.base) {
        throw std::invalid_argument("background category cannot be a base class");
      }
      background_label_ = static_cast<int>(i) + 1;
      ++background_count;
    }
  }
  if (background_count != 1) {
    throw std::invalid_argument("schema requires exactly one background category");
  }
  unknown_merge_label_ = unknown_merge_label.value_or(background_label_);
  if (!is_semantic(unknown_merge_label_)) {
    throw std::invalid_argument("unknown merge id must name a schema category");
  }
}

const Category& CategorySchema::category_for_label(int label) const {
  if (!is_semantic(label)) {
    throw std::invalid_argument("label id outside schema: " + std::to_string(label));
  }
  return categories_[static_cast<std::size_t>(label - 1)];
}

int CategorySchema::label_of(const std::string& name) const {
  const int label = find_label(name);
  if (label == 0) {
    throw std::invalid_argument("unknown category name: " + name);
  }
  return label;
}

int CategorySchema::find_label(const std::string& name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].name == name) {
      return static_cast<int>(i) + 1;
    }
  }
  return 0;
}

bool CategorySchema::is_base(int label) const {
  return is_semantic(label) && categories_[static_cast<std::size_t>(label - 1)].base;
}

bool CategorySchema::is_novel(int label) const {
  if (!is_semantic(label)) {
    return false;
  }
  const auto& c = categories_[static_cast<std::size_t>(label - 1)];
  return !c.base && !c.background;
}

std::vector<int> CategorySchema::base_labels() const {
  std::vector<int> out;
  for (int l = 1; l <= category_count(); ++l) {
    if (is_base(l)) {
      out.push_back(l);
    }
  }
  return out;
}

std::vector<int> CategorySchema::novel_labels() const {
  std::vector<int> out;
  for (int l = 1; l <= category_count(); ++l) {
    if (is_novel(l)) {
      out.push_back(l);
    }
  }
  return out;
}

EmbeddingBank::EmbeddingBank(std::vector<Category> categories, Eigen::MatrixXd embeddings,
                             BankProvenance provenance)
    : schema_(std::move(categories)), embeddings_(std::move(embeddings)),
      provenance_(provenance) {
  if (embeddings_.rows() != schema_.category_count()) {
    throw std::invalid_argument("embedding row count does not match category count");
  }
  for (Eigen::Index r = 0; r < embeddings_.rows(); ++r) {
    if (std::abs(embeddings_.row(r).norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("embedding rows must be unit norm");
    }
  }
}

EmbeddingBank EmbeddingBank::synthetic_orthonormal(std::vector<Category> categories, int dim,
                                                   std::uint64_t seed) {
  const int k = static_cast<int>(categories.size());
  if (dim < k) {
    throw std::invalid_argument("embedding dim must be >= category count for orthonormal rows");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd rows(k, dim);
  for (int r = 0; r < k; ++r) {
    for (;;) {
      for (int c = 0; c < dim; ++c) {
        rows(r, c) = gauss(rng);
      }
      // Gram-Schmidt against the rows already fixed.
      for (int p = 0; p < r; ++p) {
        rows.row(r) -= rows.row(r).dot(rows.row(p)) * rows.row(p);
      }
      const double n = rows.row(r).norm();
      if (n > 1e-6) {
        rows.row(r) /= n;
        break;
      }
    }
  }
  return EmbeddingBank(std::move(categories), std::move(rows), BankProvenance::synthetic);
}

Eigen::RowVectorXd EmbeddingBank::embedding_for_label(int label) const {
  if (label < 1 || label > category_count()) {
    throw std::invalid_argument("no embedding for label " + std::to_string(label));
  }
  return embeddings_.row(label - 1);
}

int EmbeddingBank::find(const std::string& name) const {
  const int label = schema_.find_label(name);
  return label == 0 ? -1 : label - 1;
}

EmbeddingBank::Restriction EmbeddingBank::base_and_background() const {
  std::vector<int> labels;
  for (int l = 1; l <= category_count(); ++l) {
    if (schema_.is_base(l) || schema_.is_background(l)) {
      labels.push_back(l);
    }
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(labels.size()), dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = embeddings_.row(labels[i] - 1);
  }
  return {std::move(rows), std::move(labels)};
}

void save_bank(const EmbeddingBank& bank, const std::filesystem::path& manifest_path) {
  const std::filesystem::path bin_path =
      std::filesystem::path(manifest_path).replace_extension(".bin");
  nlohmann::json manifest;
  manifest["dim"] = bank.dim();
  manifest["provenance"] =
      bank.provenance() == BankProvenance::synthetic ? "synthetic" : "ingested";
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : bank.schema().categories()) {
    cats.push_back({{"name", c.name}, {"base", c.base}, {"background", c.background}});
  }
  manifest["categories"] = cats;
  manifest["data"] = bin_path.filename().string();

  std::ofstream mf(manifest_path);
  if (!mf) {
    throw std::runtime_error("cannot open for writing: " + manifest_path.string());
  }
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open for writing: " + bin_path.string());
  }
  const Eigen::MatrixXd& e = bank.embeddings();
  std::vector<float> row(static_cast<std::size_t>(e.cols()));
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = static_cast<float>(e(r, c));
    }
    bf.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!bf) {
    throw std::runtime_error("failed writing bank payload: " + bin_path.string());
  }
}

EmbeddingBank load_bank(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) {
    throw std::runtime_error("cannot open bank manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed bank manifest " + manifest_path.string() + ": " +
                             e.what());
  }
  const int dim = manifest.at("dim").get<int>();
  std::vector<Category> categories;
  for (const auto& c : manifest.at("categories")) {
    categories.push_back({c.at("name").get<std::string>(), c.at("base").get<bool>(),
                          c.at("background").get<bool>()});
  }
  const BankProvenance provenance =
      manifest.value("provenance", std::string("ingested")) == std::string("synthetic")
          ? BankProvenance::synthetic
          : BankProvenance::ingested;
  const std::filesystem::path bin_path =
      manifest_path.parent_path() / manifest.at("data").get<std::string>();
  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open bank payload: " + bin_path.string());
  }
  bf.seekg(0, std::ios::end);
  const std::int64_t byte_size = static_cast<std::int64_t>(bf.tellg());
  bf.seekg(0, std::ios::beg);
  const std::int64_t expected =
      static_cast<std::int64_t>(categories.size()) * dim * static_cast<std::int64_t>(sizeof(float));
  if (byte_size != expected) {
    throw std::runtime_error("payload size mismatch: " + bin_path.string());
  }
  std::vector<float> raw(static_cast<std::size_t>(categories.size()) *
                         static_cast<std::size_t>(dim));
  bf.read(reinterpret_cast<char*>(raw.data()), expected);
  if (!bf) {
    throw std::runtime_error("failed reading bank payload: " + bin_path.string());
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(categories.size()), dim);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      rows(r, c) = static_cast<double>(raw[static_cast<std::size_t>(r) * dim +
                                           static_cast<std::size_t>(c)]);
    }
  }
  return EmbeddingBank(std::move(categories), std::move(rows), provenance);
}

std::string build_prompt(const std::string& category, const std::string& prompt_template) {
  if (category.empty()) {
    throw std::invalid_argument("category name must be non-empty");
  }
  const std::string placeholder = "{}";
  const std::size_t first = prompt_template.find(placeholder);
  if (first == std::string::npos ||
      prompt_template.find(placeholder, first + placeholder.size()) != std::string::npos) {
    throw std::invalid_argument("prompt template must contain exactly one {} placeholder");
  }
  std::string out = prompt_template;
  out.replace(first, placeholder.size(), category);
  return out;
}

LabelVolume merge_novel_to_unknown(const LabelVolume& labels, const CategorySchema& schema) {
  LabelVolume merged = labels;
  const std::uint8_t unknown = static_cast<std::uint8_t>(schema.unknown_merge_label());
  for (auto& l : merged.labels) {
    if (schema.is_novel(l)) {
      l = unknown;
    }
  }
  return merged;
}

namespace {

// First strictly-greater value wins, so exact ties resolve to the lowest
// index deterministically.
int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace

SegMap2D confidence_from_teacher(const FeatureMap& teacher, const EmbeddingBank& bank,
                                 double temperature) {
  if (teacher.channels() != bank.dim()) {
    throw std::invalid_argument("teacher feature dim does not match embedding bank");
  }
  const EmbeddingBank::Restriction restricted = bank.base_and_background();
  const std::int64_t pixels = teacher.pixel_count();
  std::vector<std::uint8_t> classes(static_cast<std::size_t>(pixels));
  Eigen::VectorXd confidence(pixels);
  for (std::int64_t p = 0; p < pixels; ++p) {
    const auto feature = teacher.values.row(p);
    const double norm = feature.norm();
    if (norm <= kNormFloor) {
      throw std::invalid_argument("degenerate feature");
    }
    Eigen::VectorXd sims = restricted.rows * feature.transpose() / norm;
    const Eigen::VectorXd probs = softmax(sims, temperature);
    const int best = argmax_lowest(probs);
    classes[static_cast<std::size_t>(p)] =
        static_cast<std::uint8_t>(restricted.labels[static_cast<std::size_t>(best)]);
    confidence[p] = probs[best];
  }
  return SegMap2D(teacher.width, teacher.height, std::move(classes), std::move(confidence));
}

VoxelClassification classify_voxels(const Eigen::Ref<const Eigen::MatrixXd>& voxel_features,
                                    const AlignmentHead& head3d, const EmbeddingBank& bank,
                                    const std::vector<std::string>& query_names,
                                    const std::vector<std::uint8_t>& mask, const VoxelGrid& grid,
                                    int workers) {
  if (query_names.empty()) {
    throw std::invalid_argument("query list must be non-empty");
  }
  if (voxel_features.rows() != grid.voxel_count()) {
    throw std::invalid_argument("feature volume row count does not match grid");
  }
  if (static_cast<std::int64_t>(mask.size()) != grid.voxel_count()) {
    throw std::invalid_argument("mask size does not match grid");
  }

  Eigen::MatrixXd queries(static_cast<Eigen::Index>(query_names.size()), bank.dim());
  std::vector<std::uint8_t> query_labels(query_names.size());
  for (std::size_t q = 0; q < query_names.size(); ++q) {
    const int idx = bank.find(query_names[q]);
    if (idx < 0) {
      throw std::invalid_argument("unknown query name: " + query_names[q]);
    }
    queries.row(static_cast<Eigen::Index>(q)) = bank.embeddings().row(idx);
    query_labels[q] = static_cast<std::uint8_t>(idx + 1);
  }

  std::vector<std::int64_t> masked;
  masked.reserve(mask.size());
  for (std::int64_t v = 0; v < grid.voxel_count(); ++v) {
    if (mask[static_cast<std::size_t>(v)]) {
      masked.push_back(v);
    }
  }

  VoxelClassification out{LabelVolume::empty(grid),
                          Eigen::VectorXd::Zero(grid.voxel_count())};
  const std::int64_t chunk = 4096;
  for_each_chunk(static_cast<std::int64_t>(masked.size()), chunk, workers,
                 [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                   Eigen::MatrixXd rows(end - begin, voxel_features.cols());
                   for (std::int64_t i = begin; i < end; ++i) {
                     rows.row(i - begin) =
                         voxel_features.row(masked[static_cast<std::size_t>(i)]);
                   }
                   const Eigen::MatrixXd aligned = head3d.forward(rows);
                   for (std::int64_t i = begin; i < end; ++i) {
                     const auto a = aligned.row(i - begin);
                     const double norm = a.norm();
                     if (norm <= kNormFloor) {
                       throw std::invalid_argument("degenerate feature");
                     }
                     const Eigen::VectorXd scores = queries * a.transpose() / norm;
                     const int best = argmax_lowest(scores);
                     const std::int64_t voxel = masked[static_cast<std::size_t>(i)];
                     out.labels.at(voxel) = query_labels[static_cast<std::size_t>(best)];
                     out.max_scores[voxel] = scores[best];
                   }
                 });
  return out;
}

}  // namespace ovo
