#include "ovo/io.hpp"

#include <fstream>
#include <stdexcept>

#include "ovo/tensor.hpp"

namespace ovo {

nlohmann::json camera_to_json(const CameraModel& camera) {
  std::vector<double> ext(16);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      ext[static_cast<std::size_t>(r) * 4 + c] = camera.extrinsics(r, c);
    }
  }
  return {{"fx", camera.fx},          {"fy", camera.fy},
          {"cx", camera.cx},          {"cy", camera.cy},
          {"extrinsics", ext},        {"width", camera.image_width},
          {"height", camera.image_height}};
}

CameraModel camera_from_json(const nlohmann::json& j) {
  const auto ext = j.at("extrinsics").get<std::vector<double>>();
  if (ext.size() != 16) {
    throw std::runtime_error("camera extrinsics must hold 16 row-major numbers");
  }
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = ext[static_cast<std::size_t>(r) * 4 + c];
    }
  }
  return CameraModel(j.at("fx").get<double>(), j.at("fy").get<double>(),
                     j.at("cx").get<double>(), j.at("cy").get<double>(), m,
                     j.at("width").get<int>(), j.at("height").get<int>());
}

nlohmann::json grid_to_json(const VoxelGrid& grid) {
  return {{"dims", {grid.dims.x(), grid.dims.y(), grid.dims.z()}},
          {"origin", {grid.origin.x(), grid.origin.y(), grid.origin.z()}},
          {"voxel_size", grid.voxel_size}};
}

VoxelGrid grid_from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<int>>();
  const auto origin = j.at("origin").get<std::vector<double>>();
  if (dims.size() != 3 || origin.size() != 3) {
    throw std::runtime_error("grid dims and origin must each hold 3 numbers");
  }
  return VoxelGrid(Eigen::Vector3i(dims[0], dims[1], dims[2]),
                   Eigen::Vector3d(origin[0], origin[1], origin[2]),
                   j.at("voxel_size").get<double>());
}

nlohmann::json schema_to_json(const CategorySchema& schema) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : schema.categories()) {
    cats.push_back({{"name", c.name}, {"base", c.base}, {"background", c.background}});
  }
  return {{"categories", cats}, {"unknown_merge_label", schema.unknown_merge_label()}};
}

CategorySchema schema_from_json(const nlohmann::json& j) {
  std::vector<Category> categories;
  for (const auto& c : j.at("categories")) {
    categories.push_back({c.at("name").get<std::string>(), c.at("base").get<bool>(),
                          c.at("background").get<bool>()});
  }
  std::optional<int> merge;
  if (j.contains("unknown_merge_label")) {
    merge = j.at("unknown_merge_label").get<int>();
  }
  return CategorySchema(std::move(categories), merge);
}

namespace {

DenseLayer load_layer(const std::filesystem::path& dir, const nlohmann::json& meta, int index) {
  const std::string tag = std::to_string(index);
  DenseTensor w = load_tensor(dir / ("w" + tag + ".json"));
  DenseTensor b = load_tensor(dir / ("b" + tag + ".json"));
  if (w.rank() != 2 || b.rank() != 1 || w.dim(0) != b.dim(0)) {
    throw std::runtime_error("layer tensor shapes are inconsistent in " + dir.string());
  }
  DenseLayer layer;
  layer.weight = w.matrix();
  layer.bias = Eigen::VectorXd(b.values());
  layer.activation = activation_from_name(meta.at("activation").get<std::string>());
  if (layer.input_dim() != meta.at("in").get<int>() ||
      layer.output_dim() != meta.at("out").get<int>()) {
    throw std::runtime_error("layer dims disagree with manifest in " + dir.string());
  }
  return layer;
}

void save_layer(const DenseLayer& layer, const std::filesystem::path& dir, int index,
                nlohmann::json& meta_out) {
  const std::string tag = std::to_string(index);
  Eigen::VectorXd wflat(layer.weight.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      wflat[at++] = layer.weight(r, c);
    }
  }
  save_tensor(DenseTensor::from_values({layer.weight.rows(), layer.weight.cols()}, Dtype::f64,
                                       std::move(wflat)),
              dir / ("w" + tag + ".json"));
  save_tensor(DenseTensor::from_values({layer.bias.size()}, Dtype::f64, layer.bias),
              dir / ("b" + tag + ".json"));
  meta_out.push_back({{"in", layer.input_dim()},
                      {"out", layer.output_dim()},
                      {"activation", activation_name(layer.activation)}});
}

}  // namespace

void save_head(const AlignmentHead& head, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["kind"] = "alignment_head";
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < head.layers().size(); ++i) {
    save_layer(head.layers()[i], dir, static_cast<int>(i), layers);
  }
  manifest["layers"] = layers;
  write_json_file(manifest, dir / "manifest.json");
}

AlignmentHead load_head(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json_file(dir / "manifest.json");
  if (manifest.at("kind").get<std::string>() != "alignment_head") {
    throw std::runtime_error("not an alignment head directory: " + dir.string());
  }
  std::vector<DenseLayer> layers;
  const auto& metas = manifest.at("layers");
  for (std::size_t i = 0; i < metas.size(); ++i) {
    layers.push_back(load_layer(dir, metas[i], static_cast<int>(i)));
  }
  return AlignmentHead(std::move(layers));
}

void save_fusion(const MultiScaleFusion2D& fusion, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["kind"] = "multiscale_fusion2d";
  nlohmann::json projections = nlohmann::json::array();
  for (std::size_t i = 0; i < fusion.scale_projections().size(); ++i) {
    save_layer(fusion.scale_projections()[i], dir, static_cast<int>(i), projections);
  }
  manifest["projections"] = projections;
  save_head(fusion.mixer(), dir / "mixer");
  write_json_file(manifest, dir / "manifest.json");
}

MultiScaleFusion2D load_fusion(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json_file(dir / "manifest.json");
  if (manifest.at("kind").get<std::string>() != "multiscale_fusion2d") {
    throw std::runtime_error("not a fusion module directory: " + dir.string());
  }
  std::vector<DenseLayer> projections;
  const auto& metas = manifest.at("projections");
  for (std::size_t i = 0; i < metas.size(); ++i) {
    projections.push_back(load_layer(dir, metas[i], static_cast<int>(i)));
  }
  return MultiScaleFusion2D(std::move(projections), load_head(dir / "mixer"));
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f << j.dump(2) << "\n";
}

}  // namespace ovo
