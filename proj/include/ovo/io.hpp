#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ovo/geometry.hpp"
#include "ovo/heads.hpp"
#include "ovo/vocab.hpp"

namespace ovo {

nlohmann::json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const nlohmann::json& j);

nlohmann::json grid_to_json(const VoxelGrid& grid);
VoxelGrid grid_from_json(const nlohmann::json& j);

nlohmann::json schema_to_json(const CategorySchema& schema);
CategorySchema schema_from_json(const nlohmann::json& j);

/// Heads are stored as a directory: manifest.json describing layer dims and
/// activations plus one tensor file pair per parameter.
void save_head(const AlignmentHead& head, const std::filesystem::path& dir);
AlignmentHead load_head(const std::filesystem::path& dir);

void save_fusion(const MultiScaleFusion2D& fusion, const std::filesystem::path& dir);
MultiScaleFusion2D load_fusion(const std::filesystem::path& dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace ovo
