#include "ovo/selection.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ovo/io.hpp"
#include "ovo/parallel.hpp"

namespace ovo {

namespace {

constexpr std::int64_t kVoxelChunk = 2048;
constexpr std::uint8_t kFlagInImage = 1u << 0;
constexpr std::uint8_t kFlagVisible = 1u << 1;
constexpr std::uint8_t kFlagConsistent = 1u << 2;

}  // namespace

void FilterConfig::validate() const {
  if ((occlusion || consistency) && !range) {
    throw std::invalid_argument(
        "invalid filter combination: range must be enabled when occlusion or consistency is");
  }
  if (!range) {
    throw std::invalid_argument("invalid filter combination: the range filter is the base stage");
  }
  if (occlusion_threshold < 1) {
    throw std::invalid_argument("occlusion threshold must be at least 1");
  }
}

std::vector<std::int64_t> CorrespondenceSet::omega() const {
  std::vector<std::int64_t> out;
  for (const auto& e : entries) {
    if (e.in_image && e.visible && e.consistent) {
      out.push_back(e.voxel);
    }
  }
  return out;
}

std::int64_t CorrespondenceSet::omega_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) {
    n += (e.in_image && e.visible && e.consistent) ? 1 : 0;
  }
  return n;
}

CorrespondenceSet image_range_filter(const VoxelGrid& grid, const LabelVolume& labels,
                                     const CameraModel& camera, int workers) {
  if (labels.grid.dims != grid.dims) {
    throw std::invalid_argument("label volume grid does not match");
  }
  const std::int64_t n = grid.voxel_count();
  const std::int64_t chunks = chunk_count(n, kVoxelChunk);
  std::vector<std::vector<CorrespondenceEntry>> partials(static_cast<std::size_t>(chunks));

  for_each_chunk(n, kVoxelChunk, workers,
                 [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                   auto& local = partials[static_cast<std::size_t>(c)];
                   for (std::int64_t v = begin; v < end; ++v) {
                     if (!labels.occupied(v)) {
                       continue;
                     }
                     const Eigen::Vector3i idx = grid.index_of(v);
                     const Projection p = project(voxel_center(idx, grid), camera);
                     if (!p.in_front) {
                       continue;
                     }
                     const int px = static_cast<int>(std::floor(p.u));
                     const int py = static_cast<int>(std::floor(p.v));
                     if (px < 0 || px >= camera.image_width || py < 0 ||
                         py >= camera.image_height) {
                       continue;
                     }
                     CorrespondenceEntry e;
                     e.voxel = v;
                     e.pixel_x = px;
                     e.pixel_y = py;
                     e.depth = p.depth;
                     e.in_image = true;
                     local.push_back(e);
                   }
                 });

  CorrespondenceSet out;
  out.grid = grid;
  out.camera = camera;
  std::size_t total = 0;
  for (const auto& p : partials) {
    total += p.size();
  }
  out.entries.reserve(total);
  for (auto& p : partials) {
    out.entries.insert(out.entries.end(), p.begin(), p.end());
  }
  return out;
}

CorrespondenceSet occlusion_filter(CorrespondenceSet corr, const LabelVolume& occupancy,
                                   const CameraModel& camera, int threshold, int workers) {
  if (threshold < 1) {
    throw std::invalid_argument("occlusion threshold must be at least 1");
  }
  const VoxelGrid& grid = corr.grid;
  if (occupancy.grid.dims != grid.dims) {
    throw std::invalid_argument("occupancy volume grid does not match");
  }
  const Eigen::Vector3d cam_center = camera.center();
  // If the camera sits inside an occupied voxel, that voxel blocks nothing.
  const Eigen::Vector3d cam_grid = (cam_center - grid.origin) / grid.voxel_size;
  Eigen::Vector3i cam_voxel(static_cast<int>(std::floor(cam_grid.x())),
                            static_cast<int>(std::floor(cam_grid.y())),
                            static_cast<int>(std::floor(cam_grid.z())));
  const bool cam_in_grid = grid.contains(cam_voxel);

  const std::int64_t n = static_cast<std::int64_t>(corr.entries.size());
  for_each_chunk(n, kVoxelChunk, workers,
                 [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                   Eigen::Vector3i cell;
                   for (std::int64_t i = begin; i < end; ++i) {
                     CorrespondenceEntry& e = corr.entries[static_cast<std::size_t>(i)];
                     if (!e.in_image) {
                       e.visible = false;
                       continue;
                     }
                     const Eigen::Vector3i target_idx = grid.index_of(e.voxel);
                     const Eigen::Vector3d target = voxel_center(target_idx, grid);
                     VoxelTraversal walk(cam_center, target, grid);
                     int blockers = 0;
                     bool occluded = false;
                     while (walk.next(cell)) {
                       if (cell == target_idx) {
                         break;
                       }
                       if (cam_in_grid && cell == cam_voxel) {
                         continue;
                       }
                       if (occupancy.occupied(grid.linear_index(cell))) {
                         if (++blockers >= threshold) {
                           occluded = true;
                           break;
                         }
                       }
                     }
                     e.visible = !occluded;
                   }
                 });
  corr.filters.occlusion_threshold = threshold;
  return corr;
}

CorrespondenceSet label_consistency_filter(CorrespondenceSet corr, const LabelVolume& labels,
                                           const SegMap2D& seg, const CategorySchema& schema,
                                           int workers) {
  if (labels.grid.dims != corr.grid.dims) {
    throw std::invalid_argument("label volume grid does not match");
  }
  if (seg.width != corr.camera.image_width || seg.height != corr.camera.image_height) {
    throw std::invalid_argument("segmentation map does not match camera image dims");
  }
  const std::uint8_t unknown = static_cast<std::uint8_t>(schema.unknown_merge_label());
  const std::int64_t n = static_cast<std::int64_t>(corr.entries.size());
  for_each_chunk(
      n, kVoxelChunk, workers, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
          CorrespondenceEntry& e = corr.entries[static_cast<std::size_t>(i)];
          if (!e.in_image) {
            e.consistent = false;
            continue;
          }
          const std::uint8_t teacher = seg.class_ids[static_cast<std::size_t>(
              seg.pixel_index(e.pixel_x, e.pixel_y))];
          if (!schema.is_semantic(teacher)) {
            throw std::invalid_argument("unknown teacher class: " + std::to_string(teacher));
          }
          std::uint8_t training = labels.at(e.voxel);
          if (schema.is_novel(training)) {
            training = unknown;
          }
          e.consistent = (teacher == training);
        }
      });
  return corr;
}

OmegaResult build_omega(const VoxelGrid& grid, const LabelVolume& labels, const SegMap2D* seg,
                        const CameraModel& camera, const CategorySchema* schema,
                        const FilterConfig& filters, int workers) {
  filters.validate();
  if (filters.consistency && (seg == nullptr || schema == nullptr)) {
    throw std::invalid_argument(
        "consistency filter requires a teacher segmentation and a schema");
  }

  OmegaResult result;
  result.correspondences = image_range_filter(grid, labels, camera, workers);
  result.correspondences.filters = filters;

  if (seg != nullptr) {
    for (auto& e : result.correspondences.entries) {
      e.confidence = seg->confidence[seg->pixel_index(e.pixel_x, e.pixel_y)];
    }
  }

  result.counts.after_range = static_cast<std::int64_t>(result.correspondences.entries.size());

  if (filters.occlusion) {
    result.correspondences = occlusion_filter(std::move(result.correspondences), labels, camera,
                                              filters.occlusion_threshold, workers);
    std::int64_t kept = 0;
    for (const auto& e : result.correspondences.entries) {
      kept += (e.in_image && e.visible) ? 1 : 0;
    }
    result.counts.after_occlusion = kept;
  } else {
    result.counts.after_occlusion = result.counts.after_range;
  }

  if (filters.consistency) {
    result.correspondences = label_consistency_filter(std::move(result.correspondences), labels,
                                                      *seg, *schema, workers);
    result.counts.after_consistency = result.correspondences.omega_count();
  } else {
    result.counts.after_consistency = result.counts.after_occlusion;
  }
  return result;
}

void save_correspondences(const CorrespondenceSet& corr, const StageCounts& counts,
                          const std::filesystem::path& manifest_path) {
  const std::filesystem::path bin_path =
      std::filesystem::path(manifest_path).replace_extension(".bin");

  nlohmann::json manifest;
  manifest["count"] = corr.entries.size();
  manifest["grid"] = grid_to_json(corr.grid);
  manifest["camera"] = camera_to_json(corr.camera);
  manifest["filters"] = {{"range", corr.filters.range},
                         {"occlusion", corr.filters.occlusion},
                         {"consistency", corr.filters.consistency},
                         {"occlusion_threshold", corr.filters.occlusion_threshold}};
  manifest["counts"] = {{"after_range", counts.after_range},
                        {"after_occlusion", counts.after_occlusion},
                        {"after_consistency", counts.after_consistency}};
  manifest["record"] = "voxel:u32,pixel_i:u16,pixel_j:u16,depth:f32,confidence:f32,flags:u8";
  manifest["data"] = bin_path.filename().string();
  write_json_file(manifest, manifest_path);

  std::ofstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open for writing: " + bin_path.string());
  }
  constexpr std::size_t kRecord = 17;
  std::vector<char> buf(corr.entries.size() * kRecord);
  char* out = buf.data();
  for (const auto& e : corr.entries) {
    const std::uint32_t voxel = static_cast<std::uint32_t>(e.voxel);
    const std::uint16_t px = static_cast<std::uint16_t>(e.pixel_x);
    const std::uint16_t py = static_cast<std::uint16_t>(e.pixel_y);
    const float depth = static_cast<float>(e.depth);
    const float conf = static_cast<float>(e.confidence);
    const std::uint8_t flags = static_cast<std::uint8_t>((e.in_image ? kFlagInImage : 0) |
                                                         (e.visible ? kFlagVisible : 0) |
                                                         (e.consistent ? kFlagConsistent : 0));
    std::memcpy(out, &voxel, 4);
    std::memcpy(out + 4, &px, 2);
    std::memcpy(out + 6, &py, 2);
    std::memcpy(out + 8, &depth, 4);
    std::memcpy(out + 12, &conf, 4);
    std::memcpy(out + 16, &flags, 1);
    out += kRecord;
  }
  bf.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!bf) {
    throw std::runtime_error("failed writing correspondences: " + bin_path.string());
  }
}

LoadedCorrespondences load_correspondences(const std::filesystem::path& manifest_path) {
  const nlohmann::json manifest = read_json_file(manifest_path);
  LoadedCorrespondences out;
  out.correspondences.grid = grid_from_json(manifest.at("grid"));
  out.correspondences.camera = camera_from_json(manifest.at("camera"));
  const auto& f = manifest.at("filters");
  out.correspondences.filters.range = f.at("range").get<bool>();
  out.correspondences.filters.occlusion = f.at("occlusion").get<bool>();
  out.correspondences.filters.consistency = f.at("consistency").get<bool>();
  out.correspondences.filters.occlusion_threshold = f.at("occlusion_threshold").get<int>();
  const auto& c = manifest.at("counts");
  out.counts.after_range = c.at("after_range").get<std::int64_t>();
  out.counts.after_occlusion = c.at("after_occlusion").get<std::int64_t>();
  out.counts.after_consistency = c.at("after_consistency").get<std::int64_t>();

  const std::filesystem::path bin_path =
      manifest_path.parent_path() / manifest.at("data").get<std::string>();
  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open correspondences payload: " + bin_path.string());
  }
  const std::size_t count = manifest.at("count").get<std::size_t>();
  constexpr std::size_t kRecord = 17;
  bf.seekg(0, std::ios::end);
  if (static_cast<std::size_t>(bf.tellg()) != count * kRecord) {
    throw std::runtime_error("payload size mismatch: " + bin_path.string());
  }
  bf.seekg(0, std::ios::beg);
  std::vector<char> buf(count * kRecord);
  bf.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!bf) {
    throw std::runtime_error("failed reading correspondences: " + bin_path.string());
  }
  out.correspondences.entries.resize(count);
  const char* in = buf.data();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t voxel;
    std::uint16_t px, py;
    float depth, conf;
    std::uint8_t flags;
    std::memcpy(&voxel, in, 4);
    std::memcpy(&px, in + 4, 2);
    std::memcpy(&py, in + 6, 2);
    std::memcpy(&depth, in + 8, 4);
    std::memcpy(&conf, in + 12, 4);
    std::memcpy(&flags, in + 16, 1);
    in += kRecord;
    CorrespondenceEntry& e = out.correspondences.entries[i];
    e.voxel = voxel;
    e.pixel_x = px;
    e.pixel_y = py;
    e.depth = depth;
    e.confidence = conf;
    e.in_image = (flags & kFlagInImage) != 0;
    e.visible = (flags & kFlagVisible) != 0;
    e.consistent = (flags & kFlagConsistent) != 0;
  }
  return out;
}

void save_counts_json(const StageCounts& counts, const std::filesystem::path& path) {
  nlohmann::json j = {{"after_range", counts.after_range},
                      {"after_occlusion", counts.after_occlusion},
                      {"after_consistency", counts.after_consistency}};
  write_json_file(j, path);
}

}  // namespace ovo
