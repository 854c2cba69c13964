#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ovo/geometry.hpp"
#include "ovo/vocab.hpp"
#include "ovo/volume.hpp"

namespace ovo {

/// One candidate voxel-pixel pair with filter provenance. Entries exist
/// only for semantic voxels whose center projects into the image; the
/// remaining flags record the occlusion and consistency verdicts.
struct CorrespondenceEntry {
  std::int64_t voxel = 0;  // linear voxel index
  int pixel_x = 0;
  int pixel_y = 0;
  double depth = 0.0;
  double confidence = 1.0;
  bool in_image = false;
  bool visible = true;
  bool consistent = true;
};

struct FilterConfig {
  bool range = true;
  bool occlusion = true;
  bool consistency = true;
  int occlusion_threshold = 1;  // blockers needed to call a voxel occluded

  void validate() const;
};

struct CorrespondenceSet {
  VoxelGrid grid;
  CameraModel camera;
  FilterConfig filters;
  std::vector<CorrespondenceEntry> entries;  // sorted by linear voxel index

  /// Linear indices of voxels passing every filter flag.
  std::vector<std::int64_t> omega() const;
  std::int64_t omega_count() const;
};

struct StageCounts {
  std::int64_t after_range = 0;
  std::int64_t after_occlusion = 0;
  std::int64_t after_consistency = 0;
};

/// Keeps voxels with a semantic label whose center projects in front of the
/// camera and inside the image; entries carry the floor pixel and depth.
CorrespondenceSet image_range_filter(const VoxelGrid& grid, const LabelVolume& labels,
                                     const CameraModel& camera, int workers = 1);

/// A voxel stays visible iff fewer than `threshold` occupied voxels lie
/// strictly between the camera center and the voxel center along the DDA
/// segment. The voxel containing the camera center never counts as a
/// blocker.
CorrespondenceSet occlusion_filter(CorrespondenceSet corr, const LabelVolume& occupancy,
                                   const CameraModel& camera, int threshold = 1,
                                   int workers = 1);

/// Marks an entry consistent iff the teacher's predicted class at the
/// mapped pixel equals the voxel's training label (novel classes compared
/// after merging to the unknown/background id). Throws "unknown teacher
/// class" on pixel ids outside the schema.
CorrespondenceSet label_consistency_filter(CorrespondenceSet corr, const LabelVolume& labels,
                                           const SegMap2D& seg, const CategorySchema& schema,
                                           int workers = 1);

struct OmegaResult {
  CorrespondenceSet correspondences;
  StageCounts counts;
};

/// Applies the enabled filters in range -> occlusion -> consistency order
/// and reports the kept-voxel count after each stage (disabled stages pass
/// the previous count through). Entry confidences are taken from the
/// teacher segmentation whenever it is provided. The range filter is the
/// base stage and must be enabled.
OmegaResult build_omega(const VoxelGrid& grid, const LabelVolume& labels, const SegMap2D* seg,
                        const CameraModel& camera, const CategorySchema* schema,
                        const FilterConfig& filters, int workers = 1);

void save_correspondences(const CorrespondenceSet& corr, const StageCounts& counts,
                          const std::filesystem::path& manifest_path);
struct LoadedCorrespondences {
  CorrespondenceSet correspondences;
  StageCounts counts;
};
LoadedCorrespondences load_correspondences(const std::filesystem::path& manifest_path);

void save_counts_json(const StageCounts& counts, const std::filesystem::path& path);

}  // namespace ovo
