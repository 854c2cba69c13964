#include "ovo/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "ovo/io.hpp"
#include "ovo/tensor.hpp"

namespace ovo {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 0x2545f4914f6cdd1dULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Eigen::VectorXd sphere_noise(int dim, double magnitude, std::mt19937_64& rng) {
  if (magnitude == 0.0) {
    return Eigen::VectorXd::Zero(dim);
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (;;) {
    for (int i = 0; i < dim; ++i) {
      v[i] = gauss(rng);
    }
    const double n = v.norm();
    if (n > 1e-9) {
      return v * (magnitude / n);
    }
  }
}

/// Random orthonormal rows (Gram-Schmidt over seeded Gaussians).
Eigen::MatrixXd orthonormal_rows(int rows, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, dim);
  for (int r = 0; r < rows; ++r) {
    for (;;) {
      for (int c = 0; c < dim; ++c) {
        m(r, c) = gauss(rng);
      }
      for (int p = 0; p < r; ++p) {
        m.row(r) -= m.row(r).dot(m.row(p)) * m.row(p);
      }
      const double n = m.row(r).norm();
      if (n > 1e-6) {
        m.row(r) /= n;
        break;
      }
    }
  }
  return m;
}

bool intersect_aabb(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                    const VoxelGrid& grid, double& t_enter, double& t_exit) {
  t_enter = 0.0;
  t_exit = std::numeric_limits<double>::infinity();
  const Eigen::Vector3d lo = grid.min_corner();
  const Eigen::Vector3d hi = grid.max_corner();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-15) {
      if (origin[k] < lo[k] || origin[k] > hi[k]) {
        return false;
      }
      continue;
    }
    double t0 = (lo[k] - origin[k]) / dir[k];
    double t1 = (hi[k] - origin[k]) / dir[k];
    if (t0 > t1) {
      std::swap(t0, t1);
    }
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) {
      return false;
    }
  }
  return t_exit > 0.0;
}

void quantize_matrix_f32(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

DenseTensor matrix_to_tensor(const Eigen::MatrixXd& m, std::vector<std::int64_t> shape) {
  Eigen::VectorXd flat(m.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      flat[at++] = m(r, c);
    }
  }
  return DenseTensor::from_values(std::move(shape), Dtype::f32, std::move(flat));
}

}  // namespace

void SynthConfig::validate() const {
  if ((grid_dims.array() <= 0).any() || image_width <= 0 || image_height <= 0) {
    throw std::invalid_argument("synth config: dims must be positive");
  }
  if (base_count < 1 || novel_count < 0) {
    throw std::invalid_argument("synth config: need at least one base class");
  }
  if (sigma < 0.0 || invalid_fraction < 0.0 || invalid_fraction > 1.0 ||
      corrupt_fraction < 0.0 || corrupt_fraction > 1.0) {
    throw std::invalid_argument("synth config: noise fractions out of range");
  }
  if (!(corrupt_confidence > 0.0) || corrupt_confidence > 1.0) {
    throw std::invalid_argument("synth config: corrupt confidence must lie in (0, 1]");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("synth config: temperature must be positive");
  }
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("synth config: voxel size must be positive");
  }
  if (up_axis != 1 && up_axis != 2) {
    throw std::invalid_argument("synth config: up axis must be y (1) or z (2)");
  }
  const int semantic = base_count + novel_count;
  if (teacher_dim < semantic + 1) {
    throw std::invalid_argument(
        "synth config: teacher dim must cover all categories for orthonormal embeddings");
  }
  if (feature_mode == FeatureMode::class_random && feat3d_dim < semantic) {
    throw std::invalid_argument("synth config: feat3d dim must be >= semantic class count");
  }
  if (feature_mode == FeatureMode::text && feat3d_dim != teacher_dim) {
    throw std::invalid_argument("synth config: text feature mode requires C == C1");
  }
  if (min_object_size < 1 || max_object_size < min_object_size) {
    throw std::invalid_argument("synth config: object size range is empty");
  }
  const int up_extent = grid_dims[up_axis];
  const int lateral_min = std::min(grid_dims[(up_axis + 1) % 3], grid_dims[(up_axis + 2) % 3]);
  if (max_object_size > up_extent - 1 || max_object_size > lateral_min) {
    throw std::invalid_argument(
        "synth config: objects of size " + std::to_string(max_object_size) +
        " cannot fit a grid of " + std::to_string(grid_dims.x()) + "x" +
        std::to_string(grid_dims.y()) + "x" + std::to_string(grid_dims.z()) +
        " with one floor layer");
  }
}

std::vector<std::uint8_t> occupied_mask(const LabelVolume& labels) {
  std::vector<std::uint8_t> mask(labels.labels.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = labels.occupied(static_cast<std::int64_t>(i)) ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> render_first_hit_classes(const LabelVolume& labels,
                                                   const CameraModel& camera) {
  const VoxelGrid& grid = labels.grid;
  const Eigen::Vector3d center = camera.center();
  const Eigen::Matrix3d rot_t = camera.rotation().transpose();
  const Eigen::Vector3d cam_grid = (center - grid.origin) / grid.voxel_size;
  Eigen::Vector3i cam_voxel(static_cast<int>(std::floor(cam_grid.x())),
                            static_cast<int>(std::floor(cam_grid.y())),
                            static_cast<int>(std::floor(cam_grid.z())));
  const bool cam_in_grid = grid.contains(cam_voxel);

  std::vector<std::uint8_t> classes(
      static_cast<std::size_t>(camera.image_width) * camera.image_height, 0);
  Eigen::Vector3i cell;
  for (int y = 0; y < camera.image_height; ++y) {
    for (int x = 0; x < camera.image_width; ++x) {
      const Eigen::Vector3d dir_cam((x + 0.5 - camera.cx) / camera.fx,
                                    (y + 0.5 - camera.cy) / camera.fy, 1.0);
      const Eigen::Vector3d dir = (rot_t * dir_cam).normalized();
      double t_enter = 0.0;
      double t_exit = 0.0;
      if (!intersect_aabb(center, dir, grid, t_enter, t_exit)) {
        continue;
      }
      const Eigen::Vector3d target = center + dir * (t_exit + 0.5 * grid.voxel_size);
      VoxelTraversal walk(center, target, grid);
      while (walk.next(cell)) {
        if (cam_in_grid && cell == cam_voxel) {
          continue;
        }
        const std::int64_t linear = grid.linear_index(cell);
        if (labels.occupied(linear)) {
          classes[static_cast<std::size_t>(y) * camera.image_width + x] = labels.at(linear);
          break;
        }
      }
    }
  }
  return classes;
}

SynthDataset::SynthDataset(const SynthConfig& config) : config_(config) {
  config_.validate();
  std::vector<Category> categories;
  for (int b = 0; b < config_.base_count; ++b) {
    categories.push_back({"base_" + std::to_string(b), true, false});
  }
  for (int n = 0; n < config_.novel_count; ++n) {
    categories.push_back({"novel_" + std::to_string(n), false, false});
  }
  categories.push_back({"background", false, true});
  bank_ = EmbeddingBank::synthetic_orthonormal(std::move(categories), config_.teacher_dim,
                                               mix_seed(config_.seed, 1));
  const int semantic = config_.base_count + config_.novel_count;
  if (config_.feature_mode == SynthConfig::FeatureMode::text) {
    class_features_ = bank_.embeddings().topRows(semantic);
  } else {
    class_features_ =
        orthonormal_rows(semantic, config_.feat3d_dim, mix_seed(config_.seed, 2));
  }
  std::mt19937_64 rng(mix_seed(config_.seed, 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  student_projection_.resize(config_.student2d_dim, config_.teacher_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.teacher_dim));
  for (Eigen::Index r = 0; r < student_projection_.rows(); ++r) {
    for (Eigen::Index c = 0; c < student_projection_.cols(); ++c) {
      student_projection_(r, c) = gauss(rng) * scale;
    }
  }
}

Scene SynthDataset::make_scene(int scene_index) const {
  const SynthConfig& cfg = config_;
  std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(scene_index)));

  Scene scene;
  scene.name = "scene_" + std::to_string(scene_index);
  scene.grid = VoxelGrid(cfg.grid_dims, cfg.origin, cfg.voxel_size);
  scene.schema = bank_.schema();
  scene.labels = LabelVolume::empty(scene.grid);

  const int up = cfg.up_axis;
  const int depth_axis = (up == 1) ? 2 : 1;  // looking along z (y-up) or y (z-up)
  const int semantic = cfg.base_count + cfg.novel_count;

  // Floor plane of the first base class at up-coordinate 0.
  for (std::int64_t v = 0; v < scene.grid.voxel_count(); ++v) {
    if (scene.grid.index_of(v)[up] == 0) {
      scene.labels.at(v) = 1;
    }
  }

  // Boxes of random classes resting on the floor; later boxes overwrite.
  std::uniform_int_distribution<int> class_dist(1, semantic);
  std::uniform_int_distribution<int> size_dist(cfg.min_object_size, cfg.max_object_size);
  for (int obj = 0; obj < cfg.object_count; ++obj) {
    const int cls = class_dist(rng);
    Eigen::Vector3i size;
    for (int a = 0; a < 3; ++a) {
      size[a] = size_dist(rng);
    }
    Eigen::Vector3i pos;
    for (int a = 0; a < 3; ++a) {
      if (a == up) {
        pos[a] = 1;
      } else {
        std::uniform_int_distribution<int> pos_dist(0, cfg.grid_dims[a] - size[a]);
        pos[a] = pos_dist(rng);
      }
    }
    for (int dx = 0; dx < size.x(); ++dx) {
      for (int dy = 0; dy < size.y(); ++dy) {
        for (int dz = 0; dz < size.z(); ++dz) {
          const Eigen::Vector3i idx = pos + Eigen::Vector3i(dx, dy, dz);
          if (scene.grid.contains(idx)) {
            scene.labels.at(scene.grid.linear_index(idx)) = static_cast<std::uint8_t>(cls);
          }
        }
      }
    }
  }

  if (cfg.invalid_fraction > 0.0) {
    std::bernoulli_distribution invalid(cfg.invalid_fraction);
    for (auto& l : scene.labels.labels) {
      if (invalid(rng)) {
        l = LabelVolume::kInvalid;
      }
    }
  }

  // Camera ahead of the grid along the depth axis, looking down at the
  // floor center steeply enough that floor voxels do not all graze their
  // own layer.
  const Eigen::Vector3d extent = cfg.voxel_size * cfg.grid_dims.cast<double>();
  Eigen::Vector3d cam_pos = cfg.origin + 0.5 * extent;
  cam_pos[up] = cfg.origin[up] + 1.6 * extent[up];
  cam_pos[depth_axis] = cfg.origin[depth_axis] - 0.45 * extent[depth_axis];
  Eigen::Vector3d target = cfg.origin + 0.5 * extent;
  target[up] = cfg.origin[up] + 0.1 * extent[up];

  Eigen::Vector3d up_world = Eigen::Vector3d::Zero();
  up_world[up] = 1.0;
  const Eigen::Vector3d forward = (target - cam_pos).normalized();
  const Eigen::Vector3d x_cam = (-up_world).cross(forward).normalized();
  const Eigen::Vector3d y_cam = forward.cross(x_cam);
  Eigen::Matrix4d extrinsics = Eigen::Matrix4d::Identity();
  extrinsics.block<1, 3>(0, 0) = x_cam.transpose();
  extrinsics.block<1, 3>(1, 0) = y_cam.transpose();
  extrinsics.block<1, 3>(2, 0) = forward.transpose();
  extrinsics.topRightCorner<3, 1>() = -extrinsics.topLeftCorner<3, 3>() * cam_pos;
  const double focal = 0.75 * cfg.image_width;
  scene.camera = CameraModel(focal, focal, 0.5 * cfg.image_width, 0.5 * cfg.image_height,
                             extrinsics, cfg.image_width, cfg.image_height);

  // Oracle teacher: features near the text embedding of the class seen at
  // each pixel (background where the ray escapes).
  const std::vector<std::uint8_t> gt2d = render_first_hit_classes(scene.labels, scene.camera);
  const int background = scene.schema.background_label();
  const std::int64_t pixels =
      static_cast<std::int64_t>(cfg.image_width) * cfg.image_height;
  Eigen::MatrixXd teacher(pixels, cfg.teacher_dim);
  std::vector<std::uint8_t> corrupted(static_cast<std::size_t>(pixels), 0);
  std::bernoulli_distribution corrupt(cfg.corrupt_fraction);
  std::uniform_int_distribution<int> wrong_dist(1, semantic);
  for (std::int64_t p = 0; p < pixels; ++p) {
    int cls = gt2d[static_cast<std::size_t>(p)];
    if (cls == 0 || cls == LabelVolume::kInvalid) {
      cls = background;
    }
    if (cfg.corrupt_fraction > 0.0 && corrupt(rng)) {
      int wrong = wrong_dist(rng);
      if (wrong == cls) {
        wrong = (wrong % semantic) + 1;
      }
      cls = wrong;
      corrupted[static_cast<std::size_t>(p)] = 1;
    }
    Eigen::VectorXd f = bank_.embeddings().row(cls - 1).transpose() +
                        sphere_noise(cfg.teacher_dim, cfg.sigma, rng);
    teacher.row(p) = f.normalized().transpose();
  }
  quantize_matrix_f32(teacher);
  scene.teacher2d = FeatureMap(cfg.image_width, cfg.image_height, std::move(teacher));

  SegMap2D seg = confidence_from_teacher(*scene.teacher2d, bank_, cfg.temperature);
  for (std::int64_t p = 0; p < pixels; ++p) {
    if (corrupted[static_cast<std::size_t>(p)]) {
      seg.confidence[p] = cfg.corrupt_confidence;
    }
    seg.confidence[p] = static_cast<double>(static_cast<float>(seg.confidence[p]));
  }
  scene.seg = std::move(seg);

  if (!cfg.generate_features) {
    return scene;
  }

  // Student 3D features: class-conditioned vectors plus noise; empty and
  // invalid voxels carry pure noise.
  Eigen::MatrixXd feat3d(scene.grid.voxel_count(), cfg.feat3d_dim);
  for (std::int64_t v = 0; v < scene.grid.voxel_count(); ++v) {
    const std::uint8_t l = scene.labels.at(v);
    if (scene.labels.occupied(v)) {
      feat3d.row(v) = (class_features_.row(l - 1).transpose() +
                       sphere_noise(cfg.feat3d_dim, cfg.sigma, rng))
                          .transpose();
    } else {
      feat3d.row(v) = sphere_noise(cfg.feat3d_dim, cfg.sigma, rng).transpose();
    }
  }
  quantize_matrix_f32(feat3d);
  scene.feat3d = std::move(feat3d);

  // Student 2D features: projected noisy teacher.
  Eigen::MatrixXd student =
      scene.teacher2d->values * student_projection_.transpose();
  for (std::int64_t p = 0; p < pixels; ++p) {
    student.row(p) += sphere_noise(cfg.student2d_dim, cfg.sigma, rng).transpose();
  }
  quantize_matrix_f32(student);
  scene.student2d = FeatureMap(cfg.image_width, cfg.image_height, std::move(student));

  return scene;
}

namespace {

void save_label_tensor(const LabelVolume& labels, const std::filesystem::path& path) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(labels.labels.size()));
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    values[static_cast<Eigen::Index>(i)] = static_cast<double>(labels.labels[i]);
  }
  save_tensor(DenseTensor::from_values({static_cast<std::int64_t>(labels.labels.size())},
                                       Dtype::f32, std::move(values)),
              path);
}

std::vector<std::uint8_t> tensor_to_u8(const DenseTensor& t, const std::string& name) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const double v = t.values()[i];
    if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
      throw std::runtime_error("tensor '" + name + "': values are not 8-bit class ids");
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return out;
}

void expect_shape(const DenseTensor& t, const std::vector<std::int64_t>& shape,
                  const std::string& name) {
  if (t.shape() != shape) {
    std::string want = "[";
    std::string got = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      want += (i ? "," : "") + std::to_string(shape[i]);
    }
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
      got += (i ? "," : "") + std::to_string(t.shape()[i]);
    }
    throw std::runtime_error("tensor '" + name + "': expected shape " + want + "], got " + got +
                             "]");
  }
}

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["name"] = scene.name;
  manifest["dataset"] = scene.dataset;
  manifest["provenance"] = scene.provenance;
  manifest["grid"] = grid_to_json(scene.grid);
  manifest["camera"] = camera_to_json(scene.camera);
  manifest["schema"] = schema_to_json(scene.schema);
  nlohmann::json tensors;

  save_label_tensor(scene.labels, dir / "labels.json");
  tensors["labels"] = "labels.json";

  if (scene.feat3d) {
    save_tensor(matrix_to_tensor(*scene.feat3d,
                                 {scene.feat3d->rows(), scene.feat3d->cols()}),
                dir / "feat3d.json");
    tensors["feat3d"] = "feat3d.json";
  }
  if (scene.teacher2d) {
    save_tensor(matrix_to_tensor(scene.teacher2d->values,
                                 {scene.teacher2d->height, scene.teacher2d->width,
                                  scene.teacher2d->channels()}),
                dir / "teacher2d.json");
    tensors["teacher2d"] = "teacher2d.json";
  }
  if (scene.seg) {
    Eigen::VectorXd ids(scene.seg->confidence.size());
    for (Eigen::Index i = 0; i < ids.size(); ++i) {
      ids[i] = static_cast<double>(scene.seg->class_ids[static_cast<std::size_t>(i)]);
    }
    save_tensor(DenseTensor::from_values({scene.seg->height, scene.seg->width}, Dtype::f32,
                                         std::move(ids)),
                dir / "teacherseg.json");
    save_tensor(DenseTensor::from_values({scene.seg->height, scene.seg->width}, Dtype::f32,
                                         scene.seg->confidence),
                dir / "conf.json");
    tensors["teacherseg"] = "teacherseg.json";
    tensors["conf"] = "conf.json";
  }
  if (scene.student2d) {
    save_tensor(matrix_to_tensor(scene.student2d->values,
                                 {scene.student2d->height, scene.student2d->width,
                                  scene.student2d->channels()}),
                dir / "student2d.json");
    tensors["student2d"] = "student2d.json";
  }
  manifest["tensors"] = tensors;
  write_json_file(manifest, dir / "manifest.json");
}

Scene load_scene(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json_file(dir / "manifest.json");
  Scene scene;
  scene.name = manifest.at("name").get<std::string>();
  scene.dataset = manifest.value("dataset", std::string("custom"));
  scene.provenance = manifest.value("provenance", std::string("ingested"));
  scene.grid = grid_from_json(manifest.at("grid"));
  scene.camera = camera_from_json(manifest.at("camera"));
  scene.schema = schema_from_json(manifest.at("schema"));
  const auto& tensors = manifest.at("tensors");

  const std::int64_t n = scene.grid.voxel_count();
  const std::int64_t w = scene.camera.image_width;
  const std::int64_t h = scene.camera.image_height;

  {
    const DenseTensor t = load_tensor(dir / tensors.at("labels").get<std::string>());
    expect_shape(t, {n}, "labels");
    std::vector<std::uint8_t> raw = tensor_to_u8(t, "labels");
    for (std::uint8_t l : raw) {
      if (l != LabelVolume::kInvalid && l > scene.schema.category_count()) {
        throw std::runtime_error("tensor 'labels': label id " + std::to_string(l) +
                                 " outside schema");
      }
    }
    scene.labels = LabelVolume(scene.grid, std::move(raw));
  }

  if (tensors.contains("feat3d")) {
    const DenseTensor t = load_tensor(dir / tensors.at("feat3d").get<std::string>());
    if (t.rank() != 2 || t.dim(0) != n) {
      throw std::runtime_error("tensor 'feat3d': expected shape [" + std::to_string(n) +
                               ",C], got rank " + std::to_string(t.rank()));
    }
    scene.feat3d = Eigen::MatrixXd(t.matrix());
  }
  if (tensors.contains("teacher2d")) {
    const DenseTensor t = load_tensor(dir / tensors.at("teacher2d").get<std::string>());
    if (t.rank() != 3 || t.dim(0) != h || t.dim(1) != w) {
      throw std::runtime_error("tensor 'teacher2d': expected shape [" + std::to_string(h) + "," +
                               std::to_string(w) + ",C]");
    }
    scene.teacher2d = FeatureMap(static_cast<int>(w), static_cast<int>(h),
                                 Eigen::MatrixXd(t.matrix()));
  }
  if (tensors.contains("teacherseg") != tensors.contains("conf")) {
    throw std::runtime_error("teacherseg and conf tensors must come together");
  }
  if (tensors.contains("teacherseg")) {
    const DenseTensor ids = load_tensor(dir / tensors.at("teacherseg").get<std::string>());
    const DenseTensor conf = load_tensor(dir / tensors.at("conf").get<std::string>());
    expect_shape(ids, {h, w}, "teacherseg");
    expect_shape(conf, {h, w}, "conf");
    scene.seg = SegMap2D(static_cast<int>(w), static_cast<int>(h),
                         tensor_to_u8(ids, "teacherseg"), Eigen::VectorXd(conf.values()));
  }
  if (tensors.contains("student2d")) {
    const DenseTensor t = load_tensor(dir / tensors.at("student2d").get<std::string>());
    if (t.rank() != 3 || t.dim(0) != h || t.dim(1) != w) {
      throw std::runtime_error("tensor 'student2d': expected shape [" + std::to_string(h) + "," +
                               std::to_string(w) + ",C]");
    }
    scene.student2d = FeatureMap(static_cast<int>(w), static_cast<int>(h),
                                 Eigen::MatrixXd(t.matrix()));
  }
  return scene;
}

Scene ingest_real(const std::filesystem::path& dir) {
  Scene scene = load_scene(dir);
  const auto check_novel = [&](const std::set<std::string>& expected) {
    std::set<std::string> novel;
    for (int l : scene.schema.novel_labels()) {
      novel.insert(scene.schema.category_for_label(l).name);
    }
    if (novel != expected) {
      std::string want;
      for (const auto& s : expected) {
        want += (want.empty() ? "" : ", ") + s;
      }
      throw std::runtime_error("schema/class-count mismatch: dataset '" + scene.dataset +
                               "' expects novel classes {" + want + "}");
    }
  };
  const int semantic =
      static_cast<int>(scene.schema.base_labels().size() + scene.schema.novel_labels().size());
  if (scene.dataset == "nyuv2") {
    if (scene.grid.dims != Eigen::Vector3i(60, 36, 60)) {
      throw std::runtime_error("grid dims do not match dataset nyuv2 (expected 60x36x60)");
    }
    if (semantic != 11) {
      throw std::runtime_error("schema/class-count mismatch: nyuv2 expects 11 semantic classes");
    }
    check_novel({"bed", "table", "other"});
  } else if (scene.dataset == "semantickitti") {
    if (scene.grid.dims != Eigen::Vector3i(256, 256, 32)) {
      throw std::runtime_error(
          "grid dims do not match dataset semantickitti (expected 256x256x32)");
    }
    if (semantic != 19) {
      throw std::runtime_error(
          "schema/class-count mismatch: semantickitti expects 19 semantic classes");
    }
    check_novel({"car", "road", "building"});
  }
  return scene;
}

}  // namespace ovo
