#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ovo/alignment.hpp"
#include "ovo/io.hpp"
#include "ovo/scenes.hpp"
#include "oracles.hpp"

using namespace ovo;

namespace {

SynthConfig desk_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.grid_dims = {16, 10, 16};
  cfg.image_width = 32;
  cfg.image_height = 24;
  cfg.base_count = 3;
  cfg.novel_count = 2;
  cfg.feat3d_dim = 10;
  cfg.teacher_dim = 12;
  cfg.student2d_dim = 8;
  cfg.object_count = 5;
  cfg.min_object_size = 2;
  cfg.max_object_size = 4;
  cfg.sigma = 0.05;
  cfg.seed = seed;
  return cfg;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

bool identical_trees(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::filesystem::path> rel_a, rel_b;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) {
      rel_a.push_back(std::filesystem::relative(e.path(), a));
    }
  }
  for (const auto& e : std::filesystem::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) {
      rel_b.push_back(std::filesystem::relative(e.path(), b));
    }
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    return false;
  }
  for (const auto& rel : rel_a) {
    if (slurp(a / rel) != slurp(b / rel)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("synthetic scenes are deterministic per seed") {
  const SynthDataset dataset(desk_config(7));
  const auto tmp = std::filesystem::temp_directory_path() / "ovo_synth_det";
  std::filesystem::remove_all(tmp);
  std::filesystem::create_directories(tmp / "a");
  std::filesystem::create_directories(tmp / "b");

  save_scene(dataset.make_scene(0), tmp / "a" / "scene_0");
  save_bank(dataset.bank(), tmp / "a" / "bank.json");

  const SynthDataset again(desk_config(7));
  save_scene(again.make_scene(0), tmp / "b" / "scene_0");
  save_bank(again.bank(), tmp / "b" / "bank.json");

  CHECK(identical_trees(tmp / "a", tmp / "b"));

  // A different seed changes the payload.
  const SynthDataset other(desk_config(8));
  std::filesystem::create_directories(tmp / "c");
  save_scene(other.make_scene(0), tmp / "c" / "scene_0");
  CHECK_FALSE(identical_trees(tmp / "a", tmp / "c"));
  std::filesystem::remove_all(tmp);
}

TEST_CASE("scene save/load round-trip is bit-identical") {
  const SynthDataset dataset(desk_config(21));
  const Scene scene = dataset.make_scene(1);
  const auto tmp = std::filesystem::temp_directory_path() / "ovo_scene_rt";
  std::filesystem::remove_all(tmp);
  save_scene(scene, tmp / "s");
  const Scene loaded = load_scene(tmp / "s");

  CHECK(loaded.labels.labels == scene.labels.labels);
  CHECK((loaded.feat3d->array() == scene.feat3d->array()).all());
  CHECK((loaded.teacher2d->values.array() == scene.teacher2d->values.array()).all());
  CHECK((loaded.student2d->values.array() == scene.student2d->values.array()).all());
  CHECK(loaded.seg->class_ids == scene.seg->class_ids);
  CHECK((loaded.seg->confidence.array() == scene.seg->confidence.array()).all());
  CHECK(loaded.camera.extrinsics == scene.camera.extrinsics);

  // Saving the loaded scene again reproduces the files byte for byte.
  save_scene(loaded, tmp / "s2");
  CHECK(identical_trees(tmp / "s", tmp / "s2"));
  std::filesystem::remove_all(tmp);
}

TEST_CASE("loading rejects shape mismatches naming the tensor") {
  const SynthDataset dataset(desk_config(5));
  const auto tmp = std::filesystem::temp_directory_path() / "ovo_scene_bad";
  std::filesystem::remove_all(tmp);
  save_scene(dataset.make_scene(0), tmp / "s");

  SUBCASE("wrong shape") {
    // Rewrite the feat3d manifest with a wrong leading extent.
    auto manifest = read_json_file(tmp / "s" / "feat3d.json");
    auto shape = manifest.at("shape").get<std::vector<std::int64_t>>();
    shape[0] -= 1;
    manifest["shape"] = shape;
    write_json_file(manifest, tmp / "s" / "feat3d.json");
    // The payload length no longer matches the declared shape.
    CHECK_THROWS_WITH_AS(load_scene(tmp / "s"), doctest::Contains("payload size mismatch"),
                         std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(tmp / "s" / "teacher2d.bin", 64);
    CHECK_THROWS_WITH_AS(load_scene(tmp / "s"), doctest::Contains("payload size mismatch"),
                         std::runtime_error);
  }
  SUBCASE("transposed dims are named") {
    auto manifest = read_json_file(tmp / "s" / "manifest.json");
    // Swap grid dims so labels no longer match the declared grid size.
    auto grid = manifest.at("grid");
    grid["dims"] = {5, 5, 5};
    manifest["grid"] = grid;
    write_json_file(manifest, tmp / "s" / "manifest.json");
    CHECK_THROWS_WITH_AS(load_scene(tmp / "s"), doctest::Contains("labels"),
                         std::runtime_error);
  }
  std::filesystem::remove_all(tmp);
}

TEST_CASE("rendered classes equal first occupied voxel along each pixel ray") {
  const SynthDataset dataset(desk_config(33));
  const Scene scene = dataset.make_scene(2);
  const auto classes = render_first_hit_classes(scene.labels, scene.camera);
  const Eigen::Vector3d center = scene.camera.center();
  const Eigen::Matrix3d rot_t = scene.camera.rotation().transpose();
  const double max_range =
      (scene.grid.max_corner() - scene.grid.min_corner()).norm() + center.norm() + 5.0;

  int checked = 0;
  for (int y = 0; y < scene.camera.image_height; y += 3) {
    for (int x = 0; x < scene.camera.image_width; x += 3) {
      const Eigen::Vector3d dir_cam((x + 0.5 - scene.camera.cx) / scene.camera.fx,
                                    (y + 0.5 - scene.camera.cy) / scene.camera.fy, 1.0);
      const Eigen::Vector3d dir = (rot_t * dir_cam).normalized();
      const std::int64_t hit =
          oracles::sampled_first_hit(center, dir, scene.labels, max_range, 20000);
      const int expected = hit < 0 ? 0 : scene.labels.at(hit);
      const int got = classes[static_cast<std::size_t>(y) * scene.camera.image_width + x];
      CHECK(got == expected);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("noiseless base-only scenes keep every visible in-image voxel") {
  // Seed 46 has no projection aliasing (no visible voxel shares its pixel
  // with a nearer voxel of another class), so the exact teacher keeps the
  // visible set unchanged.
  SynthConfig cfg = desk_config(46);
  cfg.sigma = 0.0;
  cfg.novel_count = 0;
  cfg.base_count = 4;
  const SynthDataset dataset(cfg);
  const Scene scene = dataset.make_scene(0);
  const OmegaResult r = build_omega(scene.grid, scene.labels, &*scene.seg, scene.camera,
                                    &scene.schema, FilterConfig{});
  CHECK(r.counts.after_consistency == r.counts.after_occlusion);
  CHECK(r.counts.after_occlusion > 0);
}

TEST_CASE("a noiseless teacher never removes a voxel whose pixel shows its class") {
  for (int seed = 44; seed < 48; ++seed) {
    SynthConfig cfg = desk_config(static_cast<std::uint64_t>(seed));
    cfg.sigma = 0.0;
    cfg.novel_count = 0;
    cfg.base_count = 4;
    const SynthDataset dataset(cfg);
    const Scene scene = dataset.make_scene(0);
    const OmegaResult r = build_omega(scene.grid, scene.labels, &*scene.seg, scene.camera,
                                      &scene.schema, FilterConfig{});
    const auto rendered = render_first_hit_classes(scene.labels, scene.camera);
    for (const auto& e : r.correspondences.entries) {
      if (e.in_image && e.visible && !e.consistent) {
        // Every removal must be projection aliasing: the mapped pixel's
        // first-hit class differs from the voxel's label.
        int pixel_class = rendered[static_cast<std::size_t>(e.pixel_y) *
                                       scene.camera.image_width +
                                   e.pixel_x];
        if (pixel_class == 0) {
          pixel_class = scene.schema.background_label();
        }
        CHECK(pixel_class != scene.labels.at(e.voxel));
      }
    }
  }
}

TEST_CASE("noiseless teacher argmax is exact on every pixel") {
  SynthConfig cfg = desk_config(45);
  cfg.sigma = 0.0;
  const SynthDataset dataset(cfg);
  const Scene scene = dataset.make_scene(0);
  const auto gt2d = render_first_hit_classes(scene.labels, scene.camera);
  const int background = scene.schema.background_label();
  for (std::size_t p = 0; p < gt2d.size(); ++p) {
    int expected = gt2d[p];
    if (expected == 0 || expected == LabelVolume::kInvalid) {
      expected = background;
    }
    if (scene.schema.is_novel(expected)) {
      continue;  // novel pixels score zero against the restricted bank
    }
    CHECK(scene.seg->class_ids[p] == expected);
    CHECK(scene.seg->confidence[p] >= 1.0 / (cfg.base_count + 1) - 1e-9);
  }
}

TEST_CASE("default scenes shrink strictly through occlusion and consistency") {
  const SynthDataset dataset(desk_config(46));
  std::int64_t total_range = 0, total_occ = 0, total_cons = 0;
  for (int i = 0; i < 4; ++i) {
    const Scene scene = dataset.make_scene(i);
    const OmegaResult r = build_omega(scene.grid, scene.labels, &*scene.seg, scene.camera,
                                      &scene.schema, FilterConfig{});
    total_range += r.counts.after_range;
    total_occ += r.counts.after_occlusion;
    total_cons += r.counts.after_consistency;
  }
  CHECK(total_range > total_occ);   // boxes occlude the floor behind them
  CHECK(total_occ > total_cons);    // noise and novel merging cost voxels
}

TEST_CASE("noiseless text-mode scene classifies perfectly with the identity head") {
  SynthConfig cfg = desk_config(47);
  cfg.sigma = 0.0;
  cfg.feature_mode = SynthConfig::FeatureMode::text;
  cfg.feat3d_dim = cfg.teacher_dim;
  const SynthDataset dataset(cfg);
  const Scene scene = dataset.make_scene(0);
  std::vector<std::string> queries;
  for (int l : scene.schema.base_labels()) {
    queries.push_back(scene.schema.category_for_label(l).name);
  }
  for (int l : scene.schema.novel_labels()) {
    queries.push_back(scene.schema.category_for_label(l).name);
  }
  const VoxelClassification out =
      classify_voxels(*scene.feat3d, AlignmentHead::identity_head(cfg.teacher_dim),
                      dataset.bank(), queries, occupied_mask(scene.labels), scene.grid);
  for (std::int64_t v = 0; v < scene.grid.voxel_count(); ++v) {
    if (scene.labels.occupied(v)) {
      CHECK(out.labels.at(v) == scene.labels.at(v));
    }
  }
}

TEST_CASE("ingest validates declared datasets") {
  const auto tmp = std::filesystem::temp_directory_path() / "ovo_ingest";
  std::filesystem::remove_all(tmp);

  // Fabricate a plausible indoor export from the synthetic generator.
  SynthConfig cfg;
  cfg.grid_dims = {60, 36, 60};
  cfg.image_width = 16;
  cfg.image_height = 12;
  cfg.base_count = 8;
  cfg.novel_count = 3;
  cfg.feat3d_dim = 11;
  cfg.teacher_dim = 16;
  cfg.student2d_dim = 8;
  cfg.object_count = 3;
  cfg.seed = 99;
  const SynthDataset dataset(cfg);
  Scene scene = dataset.make_scene(0);

  // Rename categories to the indoor schema.
  std::vector<Category> cats;
  for (const auto& name :
       {"ceiling", "floor", "wall", "window", "chair", "sofa", "tvs", "furniture"}) {
    cats.push_back({name, true, false});
  }
  cats.push_back({"bed", false, false});
  cats.push_back({"table", false, false});
  cats.push_back({"other", false, false});
  cats.push_back({"background", false, true});
  scene.schema = CategorySchema(cats);
  scene.dataset = "nyuv2";

  save_scene(scene, tmp / "ok");
  CHECK_NOTHROW(ingest_real(tmp / "ok"));

  SUBCASE("wrong grid dims are rejected") {
    Scene wrong = scene;
    wrong.grid = VoxelGrid({60, 36, 59}, scene.grid.origin, scene.grid.voxel_size);
    wrong.labels = LabelVolume::empty(wrong.grid);
    wrong.feat3d = Eigen::MatrixXd::Ones(wrong.grid.voxel_count(), cfg.feat3d_dim);
    save_scene(wrong, tmp / "bad_dims");
    CHECK_THROWS_WITH_AS(ingest_real(tmp / "bad_dims"),
                         doctest::Contains("grid dims"), std::runtime_error);
  }
  SUBCASE("wrong novel set is rejected") {
    Scene wrong = scene;
    std::vector<Category> bad = cats;
    bad[8].base = true;  // bed is no longer novel
    bad[0].base = false;
    wrong.schema = CategorySchema(bad);
    save_scene(wrong, tmp / "bad_novel");
    CHECK_THROWS_WITH_AS(ingest_real(tmp / "bad_novel"),
                         doctest::Contains("schema/class-count mismatch"), std::runtime_error);
  }

  SUBCASE("an outdoor-shaped export with the expected novel set is accepted") {
    SynthConfig out_cfg;
    out_cfg.grid_dims = {256, 256, 32};
    out_cfg.up_axis = 2;
    out_cfg.image_width = 16;
    out_cfg.image_height = 12;
    out_cfg.base_count = 16;
    out_cfg.novel_count = 3;
    out_cfg.feat3d_dim = 19;
    out_cfg.teacher_dim = 24;
    out_cfg.student2d_dim = 8;
    out_cfg.object_count = 5;
    out_cfg.generate_features = false;
    out_cfg.seed = 5;
    Scene outdoor = SynthDataset(out_cfg).make_scene(0);
    std::vector<Category> kitti;
    for (const auto& name :
         {"sidewalk", "parking", "other-ground", "truck", "bicycle", "motorcycle",
          "other-vehicle", "vegetation", "trunk", "terrain", "person", "bicyclist",
          "motorcyclist", "fence", "pole", "traffic-sign"}) {
      kitti.push_back({name, true, false});
    }
    kitti.push_back({"car", false, false});
    kitti.push_back({"road", false, false});
    kitti.push_back({"building", false, false});
    kitti.push_back({"background", false, true});
    outdoor.schema = CategorySchema(kitti);
    outdoor.dataset = "semantickitti";
    save_scene(outdoor, tmp / "kitti");
    CHECK_NOTHROW(ingest_real(tmp / "kitti"));
  }
  std::filesystem::remove_all(tmp);
}
