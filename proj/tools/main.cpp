// ovo: open-vocabulary occupancy toolkit.
//
// Subcommands: synth, select, train, infer, eval, gradcheck. Progress goes
// to stderr; machine-readable results go to files under --out (and, for
// eval, to stdout). Exit codes: 0 success, 1 runtime failure, 2 usage or
// config error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "ovo/alignment.hpp"
#include "ovo/evaluation.hpp"
#include "ovo/io.hpp"
#include "ovo/log.hpp"
#include "ovo/parallel.hpp"
#include "ovo/scenes.hpp"
#include "ovo/selection.hpp"
#include "ovo/tensor.hpp"
#include "ovo/verify.hpp"
#include "ovo/vocab.hpp"

namespace fs = std::filesystem;
using namespace ovo;

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& flag) {
  std::vector<int> out;
  for (const auto& tok : split_csv(csv)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw std::invalid_argument(flag + ": '" + tok + "' is not an integer");
    }
  }
  return out;
}

FilterConfig parse_filters(const std::string& csv, int occlusion_threshold) {
  FilterConfig f{false, false, false, occlusion_threshold};
  for (const auto& name : split_csv(csv)) {
    if (name == "range") {
      f.range = true;
    } else if (name == "occlusion") {
      f.occlusion = true;
    } else if (name == "consistency") {
      f.consistency = true;
    } else {
      throw std::invalid_argument("unknown filter: " + name);
    }
  }
  f.validate();
  return f;
}

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SynthArgs {
  std::uint64_t seed = 0;
  int scenes = 1;
  std::string out;
  std::string grid = "24,16,24";
  std::string image = "64,48";
  double voxel_size = 0.2;
  int base = 5;
  int novel = 3;
  int feat3d_dim = 200;
  int teacher_dim = 512;
  int student2d_dim = 200;
  int objects = 6;
  int min_size = 2;
  int max_size = 6;
  double sigma = 0.05;
  double invalid_frac = 0.0;
  double corrupt_frac = 0.0;
  double corrupt_conf = 0.02;
  double temperature = 1.0;
  std::string up_axis = "y";
  std::string feature_mode = "classvec";
  int workers = default_workers();
};

SynthConfig to_config(const SynthArgs& a) {
  SynthConfig cfg;
  const auto grid = parse_int_list(a.grid, "--grid");
  const auto image = parse_int_list(a.image, "--image");
  if (grid.size() != 3) {
    throw std::invalid_argument("--grid expects X,Y,Z");
  }
  if (image.size() != 2) {
    throw std::invalid_argument("--image expects W,H");
  }
  cfg.grid_dims = {grid[0], grid[1], grid[2]};
  cfg.image_width = image[0];
  cfg.image_height = image[1];
  cfg.voxel_size = a.voxel_size;
  cfg.base_count = a.base;
  cfg.novel_count = a.novel;
  cfg.feat3d_dim = a.feat3d_dim;
  cfg.teacher_dim = a.teacher_dim;
  cfg.student2d_dim = a.student2d_dim;
  cfg.object_count = a.objects;
  cfg.min_object_size = a.min_size;
  cfg.max_object_size = a.max_size;
  cfg.sigma = a.sigma;
  cfg.invalid_fraction = a.invalid_frac;
  cfg.corrupt_fraction = a.corrupt_frac;
  cfg.corrupt_confidence = a.corrupt_conf;
  cfg.temperature = a.temperature;
  if (a.up_axis == "y") {
    cfg.up_axis = 1;
  } else if (a.up_axis == "z") {
    cfg.up_axis = 2;
  } else {
    throw std::invalid_argument("--up-axis expects y or z");
  }
  if (a.feature_mode == "classvec") {
    cfg.feature_mode = SynthConfig::FeatureMode::class_random;
  } else if (a.feature_mode == "text") {
    cfg.feature_mode = SynthConfig::FeatureMode::text;
  } else {
    throw std::invalid_argument("--feature-mode expects classvec or text");
  }
  cfg.seed = a.seed;
  return cfg;
}

std::string scene_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", index);
  return buf;
}

void run_synth(const SynthArgs& args) {
  if (args.scenes < 1) {
    throw std::invalid_argument("--scenes must be at least 1");
  }
  const SynthConfig cfg = to_config(args);
  const SynthDataset dataset(cfg);
  fs::create_directories(args.out);
  save_bank(dataset.bank(), fs::path(args.out) / "bank.json");
  // Scenes are fully determined by (seed, index), so generation can fan
  // out; each worker writes only its own directory.
  for_each_chunk(args.scenes, 1, args.workers,
                 [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                   for (std::int64_t i = begin; i < end; ++i) {
                     Scene scene = dataset.make_scene(static_cast<int>(i));
                     scene.name = scene_dir_name(static_cast<int>(i));
                     save_scene(scene, fs::path(args.out) / scene.name);
                   }
                 });
  log_info("synthesized " + std::to_string(args.scenes) + " scene(s) into " + args.out);
}

struct SelectArgs {
  std::string scene;
  std::string filters = "range,occlusion,consistency";
  int occlusion_threshold = 1;
  int workers = default_workers();
  std::string out;
};

void run_select(const SelectArgs& args) {
  const FilterConfig filters = parse_filters(args.filters, args.occlusion_threshold);
  const Scene scene = load_scene(args.scene);
  if (filters.consistency && !scene.seg) {
    throw std::runtime_error("scene has no teacher segmentation; cannot apply consistency");
  }
  const OmegaResult r =
      build_omega(scene.grid, scene.labels, scene.seg ? &*scene.seg : nullptr, scene.camera,
                  &scene.schema, filters, args.workers);
  fs::create_directories(args.out);
  save_correspondences(r.correspondences, r.counts, fs::path(args.out) / "correspondences.json");
  save_counts_json(r.counts, fs::path(args.out) / "counts.json");
  log_info("omega: " + std::to_string(r.counts.after_range) + " -> " +
           std::to_string(r.counts.after_occlusion) + " -> " +
           std::to_string(r.counts.after_consistency));
}

struct TrainArgs {
  std::vector<std::string> scenes;
  std::string data;
  std::string embeddings;
  std::string out;
  int epochs = 100;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  bool no_reweight = false;
  bool pix_mean = false;
  std::string filters = "range,occlusion,consistency";
  int occlusion_threshold = 1;
  std::string head3d_hidden = "256,256";
  int fusion_proj = 128;
  int fusion_hidden = 512;
  std::uint64_t seed = 0;
  int workers = default_workers();
};

std::vector<fs::path> collect_scene_dirs(const TrainArgs& args) {
  std::vector<fs::path> dirs;
  for (const auto& s : args.scenes) {
    dirs.emplace_back(s);
  }
  if (!args.data.empty()) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(args.data)) {
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
        found.push_back(entry.path());
      }
    }
    std::sort(found.begin(), found.end());
    dirs.insert(dirs.end(), found.begin(), found.end());
  }
  if (dirs.empty()) {
    throw std::invalid_argument("no scenes given (pass scene dirs or --data)");
  }
  return dirs;
}

void check_bank_covers_schema(const EmbeddingBank& bank, const CategorySchema& schema,
                              const std::string& scene_name) {
  if (bank.schema().category_count() != schema.category_count()) {
    throw std::invalid_argument("embedding bank does not match schema of scene " + scene_name);
  }
  for (int l = 1; l <= schema.category_count(); ++l) {
    if (bank.schema().category_for_label(l).name != schema.category_for_label(l).name) {
      throw std::invalid_argument("embedding bank does not match schema of scene " + scene_name);
    }
  }
}

void run_train(const TrainArgs& args) {
  const FilterConfig filters = parse_filters(args.filters, args.occlusion_threshold);
  const EmbeddingBank bank = load_bank(args.embeddings);
  const std::vector<fs::path> dirs = collect_scene_dirs(args);

  std::vector<TrainingBatch> batches;
  int feat_dim = -1;
  int student_dim = -1;
  for (const auto& dir : dirs) {
    const Scene scene = load_scene(dir);
    if (!scene.feat3d || !scene.teacher2d || !scene.seg || !scene.student2d) {
      throw std::runtime_error("scene " + dir.string() + " lacks tensors required for training");
    }
    check_bank_covers_schema(bank, scene.schema, scene.name);
    if (feat_dim >= 0 && (feat_dim != static_cast<int>(scene.feat3d->cols()) ||
                          student_dim != scene.student2d->channels())) {
      throw std::runtime_error("scene " + dir.string() +
                               " has feature dims inconsistent with earlier scenes");
    }
    const OmegaResult omega = build_omega(scene.grid, scene.labels, &*scene.seg, scene.camera,
                                          &scene.schema, filters, args.workers);
    batches.push_back(build_training_batch(omega.correspondences, *scene.feat3d,
                                           *scene.teacher2d, scene.labels, scene.schema, bank,
                                           *scene.student2d, scene.name));
    feat_dim = static_cast<int>(scene.feat3d->cols());
    student_dim = scene.student2d->channels();
    log_debug("scene " + scene.name + ": |omega| = " + std::to_string(batches.back().omega_size()));
  }

  TrainSettings settings;
  settings.weights = {args.lambda1, args.lambda2, args.lambda3};
  settings.optimizer.learning_rate = args.lr;
  settings.optimizer.weight_decay = args.weight_decay;
  settings.epochs = args.epochs;
  settings.seed = args.seed;
  settings.reweight = !args.no_reweight;
  settings.pix_mean = args.pix_mean;
  settings.workers = args.workers;

  const AlignmentHead head3d = AlignmentHead::with_dims(
      feat_dim, parse_int_list(args.head3d_hidden, "--head3d-hidden"), bank.dim());
  const MultiScaleFusion2D fusion =
      MultiScaleFusion2D::with_dims(student_dim, args.fusion_proj, args.fusion_hidden, bank.dim());

  const TrainResult result = train(batches, head3d, fusion, settings);

  fs::create_directories(args.out);
  save_head(result.head3d, fs::path(args.out) / "head3d");
  save_fusion(result.fusion, fs::path(args.out) / "fusion2d");
  write_loss_log_csv(result.log, fs::path(args.out) / "loss_log.csv");
  log_info("trained " + std::to_string(args.epochs) + " epoch(s); final total loss " +
           std::to_string(result.log.back().total));
}

struct InferArgs {
  std::string scene;
  std::string heads;
  std::string embeddings;
  std::string queries;
  std::string out;
  int workers = default_workers();
};

void run_infer(const InferArgs& args) {
  const Scene scene = load_scene(args.scene);
  if (!scene.feat3d) {
    throw std::runtime_error("scene " + args.scene + " lacks the feat3d tensor");
  }
  const EmbeddingBank bank = load_bank(args.embeddings);
  const AlignmentHead head3d = load_head(fs::path(args.heads) / "head3d");
  const std::vector<std::string> queries = split_csv(args.queries);

  const VoxelClassification result = classify_voxels(
      *scene.feat3d, head3d, bank, queries, occupied_mask(scene.labels), scene.grid,
      args.workers);

  fs::create_directories(args.out);
  const std::int64_t n = scene.grid.voxel_count();
  Eigen::VectorXd labels(n);
  for (std::int64_t v = 0; v < n; ++v) {
    labels[v] = static_cast<double>(result.labels.at(v));
  }
  save_tensor(DenseTensor::from_values({n}, Dtype::f32, std::move(labels)),
              fs::path(args.out) / "pred_labels.json");
  save_tensor(DenseTensor::from_values({n}, Dtype::f32, result.max_scores),
              fs::path(args.out) / "pred_scores.json");
  nlohmann::json meta;
  meta["scene"] = scene.name;
  meta["grid"] = grid_to_json(scene.grid);
  meta["queries"] = queries;
  write_json_file(meta, fs::path(args.out) / "pred_meta.json");
  log_info("classified scene " + scene.name + " against " + std::to_string(queries.size()) +
           " quer" + (queries.size() == 1 ? "y" : "ies"));
}

struct EvalArgs {
  std::string pred;
  std::string scene;
  std::string out;
  bool include_empty = false;
  int workers = default_workers();
};

void run_eval(const EvalArgs& args) {
  const Scene scene = load_scene(args.scene);
  const DenseTensor pred_tensor = load_tensor(args.pred);
  if (pred_tensor.size() != scene.grid.voxel_count()) {
    throw std::runtime_error("prediction tensor does not match the scene grid");
  }
  std::vector<std::uint8_t> pred_labels(static_cast<std::size_t>(pred_tensor.size()));
  for (std::int64_t i = 0; i < pred_tensor.size(); ++i) {
    const double v = pred_tensor.values()[i];
    if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
      throw std::runtime_error("prediction tensor holds non-label values");
    }
    pred_labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  const LabelVolume pred(scene.grid, std::move(pred_labels));

  const std::set<int> ignore = args.include_empty ? std::set<int>{} : std::set<int>{0};
  const ConfusionMatrix cm =
      accumulate(pred, scene.labels, ignore, scene.schema.category_count(), args.workers);
  const EvalReport report = summarize(iou_per_class(cm), scene.schema, cm.total());

  fs::create_directories(args.out);
  write_report_csv(report, fs::path(args.out) / "report.csv");
  write_report_json(report, fs::path(args.out) / "report.json");
  std::cout << report_json_string(report) << "\n";
}

struct GradcheckArgs {
  int seeds = 20;
  double tol = 1e-4;
  double h = 1e-6;
};

int run_gradcheck(const GradcheckArgs& args) {
  const GradBatteryReport battery = run_gradient_battery(args.seeds, args.tol, args.h);
  const bool detector_ok = run_detector_self_test();
  std::printf("gradient battery: %s (%d seeds, max rel error %.3e, tol %.1e)\n",
              battery.passed ? "pass" : "FAIL", battery.seeds, battery.max_rel_error, args.tol);
  for (const auto& f : battery.failures) {
    std::printf("  %s\n", f.c_str());
  }
  std::printf("corrupted-gradient detector: %s\n", detector_ok ? "pass" : "FAIL");
  return battery.passed && detector_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-vocabulary occupancy toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic scenes and a bank");
  synth_cmd->add_option("--seed", synth.seed, "master seed")->required();
  synth_cmd->add_option("--scenes", synth.scenes, "number of scenes");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--grid", synth.grid, "grid dims X,Y,Z");
  synth_cmd->add_option("--image", synth.image, "image dims W,H");
  synth_cmd->add_option("--voxel-size", synth.voxel_size, "voxel edge length");
  synth_cmd->add_option("--base", synth.base, "base class count");
  synth_cmd->add_option("--novel", synth.novel, "novel class count");
  synth_cmd->add_option("--feat3d-dim", synth.feat3d_dim, "student 3D feature dim");
  synth_cmd->add_option("--teacher-dim", synth.teacher_dim, "teacher/text feature dim");
  synth_cmd->add_option("--student2d-dim", synth.student2d_dim, "student 2D feature dim");
  synth_cmd->add_option("--objects", synth.objects, "boxes per scene");
  synth_cmd->add_option("--min-size", synth.min_size, "min box edge (voxels)");
  synth_cmd->add_option("--max-size", synth.max_size, "max box edge (voxels)");
  synth_cmd->add_option("--sigma", synth.sigma, "feature noise magnitude");
  synth_cmd->add_option("--invalid-frac", synth.invalid_frac, "fraction of invalid voxels");
  synth_cmd->add_option("--corrupt-frac", synth.corrupt_frac,
                        "fraction of wrong-teacher pixels");
  synth_cmd->add_option("--corrupt-conf", synth.corrupt_conf,
                        "confidence forced onto corrupted pixels");
  synth_cmd->add_option("--temperature", synth.temperature, "teacher softmax temperature");
  synth_cmd->add_option("--up-axis", synth.up_axis, "up axis: y or z");
  synth_cmd->add_option("--feature-mode", synth.feature_mode, "classvec or text");
  synth_cmd->add_option("--workers", synth.workers, "worker threads");

  SelectArgs select;
  CLI::App* select_cmd = app.add_subcommand("select", "build the valid voxel set");
  select_cmd->add_option("--scene", select.scene, "scene directory")->required();
  select_cmd->add_option("--filters", select.filters, "subset of range,occlusion,consistency");
  select_cmd->add_option("--occlusion-threshold", select.occlusion_threshold,
                         "blockers needed to occlude");
  select_cmd->add_option("--workers", select.workers, "worker threads");
  select_cmd->add_option("--out", select.out, "output directory")->required();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the alignment heads");
  train_cmd->add_option("scenes", train_args.scenes, "scene directories");
  train_cmd->add_option("--data", train_args.data, "directory of scene subdirectories");
  train_cmd->add_option("--embeddings", train_args.embeddings, "embedding bank manifest")
      ->required();
  train_cmd->add_option("--out", train_args.out, "output directory")->required();
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--lr", train_args.lr, "learning rate");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "decoupled weight decay");
  train_cmd->add_option("--lambda1", train_args.lambda1, "pix-pix weight");
  train_cmd->add_option("--lambda2", train_args.lambda2, "vox-pix weight");
  train_cmd->add_option("--lambda3", train_args.lambda3, "vox-text weight");
  train_cmd->add_flag("--no-reweight", train_args.no_reweight,
                      "disable confidence re-weighting");
  train_cmd->add_flag("--pix-mean", train_args.pix_mean, "mean-reduce the pix-pix loss");
  train_cmd->add_option("--filters", train_args.filters, "filters for omega construction");
  train_cmd->add_option("--occlusion-threshold", train_args.occlusion_threshold,
                        "blockers needed to occlude");
  train_cmd->add_option("--head3d-hidden", train_args.head3d_hidden,
                        "hidden dims of the 3D head");
  train_cmd->add_option("--fusion-proj", train_args.fusion_proj,
                        "per-scale projection channels");
  train_cmd->add_option("--fusion-hidden", train_args.fusion_hidden, "fusion mixer hidden dim");
  train_cmd->add_option("--seed", train_args.seed, "training seed")->required();
  train_cmd->add_option("--workers", train_args.workers, "worker threads");

  InferArgs infer;
  CLI::App* infer_cmd = app.add_subcommand("infer", "classify voxels by text queries");
  infer_cmd->add_option("--scene", infer.scene, "scene directory")->required();
  infer_cmd->add_option("--heads", infer.heads, "trained heads directory")->required();
  infer_cmd->add_option("--embeddings", infer.embeddings, "embedding bank manifest")->required();
  infer_cmd->add_option("--queries", infer.queries, "comma-separated query names")->required();
  infer_cmd->add_option("--out", infer.out, "output directory")->required();
  infer_cmd->add_option("--workers", infer.workers, "worker threads");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "prediction label tensor manifest")->required();
  eval_cmd->add_option("--scene", eval.scene, "scene directory with ground truth")->required();
  eval_cmd->add_option("--out", eval.out, "output directory")->required();
  eval_cmd->add_flag("--include-empty", eval.include_empty,
                     "score empty space as a class");
  eval_cmd->add_option("--workers", eval.workers, "worker threads");

  GradcheckArgs gradcheck;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  gradcheck_cmd->add_option("--seeds", gradcheck.seeds, "number of random configurations");
  gradcheck_cmd->add_option("--tol", gradcheck.tol, "relative error tolerance");
  gradcheck_cmd->add_option("--step", gradcheck.h, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth_cmd->parsed()) {
      run_synth(synth);
    } else if (select_cmd->parsed()) {
      run_select(select);
    } else if (train_cmd->parsed()) {
      run_train(train_args);
    } else if (infer_cmd->parsed()) {
      run_infer(infer);
    } else if (eval_cmd->parsed()) {
      run_eval(eval);
    } else if (gradcheck_cmd->parsed()) {
      return run_gradcheck(gradcheck);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
