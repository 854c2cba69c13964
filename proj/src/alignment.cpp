#include "ovo/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ovo/log.hpp"
#include "ovo/parallel.hpp"
#include "ovo/similarity.hpp"

namespace ovo {

namespace {

constexpr std::int64_t kRowChunk = 2048;

struct AlignmentTerms {
  double loss = 0.0;           // sum of w_i * (1 - cos_i)
  Eigen::MatrixXd upstream;    // d(loss_scaled)/d(aligned), rows match input
};

/// Shared core of all three losses: per-row cosine terms against a target
/// row source, with optional per-row weights. `upstream_scale` multiplies
/// the gradient rows (the caller folds in its reduction factor).
/// target_row(i) must return a vector, or an expression over storage that
/// outlives the call; expressions over function-local temporaries dangle.
template <typename TargetRow>
AlignmentTerms cosine_alignment_terms(const Eigen::MatrixXd& aligned, TargetRow&& target_row,
                                      const Eigen::VectorXd* weights, double upstream_scale,
                                      int workers) {
  const std::int64_t n = aligned.rows();
  AlignmentTerms terms;
  terms.upstream.resize(n, aligned.cols());
  const std::int64_t chunks = chunk_count(n, kRowChunk);
  std::vector<double> partials(static_cast<std::size_t>(chunks), 0.0);
  for_each_chunk(n, kRowChunk, workers,
                 [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                   double acc = 0.0;
                   Eigen::VectorXd grad;
                   for (std::int64_t i = begin; i < end; ++i) {
                     const Eigen::VectorXd a = aligned.row(i).transpose();
                     const Eigen::VectorXd t = target_row(i);
                     const double cos = cosine_with_grad(a, t, grad);
                     const double w = weights == nullptr ? 1.0 : (*weights)[i];
                     acc += w * (1.0 - cos);
                     terms.upstream.row(i) = (-w * upstream_scale) * grad.transpose();
                   }
                   partials[static_cast<std::size_t>(c)] = acc;
                 });
  terms.loss =
      pairwise_combine(std::move(partials), [](double a, double b) { return a + b; }, 0.0);
  return terms;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

TrainingBatch build_training_batch(const CorrespondenceSet& corr,
                                   const Eigen::Ref<const Eigen::MatrixXd>& voxel_features,
                                   const FeatureMap& teacher2d, const LabelVolume& labels,
                                   const CategorySchema& schema, const EmbeddingBank& bank,
                                   const FeatureMap& student2d, std::string scene_name) {
  if (voxel_features.rows() != corr.grid.voxel_count()) {
    throw std::invalid_argument("feature volume row count does not match grid");
  }
  if (teacher2d.width != corr.camera.image_width ||
      teacher2d.height != corr.camera.image_height) {
    throw std::invalid_argument("teacher map does not match camera image dims");
  }
  if (bank.schema().category_count() != schema.category_count()) {
    throw std::invalid_argument("embedding bank does not cover the schema");
  }
  for (int l = 1; l <= schema.category_count(); ++l) {
    if (bank.schema().category_for_label(l).name != schema.category_for_label(l).name) {
      throw std::invalid_argument("embedding bank category order does not match the schema");
    }
  }

  std::vector<const CorrespondenceEntry*> kept;
  for (const auto& e : corr.entries) {
    if (e.in_image && e.visible && e.consistent) {
      kept.push_back(&e);
    }
  }

  TrainingBatch batch;
  batch.scene_name = std::move(scene_name);
  const std::int64_t n = static_cast<std::int64_t>(kept.size());
  batch.voxel_features.resize(n, voxel_features.cols());
  batch.teacher_rows.resize(n, teacher2d.channels());
  batch.text_targets.resize(n, bank.dim());
  batch.confidences.resize(n);
  batch.labels.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const CorrespondenceEntry& e = *kept[static_cast<std::size_t>(i)];
    batch.voxel_features.row(i) = voxel_features.row(e.voxel);
    batch.teacher_rows.row(i) = teacher2d.values.row(teacher2d.pixel_index(e.pixel_x, e.pixel_y));
    batch.confidences[i] = e.confidence;
    int label = labels.at(e.voxel);
    if (schema.is_novel(label)) {
      label = schema.unknown_merge_label();
    }
    batch.labels[static_cast<std::size_t>(i)] = label;
    batch.text_targets.row(i) = bank.embedding_for_label(label);
  }
  batch.student_pyramid = build_student_pyramid(student2d);
  batch.teacher_map = teacher2d;
  return batch;
}

LossResult loss_vox_pix(const TrainingBatch& batch, const AlignmentHead& head3d, bool reweight,
                        int workers) {
  const std::int64_t n = batch.omega_size();
  if (n == 0) {
    throw std::runtime_error("no valid voxels");
  }
  AlignmentHead::Cache cache;
  const Eigen::MatrixXd aligned = head3d.forward_cached(batch.voxel_features, cache);
  const Eigen::VectorXd* weights = reweight ? &batch.confidences : nullptr;
  AlignmentTerms terms = cosine_alignment_terms(
      aligned, [&](std::int64_t i) { return batch.teacher_rows.row(i).transpose(); }, weights,
      1.0 / static_cast<double>(n), workers);
  LossResult out;
  out.value = terms.loss / static_cast<double>(n);
  out.grads = GradientBuffer::like(head3d.layers());
  head3d.backward(cache, terms.upstream, out.grads);
  return out;
}

LossResult loss_vox_text(const TrainingBatch& batch, const AlignmentHead& head3d,
                         const EmbeddingBank& bank, int workers) {
  const std::int64_t n = batch.omega_size();
  if (n == 0) {
    throw std::runtime_error("no valid voxels");
  }
  AlignmentHead::Cache cache;
  const Eigen::MatrixXd aligned = head3d.forward_cached(batch.voxel_features, cache);
  AlignmentTerms terms = cosine_alignment_terms(
      aligned,
      [&](std::int64_t i) -> Eigen::VectorXd {
        return bank.embedding_for_label(batch.labels[static_cast<std::size_t>(i)]).transpose();
      },
      nullptr, 1.0 / static_cast<double>(n), workers);
  LossResult out;
  out.value = terms.loss / static_cast<double>(n);
  out.grads = GradientBuffer::like(head3d.layers());
  head3d.backward(cache, terms.upstream, out.grads);
  return out;
}

LossResult loss_pix_pix(const FeatureMap& student, const FeatureMap& teacher,
                        const AlignmentHead& head2d, bool mean_reduction, int workers) {
  if (student.width != teacher.width || student.height != teacher.height) {
    throw std::invalid_argument("student and teacher maps must share dimensions");
  }
  const std::int64_t n = student.pixel_count();
  const double scale = mean_reduction ? 1.0 / static_cast<double>(n) : 1.0;
  AlignmentHead::Cache cache;
  const Eigen::MatrixXd aligned = head2d.forward_cached(student.values, cache);
  if (aligned.cols() != teacher.values.cols()) {
    throw std::invalid_argument("aligned student dim does not match teacher dim");
  }
  AlignmentTerms terms = cosine_alignment_terms(
      aligned, [&](std::int64_t i) { return teacher.values.row(i).transpose(); }, nullptr, scale,
      workers);
  LossResult out;
  out.value = terms.loss * scale;
  out.grads = GradientBuffer::like(head2d.layers());
  head2d.backward(cache, terms.upstream, out.grads);
  return out;
}

FusionLossResult loss_pix_pix(
    const std::array<FeatureMap, MultiScaleFusion2D::kLevels>& pyramid,
    const FeatureMap& teacher, const MultiScaleFusion2D& fusion, bool mean_reduction,
    int workers) {
  const std::int64_t n = teacher.pixel_count();
  const double scale = mean_reduction ? 1.0 / static_cast<double>(n) : 1.0;
  MultiScaleFusion2D::Cache cache;
  const FeatureMap fused = fusion.forward_cached(pyramid, teacher.width, teacher.height, cache);
  if (fused.channels() != teacher.channels()) {
    throw std::invalid_argument("fused student dim does not match teacher dim");
  }
  AlignmentTerms terms = cosine_alignment_terms(
      fused.values, [&](std::int64_t i) { return teacher.values.row(i).transpose(); }, nullptr,
      scale, workers);
  FusionLossResult out;
  out.value = terms.loss * scale;
  out.grads.projections = GradientBuffer::like(fusion.scale_projections());
  out.grads.mixer = GradientBuffer::like(fusion.mixer().layers());
  fusion.backward(cache, terms.upstream, out.grads);
  return out;
}

double total_loss(double l_pix_pix, double l_vox_pix, double l_vox_text,
                  const LossWeights& weights) {
  weights.validate();
  return weights.lambda1 * l_pix_pix + weights.lambda2 * l_vox_pix +
         weights.lambda3 * l_vox_text;
}

AdamW::AdamW(Eigen::Index parameter_count, AdamWConfig config)
    : config_(config), m_(Eigen::VectorXd::Zero(parameter_count)),
      v_(Eigen::VectorXd::Zero(parameter_count)) {}

void AdamW::step(Eigen::VectorXd& params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("optimizer state does not match parameter count");
  }
  ++step_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_.array().matrix() +
       (1.0 - config_.beta2) * grad.array().square().matrix();
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const Eigen::ArrayXd m_hat = m_.array() / bias1;
  const Eigen::ArrayXd v_hat = v_.array() / bias2;
  params.array() -= config_.learning_rate *
                    (m_hat / (v_hat.sqrt() + config_.epsilon) +
                     config_.weight_decay * params.array());
}

namespace {

struct SceneEval {
  double pix = 0.0;
  double vox_pix = 0.0;
  double vox_text = 0.0;
};

/// One forward through the 3D head serves both voxel losses; their
/// upstreams are combined with the lambda weights before the single
/// backward pass.
SceneEval evaluate_scene(const TrainingBatch& batch, const AlignmentHead& head3d,
                         const MultiScaleFusion2D& fusion, const TrainSettings& settings,
                         GradientBuffer* grads3, FusionGradients* gradsf) {
  SceneEval eval;
  const std::int64_t n = batch.omega_size();
  if (n > 0) {
    AlignmentHead::Cache cache;
    const Eigen::MatrixXd aligned = head3d.forward_cached(batch.voxel_features, cache);
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::VectorXd* weights = settings.reweight ? &batch.confidences : nullptr;
    AlignmentTerms pix_terms = cosine_alignment_terms(
        aligned, [&](std::int64_t i) { return batch.teacher_rows.row(i).transpose(); }, weights,
        inv_n, settings.workers);
    AlignmentTerms text_terms = cosine_alignment_terms(
        aligned, [&](std::int64_t i) { return batch.text_targets.row(i).transpose(); }, nullptr,
        inv_n, settings.workers);
    eval.vox_pix = pix_terms.loss * inv_n;
    eval.vox_text = text_terms.loss * inv_n;
    if (grads3 != nullptr) {
      const Eigen::MatrixXd upstream = settings.weights.lambda2 * pix_terms.upstream +
                                       settings.weights.lambda3 * text_terms.upstream;
      head3d.backward(cache, upstream, *grads3);
    }
  }

  const std::int64_t pixels = batch.teacher_map.pixel_count();
  const double pix_scale = settings.pix_mean ? 1.0 / static_cast<double>(pixels) : 1.0;
  MultiScaleFusion2D::Cache fcache;
  const FeatureMap fused = fusion.forward_cached(batch.student_pyramid, batch.teacher_map.width,
                                                 batch.teacher_map.height, fcache);
  AlignmentTerms fused_terms = cosine_alignment_terms(
      fused.values, [&](std::int64_t i) { return batch.teacher_map.values.row(i).transpose(); },
      nullptr, pix_scale * settings.weights.lambda1, settings.workers);
  eval.pix = fused_terms.loss * pix_scale;
  if (gradsf != nullptr) {
    fusion.backward(fcache, fused_terms.upstream, *gradsf);
  }
  return eval;
}

double fixed_order_mean(const std::vector<double>& values) {
  std::vector<double> copy = values;
  const double sum =
      pairwise_combine(std::move(copy), [](double a, double b) { return a + b; }, 0.0);
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

}  // namespace

TrainResult train(const std::vector<TrainingBatch>& batches, AlignmentHead head3d,
                  MultiScaleFusion2D fusion, const TrainSettings& settings) {
  if (batches.empty()) {
    throw std::invalid_argument("training requires at least one scene");
  }
  settings.weights.validate();

  std::mt19937_64 rng(settings.seed);
  head3d.initialize(rng);
  fusion.initialize(rng);

  Eigen::VectorXd params3 = head3d.parameters();
  Eigen::VectorXd paramsf = fusion.parameters();
  AdamW adam3(params3.size(), settings.optimizer);
  AdamW adamf(paramsf.size(), settings.optimizer);

  std::vector<std::size_t> order(batches.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }

  TrainResult result;
  bool warned_empty = false;
  GradientBuffer grads3 = GradientBuffer::like(head3d.layers());
  FusionGradients gradsf;
  gradsf.projections = GradientBuffer::like(fusion.scale_projections());
  gradsf.mixer = GradientBuffer::like(fusion.mixer().layers());

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pix(batches.size(), 0.0);
    std::vector<double> vox_pix(batches.size(), 0.0);
    std::vector<double> vox_text(batches.size(), 0.0);
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
      const std::size_t b = order[slot];
      const TrainingBatch& batch = batches[b];
      if (batch.omega_size() == 0 && !warned_empty) {
        log_info("scene '" + batch.scene_name + "' has an empty valid voxel set; skipping its voxel losses");
        warned_empty = true;
      }
      grads3.set_zero();
      gradsf.set_zero();
      const SceneEval eval = evaluate_scene(batch, head3d, fusion, settings, &grads3, &gradsf);
      const double scene_total =
          total_loss(eval.pix, eval.vox_pix, eval.vox_text, settings.weights);
      if (!std::isfinite(scene_total)) {
        throw std::runtime_error("NaN loss in scene '" + batch.scene_name + "' at epoch " +
                                 std::to_string(epoch));
      }
      pix[b] = eval.pix;
      vox_pix[b] = eval.vox_pix;
      vox_text[b] = eval.vox_text;

      if (batch.omega_size() > 0) {
        adam3.step(params3, grads3.flattened());
        head3d.set_parameters(params3);
      }
      adamf.step(paramsf, gradsf.flattened());
      fusion.set_parameters(paramsf);
    }

    EpochLog log;
    log.epoch = epoch;
    log.l_pix_pix = fixed_order_mean(pix);
    log.l_vox_pix = fixed_order_mean(vox_pix);
    log.l_vox_text = fixed_order_mean(vox_text);
    log.total = total_loss(log.l_pix_pix, log.l_vox_pix, log.l_vox_text, settings.weights);
    result.log.push_back(log);
  }

  result.head3d = std::move(head3d);
  result.fusion = std::move(fusion);
  return result;
}

void write_loss_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f << "epoch,l_pix_pix,l_vox_pix,l_vox_text,total\n";
  char buf[160];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", row.epoch, row.l_pix_pix,
                  row.l_vox_pix, row.l_vox_text, row.total);
    f << buf;
  }
}

}  // namespace ovo
