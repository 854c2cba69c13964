#include "ovo/verify.hpp"

#include <random>

#include "ovo/alignment.hpp"
#include "ovo/gradcheck.hpp"

namespace ovo {

namespace {

struct Fixture {
  EmbeddingBank bank;
  TrainingBatch batch;
  AlignmentHead head3d;
  MultiScaleFusion2D fusion;
};

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = gauss(rng);
    }
  }
  return m;
}

Fixture make_fixture(std::uint64_t seed) {
  constexpr int kVoxels = 8;
  constexpr int kFeat3d = 5;
  constexpr int kTeacher = 6;
  constexpr int kStudent2d = 4;
  // Small pixel count keeps the sum-reduced pix-pix loss of order one, so
  // central-difference cancellation stays far below the 1e-4 gate even for
  // the smallest live gradient entries.
  constexpr int kImageW = 4;
  constexpr int kImageH = 2;

  std::mt19937_64 rng(seed);
  Fixture fx;
  fx.bank = EmbeddingBank::synthetic_orthonormal(
      {{"a", true, false}, {"b", true, false}, {"n", false, false}, {"background", false, true}},
      kTeacher, seed ^ 0x5eedULL);

  fx.batch.scene_name = "gradcheck";
  fx.batch.voxel_features = random_matrix(kVoxels, kFeat3d, rng);
  fx.batch.teacher_rows = random_matrix(kVoxels, kTeacher, rng);
  for (Eigen::Index r = 0; r < fx.batch.teacher_rows.rows(); ++r) {
    fx.batch.teacher_rows.row(r).normalize();
  }
  std::uniform_real_distribution<double> conf(0.2, 1.0);
  std::uniform_int_distribution<int> label(1, fx.bank.category_count());
  fx.batch.confidences.resize(kVoxels);
  fx.batch.labels.resize(kVoxels);
  fx.batch.text_targets.resize(kVoxels, kTeacher);
  for (int i = 0; i < kVoxels; ++i) {
    fx.batch.confidences[i] = conf(rng);
    fx.batch.labels[static_cast<std::size_t>(i)] = label(rng);
    fx.batch.text_targets.row(i) =
        fx.bank.embedding_for_label(fx.batch.labels[static_cast<std::size_t>(i)]);
  }
  FeatureMap student2d(kImageW, kImageH, random_matrix(kImageW * kImageH, kStudent2d, rng));
  fx.batch.student_pyramid = build_student_pyramid(student2d);
  Eigen::MatrixXd teacher_map = random_matrix(kImageW * kImageH, kTeacher, rng);
  for (Eigen::Index r = 0; r < teacher_map.rows(); ++r) {
    teacher_map.row(r).normalize();
  }
  fx.batch.teacher_map = FeatureMap(kImageW, kImageH, std::move(teacher_map));

  fx.head3d = AlignmentHead::with_dims(kFeat3d, {7}, kTeacher);
  fx.head3d.initialize(rng);
  fx.fusion = MultiScaleFusion2D::with_dims(kStudent2d, 3, 8, kTeacher);
  fx.fusion.initialize(rng);
  return fx;
}

}  // namespace

GradBatteryReport run_gradient_battery(int seed_count, double tol, double h) {
  GradBatteryReport report;
  report.seeds = seed_count;
  const LossWeights weights;

  for (int seed = 0; seed < seed_count; ++seed) {
    Fixture fx = make_fixture(static_cast<std::uint64_t>(seed) * 7919u + 13u);

    const auto record = [&](const std::string& name, const GradCheckReport& r) {
      report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
      if (!r.passed) {
        report.failures.push_back("seed " + std::to_string(seed) + ": " + name +
                                  " max rel error " + std::to_string(r.max_rel_error));
      }
    };

    {
      AlignmentHead head = fx.head3d;
      const auto fn = [&](const Eigen::VectorXd& theta) {
        head.set_parameters(theta);
        const LossResult r = loss_vox_pix(fx.batch, head, true);
        return std::make_pair(r.value, r.grads.flattened());
      };
      record("loss_vox_pix", finite_difference_check(fn, fx.head3d.parameters(), h, tol));
    }
    {
      AlignmentHead head = fx.head3d;
      const auto fn = [&](const Eigen::VectorXd& theta) {
        head.set_parameters(theta);
        const LossResult r = loss_vox_text(fx.batch, head, fx.bank);
        return std::make_pair(r.value, r.grads.flattened());
      };
      record("loss_vox_text", finite_difference_check(fn, fx.head3d.parameters(), h, tol));
    }
    {
      MultiScaleFusion2D fusion = fx.fusion;
      const auto fn = [&](const Eigen::VectorXd& theta) {
        fusion.set_parameters(theta);
        const FusionLossResult r =
            loss_pix_pix(fx.batch.student_pyramid, fx.batch.teacher_map, fusion, false);
        return std::make_pair(r.value, r.grads.flattened());
      };
      record("loss_pix_pix", finite_difference_check(fn, fx.fusion.parameters(), h, tol));
    }
    {
      AlignmentHead head = fx.head3d;
      MultiScaleFusion2D fusion = fx.fusion;
      const Eigen::Index n3 = head.parameter_count();
      const Eigen::Index nf = fusion.parameter_count();
      Eigen::VectorXd theta0(n3 + nf);
      theta0 << head.parameters(), fusion.parameters();
      const auto fn = [&](const Eigen::VectorXd& theta) {
        head.set_parameters(theta.head(n3));
        fusion.set_parameters(theta.tail(nf));
        const LossResult vp = loss_vox_pix(fx.batch, head, true);
        const LossResult vt = loss_vox_text(fx.batch, head, fx.bank);
        const FusionLossResult pp =
            loss_pix_pix(fx.batch.student_pyramid, fx.batch.teacher_map, fusion, false);
        const double total = total_loss(pp.value, vp.value, vt.value, weights);
        GradientBuffer g3 = GradientBuffer::like(head.layers());
        g3.add_scaled(vp.grads, weights.lambda2);
        g3.add_scaled(vt.grads, weights.lambda3);
        Eigen::VectorXd grad(n3 + nf);
        grad << g3.flattened(), weights.lambda1 * pp.grads.flattened();
        return std::make_pair(total, grad);
      };
      record("composite_total", finite_difference_check(fn, theta0, h, tol));
    }
  }
  report.passed = report.failures.empty();
  return report;
}

bool run_detector_self_test() {
  // Quadratic loss with one gradient entry doubled: the check must fail and
  // point at that entry.
  const Eigen::Index dim = 6;
  const Eigen::Index corrupted = 2;
  Eigen::VectorXd params(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    params[i] = 0.5 + 0.25 * static_cast<double>(i);
  }
  const auto fn = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd grad = x;
    grad[corrupted] *= 2.0;
    return std::make_pair(0.5 * x.squaredNorm(), grad);
  };
  const GradCheckReport r = finite_difference_check(fn, params, 1e-6, 1e-6);
  return !r.passed && r.worst_index == corrupted && r.failures.size() == 1;
}

}  // namespace ovo
