#pragma once

#include <Eigen/Core>

#include <functional>
#include <utility>
#include <vector>

namespace ovo {

/// Callback contract: given a parameter vector, return the loss value and
/// the analytic gradient at that point.
using LossWithGrad = std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct GradCheckEntry {
  Eigen::Index index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  std::vector<GradCheckEntry> failures;
};

/// Central finite differences per parameter against the analytic gradient.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). Requires h in (0, 1e-3].
GradCheckReport finite_difference_check(const LossWithGrad& loss_fn,
                                        const Eigen::VectorXd& params, double h, double tol);

}  // namespace ovo
