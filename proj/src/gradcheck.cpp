#include "ovo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovo {

GradCheckReport finite_difference_check(const LossWithGrad& loss_fn,
                                        const Eigen::VectorXd& params, double h, double tol) {
  if (!(h > 0.0) || h > 1e-3) {
    throw std::invalid_argument("finite-difference step must lie in (0, 1e-3]");
  }
  const auto [loss, analytic] = loss_fn(params);
  (void)loss;
  if (analytic.size() != params.size()) {
    throw std::invalid_argument("analytic gradient size does not match parameters");
  }

  GradCheckReport report;
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double plus = loss_fn(probe).first;
    probe[i] = original - h;
    const double minus = loss_fn(probe).first;
    probe[i] = original;

    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    if (rel > tol) {
      report.failures.push_back({i, analytic[i], numeric, rel});
    }
  }
  report.passed = report.failures.empty();
  return report;
}

}  // namespace ovo
