#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace ovo {

inline constexpr double kNormFloor = 1e-12;

/// Cosine of the angle between two feature vectors. Throws "degenerate
/// feature" when either norm falls below 1e-12.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na <= kNormFloor || nb <= kNormFloor) {
    throw std::invalid_argument("degenerate feature");
  }
  return a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
}

/// Cosine plus its gradient with respect to `a` (with `b` held fixed).
template <typename DerivedA, typename DerivedB>
double cosine_with_grad(const Eigen::MatrixBase<DerivedA>& a,
                        const Eigen::MatrixBase<DerivedB>& b, Eigen::VectorXd& grad_a) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= kNormFloor || nb <= kNormFloor) {
    throw std::invalid_argument("degenerate feature");
  }
  const double cos = a.dot(b) / (na * nb);
  grad_a = b / (na * nb) - (cos / (na * na)) * a;
  return cos;
}

/// Temperature-scaled softmax with max-subtraction. Throws on an empty
/// score vector or a non-positive temperature.
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& scores, double temperature = 1.0) {
  if (scores.size() == 0) {
    throw std::invalid_argument("softmax of empty score vector");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  Eigen::VectorXd s = scores.template cast<double>() / temperature;
  const double m = s.maxCoeff();
  Eigen::VectorXd e = (s.array() - m).exp();
  return e / e.sum();
}

}  // namespace ovo
