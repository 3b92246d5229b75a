#pragma once

#include <Eigen/Dense>

#include <span>

#include "rsteer/error.hpp"

namespace rsteer {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <typename Scalar>
Eigen::Index common_dimension(std::span<const VectorX<Scalar>> vectors) {
  if (vectors.empty()) {
    throw Error("core", ErrorCode::InvalidArgument, "statistics of an empty vector list");
  }
  const Eigen::Index d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) {
      throw Error("core", ErrorCode::DimensionMismatch, "ragged vector dimensions");
    }
  }
  return d;
}

/// Welford accumulation in double; returns (mean, sum of squared deviations).
template <typename Scalar>
std::pair<Eigen::VectorXd, Eigen::VectorXd> welford(std::span<const VectorX<Scalar>> vectors) {
  const Eigen::Index d = common_dimension(vectors);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(d);
  double n = 0.0;
  for (const auto& v : vectors) {
    n += 1.0;
    const Eigen::VectorXd x = v.template cast<double>();
    const Eigen::VectorXd delta = x - mean;
    mean += delta / n;
    m2.array() += delta.array() * (x - mean).array();
  }
  return {std::move(mean), std::move(m2)};
}

}  // namespace detail

/// Componentwise mean, accumulated in 64-bit regardless of input scalar.
template <typename Scalar>
Eigen::VectorXd mean_vector(std::span<const VectorX<Scalar>> vectors) {
  return detail::welford(vectors).first;
}

/// Componentwise population variance (divisor n).
template <typename Scalar>
Eigen::VectorXd componentwise_variance(std::span<const VectorX<Scalar>> vectors) {
  auto [mean, m2] = detail::welford(vectors);
  return m2 / static_cast<double>(vectors.size());
}

/// Cosine similarity; a zero-norm operand yields 0.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
}

}  // namespace rsteer
