#include <cmath>
#include <limits>

#include "rsteer/embed.hpp"
#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"

namespace rsteer {
namespace {

constexpr int kExaggerationIters = 250;
constexpr double kExaggeration = 12.0;
constexpr double kInitialMomentum = 0.5;
constexpr double kFinalMomentum = 0.8;
constexpr double kEntropyTolerance = 1e-5;
constexpr int kMaxBisection = 200;
constexpr double kMinGain = 0.01;

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * (x * x.transpose())).colwise() + norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

}  // namespace

Eigen::VectorXd calibrate_precisions(const Eigen::MatrixXd& sq_distances, double perplexity) {
  const Eigen::Index n = sq_distances.rows();
  const double target = std::log(perplexity);
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double b = 1.0;
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, sq_distances(i, j));
    }
    for (int iter = 0; iter < kMaxBisection; ++iter) {
      // Shifting by the nearest distance leaves the normalized row unchanged.
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = sq_distances(i, j) - min_d;
        const double p = std::exp(-b * shifted);
        sum += p;
        weighted += shifted * p;
      }
      const double entropy = std::log(sum) + b * weighted / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < kEntropyTolerance) break;
      if (diff > 0.0) {
        lo = b;
        b = std::isinf(hi) ? b * 2.0 : 0.5 * (b + hi);
      } else {
        hi = b;
        b = 0.5 * (b + lo);
      }
    }
    beta[i] = b;
  }
  return beta;
}

Eigen::MatrixXd tsne2(const Eigen::MatrixXd& data, const EmbeddingConfig& config) {
  const Eigen::Index n = data.rows();
  if (!(config.tsne_perplexity > 0.0) || static_cast<double>(n) < 3.0 * config.tsne_perplexity) {
    throw Error("embed", ErrorCode::PerplexityInfeasible,
                "t-SNE needs at least 3 * perplexity points (" + std::to_string(n) + " given)");
  }
  if (config.tsne_iterations < kExaggerationIters) {
    throw Error("embed", ErrorCode::InvalidArgument, "t-SNE needs at least 250 iterations");
  }

  const Eigen::MatrixXd dist = squared_distances(data);
  const Eigen::VectorXd beta = calibrate_precisions(dist, config.tsne_perplexity);

  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, dist(i, j));
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      p(i, j) = j == i ? 0.0 : std::exp(-beta[i] * (dist(i, j) - min_d));
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  Eigen::MatrixXd joint = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  joint = joint.cwiseMax(1e-12);
  joint.diagonal().setZero();

  Rng rng(config.seed);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal(0.0, 1e-4);
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  Eigen::MatrixXd num(n, n);

  for (int iter = 0; iter < config.tsne_iterations; ++iter) {
    const double exaggeration = iter < kExaggerationIters ? kExaggeration : 1.0;
    const double momentum = iter < kExaggerationIters ? kInitialMomentum : kFinalMomentum;

    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double q = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = num(j, i) = q;
        z += 2.0 * q;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (exaggeration * joint(i, j) - num(i, j) / z) * num(i, j);
        gx += w * (y(i, 0) - y(j, 0));
        gy += w * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }

    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
      double& g = gains.data()[k];
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, kMinGain);
      update.data()[k] = momentum * update.data()[k] - config.tsne_learning_rate * g * grad.data()[k];
    }
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

}  // namespace rsteer
