#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsteer/query_type.hpp"

namespace rsteer {

enum class EmbeddingMethod { PCA, TSNE };

struct EmbeddingConfig {
  EmbeddingMethod method = EmbeddingMethod::TSNE;
  double tsne_perplexity = 30.0;
  int tsne_iterations = 1000;
  double tsne_learning_rate = 200.0;
  std::uint64_t seed = 0;
};

struct EmbeddedPoint {
  std::string query_id;
  QueryType label = QueryType::NonConflict;
  std::string role;
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

struct PcaResult {
  Eigen::MatrixXd points;      // n x 2
  Eigen::Vector2d explained;   // fraction of total variance per component
  Eigen::MatrixXd components;  // d x 2, unit columns
  Eigen::VectorXd mean;
};

/// Projection of the rows of `data` onto the two leading principal axes.
/// Each axis is oriented so its largest-magnitude entry is positive.
/// Throws RankZero when all rows coincide.
PcaResult pca2(const Eigen::MatrixXd& data);

/// Exact O(n^2) t-SNE to two dimensions.
Eigen::MatrixXd tsne2(const Eigen::MatrixXd& data, const EmbeddingConfig& config);

/// Per-row Gaussian precisions (1 / (2 sigma^2)) matching `perplexity` to
/// within 1e-5 in entropy (nats). Exposed for tests.
Eigen::VectorXd calibrate_precisions(const Eigen::MatrixXd& sq_distances, double perplexity);

/// Mean silhouette with Euclidean distance; singleton clusters score 0.
double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels);

std::string scatter_svg(std::span<const EmbeddedPoint> points);
void emit_scatter_svg(std::span<const EmbeddedPoint> points, const std::filesystem::path& path);

/// query_id,label,role,series,x,y
std::string points_csv(std::span<const EmbeddedPoint> points);

}  // namespace rsteer
