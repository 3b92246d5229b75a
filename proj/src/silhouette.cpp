#include <map>
#include <set>

#include "rsteer/embed.hpp"
#include "rsteer/error.hpp"

namespace rsteer {

double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (points.rows() != n) throw Error("embed", ErrorCode::InvalidArgument, "one label per point required");
  const std::set<int> clusters(labels.begin(), labels.end());
  if (clusters.size() < 2) throw Error("embed", ErrorCode::SingleCluster, "silhouette needs at least two clusters");

  std::map<int, Eigen::Index> sizes;
  for (int l : labels) ++sizes[l];

  double total = 0.0;
  std::map<int, double> dist_sum;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[own] == 1) continue;  // s(i) = 0 for singletons
    for (int c : clusters) dist_sum[c] = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist_sum[labels[static_cast<std::size_t>(j)]] += (points.row(i) - points.row(j)).norm();
    }
    const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c : clusters) {
      if (c != own) b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace rsteer
