#include <Eigen/Eigenvalues>

#include "rsteer/embed.hpp"
#include "rsteer/error.hpp"

namespace rsteer {

PcaResult pca2(const Eigen::MatrixXd& data) {
  if (data.rows() < 3 || data.cols() < 2) {
    throw Error("embed", ErrorCode::InvalidArgument, "pca2 needs at least 3 points of dimension >= 2");
  }
  PcaResult out;
  out.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(data.rows());

  const double total = cov.trace();
  if (!(total > 0.0)) throw Error("embed", ErrorCode::RankZero, "all points coincide");

  // Eigenvalues come back in increasing order.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index d = cov.rows();
  out.components.resize(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd axis = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0.0) axis = -axis;
    out.components.col(k) = axis;
    out.explained[k] = std::max(0.0, solver.eigenvalues()[d - 1 - k]) / total;
  }
  out.points = centered * out.components;
  return out;
}

}  // namespace rsteer
