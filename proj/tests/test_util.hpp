#ifndef MICROSTAT_TEST_UTIL_HPP
#define MICROSTAT_TEST_UTIL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace testutil {

// Orthogonal Procrustes (rotation/reflection + translation, no scaling):
// RMSE between X aligned onto Y.
inline double procrustes_rmse(const std::vector<double> &x,
                              const std::vector<double> &y, std::size_t n,
                              std::size_t k) {
  Eigen::MatrixXd X(n, k), Y(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      X(i, j) = x[i * k + j];
      Y(i, j) = y[i * k + j];
    }
  X.rowwise() -= X.colwise().mean();
  Y.rowwise() -= Y.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      X.transpose() * Y, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd r = svd.matrixU() * svd.matrixV().transpose();
  const double err = (X * r - Y).squaredNorm();
  return std::sqrt(err / static_cast<double>(n * k));
}

} // namespace testutil

#endif
