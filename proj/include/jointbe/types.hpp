#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace jointbe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Per-point contact quantities are stored as (normal, tangential 1, tangential 2)
// with tangential 1 along x and tangential 2 along y.
inline constexpr int kNormal = 0;
inline constexpr int kTangent1 = 1;
inline constexpr int kTangent2 = 2;

}  // namespace jointbe
