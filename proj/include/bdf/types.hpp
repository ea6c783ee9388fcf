#pragma once

#include <Eigen/Dense>

namespace bdf {

using Vec3 = Eigen::Vector3d;

/// N x 3 coordinates, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// N x M kernel features; rows are contiguous so per-point kernels stream.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

}  // namespace bdf
