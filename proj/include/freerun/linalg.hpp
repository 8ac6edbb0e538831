#pragma once

#include <Eigen/Dense>

namespace freerun {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
/// Jacobians are stored one residual per row so each sample's derivatives are contiguous.
using JacobianMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace freerun
