#pragma once

#include <Eigen/Dense>

namespace prism {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Mixing matrix H (d x k); columns are the simplex vertices being estimated.
using MixingMatrix = Matrix;

}  // namespace prism
