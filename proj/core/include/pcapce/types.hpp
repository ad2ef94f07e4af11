#pragma once

#include <Eigen/Dense>

namespace pcapce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace pcapce
