#pragma once

#include <Eigen/Dense>

namespace gsnpmle {

/// Lawson-Hanson active-set solver for min ||A x - b||_2 subject to x >= 0.
/// Throws SolverError if the iteration budget (3 * cols) is exhausted.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol = 1e-12);

}  // namespace gsnpmle
