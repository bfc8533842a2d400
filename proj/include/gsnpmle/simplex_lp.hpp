#pragma once

#include <Eigen/Dense>

namespace gsnpmle {

/// minimize c'x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::kIterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Row multipliers (y_ub <= 0 at optimality for the <= rows).
  Eigen::VectorXd dual_ub;
  Eigen::VectorXd dual_eq;
  /// max(0, -min reduced cost) over structural and slack columns, recomputed
  /// from the original data and the final basis.
  double dual_residual = 0.0;
  /// max violation of the original constraints at x.
  double primal_residual = 0.0;
  int pivots = 0;
};

/// Dense two-phase tableau simplex. Pivoting uses Dantzig's rule and falls
/// back to Bland's rule after a run of degenerate pivots, so it cannot cycle.
LpSolution solve_lp(const LinearProgram& lp, int max_pivots = 100000);

}  // namespace gsnpmle
