#include "gsnpmle/nnls.hpp"

#include <algorithm>
#include <vector>

#include "gsnpmle/errors.hpp"

namespace gsnpmle {
namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<int>& passive) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t k = 0; k < passive.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(passive[k]);
  return sub.colPivHouseholderQr().solve(b);
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);
  // Columns whose entry was immediately reverted by roundoff; never re-enter.
  std::vector<bool> excluded(static_cast<std::size_t>(n), false);
  const int max_outer = 3 * static_cast<int>(n) + 10;

  for (int outer = 0;; ++outer) {
    if (outer > max_outer) throw SolverError("nnls: iteration limit reached");
    const Eigen::VectorXd grad = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_val = tol * std::max(1.0, grad.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (!in_passive[ju] && !excluded[ju] && grad(j) > best_val) {
        best_val = grad(j);
        best = j;
      }
    }
    if (best < 0) break;
    in_passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0;; ++inner) {
      if (inner > max_outer) throw SolverError("nnls: inner iteration limit reached");
      std::vector<int> passive;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (in_passive[static_cast<std::size_t>(j)]) passive.push_back(static_cast<int>(j));
      }
      const Eigen::VectorXd z = solve_passive(a, b, passive);
      if (inner == 0) {
        const auto pos = std::find(passive.begin(), passive.end(), static_cast<int>(best)) - passive.begin();
        if (z(pos) <= 0.0) {
          in_passive[static_cast<std::size_t>(best)] = false;
          excluded[static_cast<std::size_t>(best)] = true;
          break;
        }
      }
      bool feasible = true;
      for (Eigen::Index k = 0; k < z.size(); ++k) feasible = feasible && z(k) > 0.0;
      if (feasible) {
        x.setZero();
        for (std::size_t k = 0; k < passive.size(); ++k) x(passive[k]) = z(static_cast<Eigen::Index>(k));
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) {
          const double xk = x(passive[k]);
          alpha = std::min(alpha, xk / (xk - zk));
        }
      }
      for (std::size_t k = 0; k < passive.size(); ++k) {
        const int j = passive[k];
        x(j) += alpha * (z(static_cast<Eigen::Index>(k)) - x(j));
        if (x(j) <= tol * 1e-3) {
          x(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  return x;
}

}  // namespace gsnpmle
