#include "gsnpmle/simplex_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gsnpmle/errors.hpp"

namespace gsnpmle {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr int kDegenerateRunForBland = 50;

struct Tableau {
  Eigen::MatrixXd t;  // rows x (cols + 1); last column is the rhs
  std::vector<Eigen::Index> basis;
  Eigen::Index cols = 0;

  void pivot(Eigen::Index r, Eigen::Index c) {
    t.row(r) /= t(r, c);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
  }
};

// Runs the simplex on `tab` for the cost vector restricted to columns for
// which `allowed` holds. Returns kOptimal, kUnbounded or kIterationLimit.
LpStatus optimize(Tableau& tab, const Eigen::VectorXd& cost, const std::vector<bool>& allowed, int& pivots,
                  int max_pivots) {
  const Eigen::Index m = tab.t.rows();
  const Eigen::Index n = tab.cols;
  int degenerate_run = 0;
  while (pivots < max_pivots) {
    // reduced costs d_j = c_j - c_B' B^{-1} A_j, read from the tableau
    Eigen::VectorXd cb(m);
    for (Eigen::Index i = 0; i < m; ++i) cb(i) = cost(tab.basis[static_cast<std::size_t>(i)]);
    const Eigen::RowVectorXd z = cb.transpose() * tab.t.leftCols(n);
    const bool bland = degenerate_run >= kDegenerateRunForBland;
    Eigen::Index enter = -1;
    double best = -kCostTol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!allowed[static_cast<std::size_t>(j)]) continue;
      const double d = cost(j) - z(j);
      if (d < best) {
        enter = j;
        if (bland) break;
        best = d;
      }
    }
    if (enter < 0) return LpStatus::kOptimal;

    Eigen::Index leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = tab.t(i, enter);
      if (a <= kPivotTol) continue;
      const double r = tab.t(i, n) / a;
      if (leave < 0 || r < ratio - 1e-14) {
        ratio = r;
        leave = i;
      } else if (r <= ratio + 1e-14 &&
                 tab.basis[static_cast<std::size_t>(i)] < tab.basis[static_cast<std::size_t>(leave)]) {
        leave = i;
      }
    }
    if (leave < 0) return LpStatus::kUnbounded;
    degenerate_run = ratio <= 1e-14 ? degenerate_run + 1 : 0;
    tab.pivot(leave, enter);
    // clamp tiny negative rhs produced by roundoff
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab.t(i, n) < 0.0 && tab.t(i, n) > -1e-12) tab.t(i, n) = 0.0;
    }
    ++pivots;
  }
  return LpStatus::kIterationLimit;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, int max_pivots) {
  const Eigen::Index nv = lp.c.size();
  const Eigen::Index mu = lp.a_ub.rows();
  const Eigen::Index me = lp.a_eq.rows();
  if ((mu > 0 && (lp.a_ub.cols() != nv || lp.b_ub.size() != mu)) ||
      (me > 0 && (lp.a_eq.cols() != nv || lp.b_eq.size() != me))) {
    throw DomainError("solve_lp: inconsistent dimensions");
  }
  const Eigen::Index m = mu + me;
  // Columns: structural | slacks (one per <= row) | artificials (one per row).
  const Eigen::Index n_struct = nv + mu;
  const Eigen::Index n_total = n_struct + m;

  // Constraint matrix with slacks, before any sign flip.
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, n_struct);
  Eigen::VectorXd rhs(m);
  if (mu > 0) {
    k.topLeftCorner(mu, nv) = lp.a_ub;
    k.block(0, nv, mu, mu).setIdentity();
    rhs.head(mu) = lp.b_ub;
  }
  if (me > 0) {
    k.bottomLeftCorner(me, nv) = lp.a_eq;
    rhs.tail(me) = lp.b_eq;
  }

  Tableau tab;
  tab.cols = n_total;
  tab.t = Eigen::MatrixXd::Zero(m, n_total + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = rhs(i) < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(n_struct) = sign * k.row(i);
    tab.t(i, n_total) = sign * rhs(i);
    // A <= row with nonnegative rhs starts with its slack basic; every other
    // row gets an artificial.
    if (i < mu && sign > 0.0) {
      tab.basis[static_cast<std::size_t>(i)] = nv + i;
    } else {
      tab.t(i, n_struct + i) = 1.0;
      tab.basis[static_cast<std::size_t>(i)] = n_struct + i;
    }
  }

  LpSolution sol;
  int pivots = 0;

  // Phase 1: minimize the sum of artificials.
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n_total);
  phase1_cost.tail(m).setOnes();
  std::vector<bool> all(static_cast<std::size_t>(n_total), true);
  LpStatus st = optimize(tab, phase1_cost, all, pivots, max_pivots);
  sol.pivots = pivots;
  if (st == LpStatus::kIterationLimit) {
    sol.status = st;
    return sol;
  }
  double infeas = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis[static_cast<std::size_t>(i)] >= n_struct) infeas += tab.t(i, n_total);
  }
  if (infeas > 1e-9) {
    sol.status = LpStatus::kInfeasible;
    return sol;
  }
  // Drive remaining (zero-level) artificials out of the basis; rows where
  // that is impossible are redundant and dropped.
  std::vector<Eigen::Index> keep_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis[static_cast<std::size_t>(i)] >= n_struct) {
      Eigen::Index c = -1;
      double best = kPivotTol;
      for (Eigen::Index j = 0; j < n_struct; ++j) {
        if (std::abs(tab.t(i, j)) > best) best = std::abs(tab.t(i, j)), c = j;
      }
      if (c >= 0) {
        tab.pivot(i, c);
        ++pivots;
      } else {
        continue;
      }
    }
    keep_rows.push_back(i);
  }
  if (static_cast<Eigen::Index>(keep_rows.size()) < m) {
    Tableau reduced;
    reduced.cols = n_total;
    reduced.t.resize(static_cast<Eigen::Index>(keep_rows.size()), n_total + 1);
    for (std::size_t r = 0; r < keep_rows.size(); ++r) {
      reduced.t.row(static_cast<Eigen::Index>(r)) = tab.t.row(keep_rows[r]);
      reduced.basis.push_back(tab.basis[static_cast<std::size_t>(keep_rows[r])]);
    }
    tab = std::move(reduced);
  }

  // Phase 2 on the structural and slack columns.
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_total);
  cost.head(nv) = lp.c;
  std::vector<bool> structural(static_cast<std::size_t>(n_total), false);
  std::fill(structural.begin(), structural.begin() + n_struct, true);
  st = optimize(tab, cost, structural, pivots, max_pivots);
  sol.pivots = pivots;
  sol.status = st;
  if (st != LpStatus::kOptimal) return sol;

  Eigen::VectorXd full = Eigen::VectorXd::Zero(n_struct);
  for (Eigen::Index i = 0; i < tab.t.rows(); ++i) {
    const Eigen::Index b = tab.basis[static_cast<std::size_t>(i)];
    if (b < n_struct) full(b) = std::max(0.0, tab.t(i, n_total));
  }
  sol.x = full.head(nv);
  sol.objective = lp.c.dot(sol.x);

  // Certificate: duals from B' y = c_B on the original rows, then reduced costs.
  Eigen::MatrixXd bmat(m, static_cast<Eigen::Index>(keep_rows.size()));
  Eigen::VectorXd cb(static_cast<Eigen::Index>(keep_rows.size()));
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    const Eigen::Index b = tab.basis[r];
    bmat.col(static_cast<Eigen::Index>(r)) = k.col(b);
    cb(static_cast<Eigen::Index>(r)) = b < nv ? lp.c(b) : 0.0;
  }
  const Eigen::VectorXd y = bmat.transpose().colPivHouseholderQr().solve(cb);
  Eigen::VectorXd full_cost = Eigen::VectorXd::Zero(n_struct);
  full_cost.head(nv) = lp.c;
  const Eigen::VectorXd reduced = full_cost - k.transpose() * y;
  sol.dual_residual = std::max(0.0, -reduced.minCoeff());
  sol.dual_ub = y.head(mu);
  sol.dual_eq = y.tail(me);

  double viol = 0.0;
  if (mu > 0) viol = std::max(viol, (lp.a_ub * sol.x - lp.b_ub).maxCoeff());
  if (me > 0) viol = std::max(viol, (lp.a_eq * sol.x - lp.b_eq).cwiseAbs().maxCoeff());
  sol.primal_residual = std::max(0.0, viol);
  return sol;
}

}  // namespace gsnpmle
