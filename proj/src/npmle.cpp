#include "gsnpmle/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/nnls.hpp"
#include "gsnpmle/special_functions.hpp"

namespace gsnpmle {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kTraceTail = 10;
// Weight given to the sum-to-one row appended to the NNLS system.
constexpr double kSimplexRowWeight = 1e3;

// Row-scaled kernel matrix over the distinct counts. Column j < atoms.size()
// is a finite atom; the optional last column is the atom at infinity. Each row
// is divided by its maximum so that large counts do not underflow; the scale
// is carried in row_log_scale and cancels in every ratio r / f.
struct KernelMatrix {
  Eigen::MatrixXd k;
  Eigen::VectorXd prob;  // multiplicity / n per distinct count
  std::vector<double> row_log_scale;
  std::size_t finite_cols = 0;
  bool has_infinity = false;
};

KernelMatrix build_kernel(const CountSample& sample, double kappa, std::span<const double> atoms, bool with_infinity) {
  const auto& distinct = sample.distinct();
  const auto rows = static_cast<Eigen::Index>(distinct.size());
  const auto cols = static_cast<Eigen::Index>(atoms.size() + (with_infinity ? 1 : 0));
  KernelMatrix km;
  km.k.resize(rows, cols);
  km.prob.resize(rows);
  km.row_log_scale.resize(distinct.size());
  km.finite_cols = atoms.size();
  km.has_infinity = with_infinity;

  std::vector<double> log1p_atoms(atoms.size());
  std::vector<double> col_term(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    log1p_atoms[j] = std::log1p(atoms[j]);
    col_term[j] = kappa * (std::log(atoms[j]) - log1p_atoms[j]);
  }
  const double lg_kappa = log_gamma(kappa);
  std::vector<double> row(static_cast<std::size_t>(cols));
  for (Eigen::Index d = 0; d < rows; ++d) {
    const double x = static_cast<double>(distinct[static_cast<std::size_t>(d)].first);
    const double base = log_gamma(x + kappa) - log_factorial(x) - lg_kappa;
    double mx = kNegInf;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      row[j] = base - x * log1p_atoms[j] + col_term[j];
      mx = std::max(mx, row[j]);
    }
    if (with_infinity) {
      row.back() = x == 0.0 ? 0.0 : kNegInf;
      mx = std::max(mx, row.back());
    }
    km.row_log_scale[static_cast<std::size_t>(d)] = mx;
    for (Eigen::Index j = 0; j < cols; ++j) km.k(d, j) = std::exp(row[static_cast<std::size_t>(j)] - mx);
    km.prob(d) = static_cast<double>(distinct[static_cast<std::size_t>(d)].second) / static_cast<double>(sample.size());
  }
  return km;
}

double objective(const KernelMatrix& km, const Eigen::VectorXd& f) {
  double total = 0.0;
  for (Eigen::Index d = 0; d < f.size(); ++d) {
    total += km.prob(d) * (std::log(f(d)) + km.row_log_scale[static_cast<std::size_t>(d)]);
  }
  return total;
}

Eigen::VectorXd gradient(const KernelMatrix& km, const Eigen::VectorXd& f) {
  return km.k.transpose() * km.prob.cwiseQuotient(f);
}

void push_trace(std::vector<double>& trace, double value) {
  trace.push_back(value);
  if (trace.size() > 4 * kTraceTail) trace.erase(trace.begin(), trace.end() - static_cast<std::ptrdiff_t>(kTraceTail));
}

// Local maxima of the gradient over the finite grid (plus the infinity column)
// that exceed one; these are the candidate atoms a Newton step may open.
std::vector<Eigen::Index> gradient_candidates(const KernelMatrix& km, const Eigen::VectorXd& g) {
  std::vector<Eigen::Index> out;
  const auto m = static_cast<Eigen::Index>(km.finite_cols);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (g(j) <= 1.0) continue;
    const double left = j > 0 ? g(j - 1) : kNegInf;
    const double right = j + 1 < m ? g(j + 1) : kNegInf;
    if (g(j) >= left && g(j) >= right) out.push_back(j);
  }
  if (km.has_infinity && g(m) > 1.0) out.push_back(m);
  return out;
}

struct SolverState {
  Eigen::VectorXd w;
  Eigen::VectorXd f;
  double value = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  double gap = 0.0;
  bool converged = false;
};

void run_em(const KernelMatrix& km, const SolverConfig& config, SolverState& st) {
  for (; st.iterations < config.max_iters; ++st.iterations) {
    const Eigen::VectorXd g = gradient(km, st.f);
    st.gap = g.maxCoeff() - 1.0;
    if (st.gap <= config.tol_gradient) {
      st.converged = true;
      return;
    }
    st.w = st.w.cwiseProduct(g);
    st.w /= st.w.sum();
    st.f = km.k * st.w;
    st.value = objective(km, st.f);
    push_trace(st.trace, st.value);
  }
  st.gap = gradient(km, st.f).maxCoeff() - 1.0;
  st.converged = st.gap <= config.tol_gradient;
}

void run_constrained_newton(const KernelMatrix& km, const SolverConfig& config, SolverState& st) {
  const Eigen::Index rows = km.k.rows();
  for (; st.iterations < config.max_iters; ++st.iterations) {
    const Eigen::VectorXd g = gradient(km, st.f);
    st.gap = g.maxCoeff() - 1.0;
    if (st.gap <= config.tol_gradient) {
      st.converged = true;
      return;
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < st.w.size(); ++j) {
      if (st.w(j) > 0.0) active.push_back(j);
    }
    for (Eigen::Index j : gradient_candidates(km, g)) {
      if (st.w(j) == 0.0) active.push_back(j);
    }
    std::sort(active.begin(), active.end());

    // Quadratic model of the log-likelihood around f:
    // min sum_d p_d ((K w)_d / f_d - 2)^2 over w >= 0, with sum(w) = 1 imposed
    // by a heavily weighted extra row.
    const auto na = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd a(rows + 1, na);
    Eigen::VectorXd b(rows + 1);
    for (Eigen::Index d = 0; d < rows; ++d) {
      const double s = std::sqrt(km.prob(d)) / st.f(d);
      for (Eigen::Index c = 0; c < na; ++c) a(d, c) = s * km.k(d, active[static_cast<std::size_t>(c)]);
      b(d) = 2.0 * std::sqrt(km.prob(d));
    }
    a.row(rows).setConstant(kSimplexRowWeight);
    b(rows) = kSimplexRowWeight;
    Eigen::VectorXd sol = nnls(a, b);
    const double mass = sol.sum();
    if (!(mass > 0.0)) break;
    sol /= mass;

    Eigen::VectorXd direction = -st.w;
    for (Eigen::Index c = 0; c < na; ++c) direction(active[static_cast<std::size_t>(c)]) += sol(c);
    const double slope = g.dot(direction);

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial_w;
    Eigen::VectorXd trial_f;
    double trial_value = kNegInf;
    while (step > 1e-12) {
      trial_w = st.w + step * direction;
      trial_w = trial_w.cwiseMax(0.0);
      trial_w /= trial_w.sum();
      trial_f = km.k * trial_w;
      trial_value = (trial_f.array() > 0.0).all() ? objective(km, trial_f) : kNegInf;
      if (trial_value >= st.value + 1e-4 * step * std::max(slope, 0.0) && trial_value >= st.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Fall back to one multiplicative step, which never decreases the objective.
      trial_w = st.w.cwiseProduct(g);
      trial_w /= trial_w.sum();
      trial_f = km.k * trial_w;
      trial_value = objective(km, trial_f);
      if (trial_value < st.value) break;
    }
    st.w = trial_w;
    st.f = trial_f;
    st.value = trial_value;
    push_trace(st.trace, st.value);
  }
  st.gap = gradient(km, st.f).maxCoeff() - 1.0;
  st.converged = st.gap <= config.tol_gradient;
}

}  // namespace

void SolverConfig::validate() const {
  if (atoms) {
    if (atoms->empty()) throw DomainError("solver config: explicit atom grid is empty");
    for (std::size_t j = 0; j < atoms->size(); ++j) {
      if (!((*atoms)[j] > 0.0) || !std::isfinite((*atoms)[j])) throw DomainError("solver config: atoms must be positive");
      if (j > 0 && !((*atoms)[j] > (*atoms)[j - 1])) throw DomainError("solver config: atoms must be increasing");
    }
  }
  if (grid_size < 1) throw DomainError("solver config: grid_size must be positive");
  if (grid_min && !(*grid_min > 0.0)) throw DomainError("solver config: grid_min must be positive");
  if (grid_max && !(*grid_max > 0.0)) throw DomainError("solver config: grid_max must be positive");
  if (grid_min && grid_max && !(*grid_min < *grid_max)) throw DomainError("solver config: grid_min must be below grid_max");
  if (support_bounds && !(support_bounds->first > 0.0 && support_bounds->first < support_bounds->second)) {
    throw DomainError("solver config: support bounds require 0 < L < U");
  }
  if (!(tol_gradient > 0.0)) throw DomainError("solver config: tol_gradient must be positive");
  if (max_iters < 1) throw DomainError("solver config: max_iters must be positive");
  if (!(prune_weight >= 0.0)) throw DomainError("solver config: prune_weight must be nonnegative");
}

std::vector<double> build_grid(const CountSample& sample, double kappa, const SolverConfig& config) {
  if (sample.empty()) throw DomainError("build_grid: empty sample");
  if (!(kappa > 0.0)) throw DomainError("build_grid: kappa must be positive");
  config.validate();
  if (config.atoms) return *config.atoms;

  double lo, hi;
  if (config.support_bounds) {
    lo = config.support_bounds->first;
    hi = config.support_bounds->second;
  } else {
    const auto xmax = sample.max_count();
    lo = config.grid_min.value_or(xmax > 0 ? kappa / static_cast<double>(xmax) : kappa);
    hi = config.grid_max.value_or(
        std::min(1e6, std::max(50.0, 10.0 * kappa * static_cast<double>(sample.size()))));
  }
  const int m = config.grid_size;
  if (m == 1) return {lo};
  if (!(lo < hi)) throw DomainError("build_grid: lower grid end must be below the upper end");
  std::vector<double> grid(static_cast<std::size_t>(m));
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / (m - 1);
  for (int j = 0; j < m; ++j) grid[static_cast<std::size_t>(j)] = std::exp(llo + step * j);
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

bool infinity_atom_enabled(const CountSample& sample, const SolverConfig& config) {
  if (config.support_bounds) return false;
  if (config.allow_infinity_atom) return *config.allow_infinity_atom;
  return sample.frequency(0) > 0 && !config.grid_max && !config.atoms;
}

FitResult fit_npmle(const CountSample& sample, double kappa, const SolverConfig& config) {
  if (sample.empty()) throw DomainError("fit_npmle: empty sample");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("fit_npmle: kappa must be positive");
  const std::vector<double> grid = build_grid(sample, kappa, config);
  const bool with_infinity = infinity_atom_enabled(sample, config);
  const auto n = static_cast<std::int64_t>(sample.size());

  FitDiagnostics diag;
  diag.infinity_atom_enabled = with_infinity;

  if (sample.max_count() == 0 && with_infinity) {
    // All counts zero: the likelihood is maximized by the point mass at infinity.
    diag.converged = true;
    diag.support_size = 1;
    diag.loglik_trace_tail = {0.0};
    return {GammaMixtureModel(kappa, MixingMeasure::at_infinity(), n, 0.0), diag};
  }

  const KernelMatrix km = build_kernel(sample, kappa, grid, with_infinity);
  const Eigen::Index cols = km.k.cols();

  SolverState st;
  if (config.method == SolverMethod::kEm) {
    st.w = Eigen::VectorXd::Constant(cols, 1.0 / static_cast<double>(cols));
  } else {
    // Start from the best single atom with a positive likelihood everywhere.
    Eigen::Index best = -1;
    double best_value = kNegInf;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Eigen::VectorXd col = km.k.col(j);
      if (!(col.array() > 0.0).all()) continue;
      const double v = objective(km, col);
      if (v > best_value) {
        best_value = v;
        best = j;
      }
    }
    if (best < 0) throw SolverError("fit_npmle: no grid atom gives positive likelihood to every count");
    st.w = Eigen::VectorXd::Zero(cols);
    st.w(best) = 1.0;
  }
  st.f = km.k * st.w;
  st.value = objective(km, st.f);
  st.trace.push_back(st.value);

  if (config.method == SolverMethod::kEm) {
    run_em(km, config, st);
  } else {
    run_constrained_newton(km, config, st);
  }

  // Prune negligible weights and renormalize.
  MixingMeasure mixing;
  double kept = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (st.w(j) > config.prune_weight) kept += st.w(j);
  }
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double wj = st.w(static_cast<Eigen::Index>(j));
    if (wj > config.prune_weight) {
      mixing.atoms.push_back(grid[j]);
      mixing.weights.push_back(wj / kept);
    }
  }
  if (with_infinity && st.w(cols - 1) > config.prune_weight) mixing.mass_at_infinity = st.w(cols - 1) / kept;
  // Absorb the last rounding residue so the measure sums to one.
  double total = mixing.mass_at_infinity;
  for (double wj : mixing.weights) total += wj;
  if (!mixing.weights.empty()) {
    auto heaviest = std::max_element(mixing.weights.begin(), mixing.weights.end());
    *heaviest += 1.0 - total;
  } else {
    mixing.mass_at_infinity = 1.0;
  }

  Eigen::VectorXd pruned = Eigen::VectorXd::Zero(cols);
  {
    std::size_t k = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (k < mixing.atoms.size() && mixing.atoms[k] == grid[j]) pruned(static_cast<Eigen::Index>(j)) = mixing.weights[k++];
    }
    if (with_infinity) pruned(cols - 1) = mixing.mass_at_infinity;
  }
  const Eigen::VectorXd final_f = km.k * pruned;
  const double final_value = objective(km, final_f);

  diag.iterations = st.iterations;
  diag.final_gradient_gap = gradient(km, final_f).maxCoeff() - 1.0;
  diag.converged = diag.final_gradient_gap <= config.tol_gradient;
  const auto tail = std::min(st.trace.size(), kTraceTail);
  diag.loglik_trace_tail.assign(st.trace.end() - static_cast<std::ptrdiff_t>(tail), st.trace.end());
  diag.support_size = static_cast<int>(mixing.atoms.size()) + (mixing.mass_at_infinity > 0.0 ? 1 : 0);
  diag.support_exceeds_distinct_bound = diag.support_size > static_cast<int>(sample.distinct().size()) + 1;

  if (!diag.converged && diag.final_gradient_gap > 100.0 * config.tol_gradient) {
    throw NonConvergenceError("fit_npmle: gradient gap " + std::to_string(diag.final_gradient_gap) + " after " +
                                  std::to_string(diag.iterations) + " iterations",
                              diag);
  }
  return {GammaMixtureModel(kappa, std::move(mixing), n, final_value * static_cast<double>(n)), diag};
}

double optimality_gap(const GammaMixtureModel& model, const CountSample& sample, std::span<const double> atoms,
                      bool include_infinity) {
  if (sample.empty()) throw DomainError("optimality_gap: empty sample");
  double best = kNegInf;
  const auto& distinct = sample.distinct();
  std::vector<double> log_f(distinct.size());
  for (std::size_t d = 0; d < distinct.size(); ++d) {
    log_f[d] = model.log_marginal_pmf(distinct[d].first);
    if (!std::isfinite(log_f[d])) return std::numeric_limits<double>::infinity();
  }
  const double n = static_cast<double>(sample.size());
  for (double lambda : atoms) {
    double s = 0.0;
    for (std::size_t d = 0; d < distinct.size(); ++d) {
      s += static_cast<double>(distinct[d].second) / n *
           std::exp(nb_log_kernel(model.kappa(), lambda, distinct[d].first) - log_f[d]);
    }
    best = std::max(best, s);
  }
  if (include_infinity) {
    best = std::max(best, sample.empirical_pmf(0) * std::exp(-model.log_marginal_pmf(0)));
  }
  return best - 1.0;
}

double optimality_gap(const GammaMixtureModel& model, const CountSample& sample, const SolverConfig& config) {
  const auto grid = build_grid(sample, model.kappa(), config);
  return optimality_gap(model, sample, grid, infinity_atom_enabled(sample, config));
}

double mean_log_likelihood(const GammaMixtureModel& model, const CountSample& sample) {
  if (sample.empty()) throw DomainError("mean_log_likelihood: empty sample");
  double total = 0.0;
  for (const auto& [x, mult] : sample.distinct()) total += static_cast<double>(mult) * model.log_marginal_pmf(x);
  return total / static_cast<double>(sample.size());
}

}  // namespace gsnpmle
