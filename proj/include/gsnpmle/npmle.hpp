#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsnpmle/mixture.hpp"

namespace gsnpmle {

enum class SolverMethod {
  /// Constrained Newton iterations: each step solves a nonnegative least
  /// squares problem on the support plus the local maxima of the gradient
  /// function, followed by a backtracking line search.
  kConstrainedNewton,
  /// Plain multiplicative fixed point w_j <- w_j * D_j.
  kEm,
};

struct SolverConfig {
  int grid_size = 300;
  std::optional<double> grid_min;  // unset: kappa / max count
  std::optional<double> grid_max;  // unset: max(50, 10 kappa n), clipped to 1e6
  std::optional<bool> allow_infinity_atom;  // unset: any zero count and automatic grid_max
  double tol_gradient = 1e-8;
  int max_iters = 50000;
  double prune_weight = 1e-12;
  /// Compact-support mode: the grid spans [L, U] and the atom at infinity is
  /// disabled.
  std::optional<std::pair<double, double>> support_bounds;
  /// Explicit atom grid; overrides grid_size / grid_min / grid_max.
  std::optional<std::vector<double>> atoms;
  SolverMethod method = SolverMethod::kConstrainedNewton;

  void validate() const;
};

struct FitDiagnostics {
  int iterations = 0;
  double final_gradient_gap = 0.0;
  std::vector<double> loglik_trace_tail;  // mean log-likelihood, last 10 iterations
  int support_size = 0;
  bool converged = false;
  bool infinity_atom_enabled = false;
  /// More atoms than distinct counts + 1 after pruning; informational only.
  bool support_exceeds_distinct_bound = false;
};

struct FitResult {
  GammaMixtureModel model;
  FitDiagnostics diagnostics;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, FitDiagnostics diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const FitDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  FitDiagnostics diagnostics_;
};

/// Log-spaced candidate rate atoms for the NPMLE.
std::vector<double> build_grid(const CountSample& sample, double kappa, const SolverConfig& config);

/// Whether the atom at infinity participates for this sample and config.
bool infinity_atom_enabled(const CountSample& sample, const SolverConfig& config);

/// Maximizes sum_i log f_H(X_i) over mixing measures on the grid.
FitResult fit_npmle(const CountSample& sample, double kappa, const SolverConfig& config = {});

/// max over candidate atoms of (1/n) sum_i r(X_i | lambda) / f(X_i) - 1.
double optimality_gap(const GammaMixtureModel& model, const CountSample& sample, std::span<const double> atoms,
                      bool include_infinity);

/// Convenience form using the grid that `config` induces for this sample.
double optimality_gap(const GammaMixtureModel& model, const CountSample& sample, const SolverConfig& config = {});

/// Mean log-likelihood (1/n) sum_i log f(X_i).
double mean_log_likelihood(const GammaMixtureModel& model, const CountSample& sample);

}  // namespace gsnpmle
