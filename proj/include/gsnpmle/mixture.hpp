#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gsnpmle {

/// Discrete probability measure over Gamma rate parameters, with an optional
/// atom at lambda = infinity (which induces a prior atom at theta = 0).
struct MixingMeasure {
  std::vector<double> atoms;    // strictly increasing, finite, > 0
  std::vector<double> weights;  // >= 0, same length as atoms
  double mass_at_infinity = 0.0;

  /// Throws DomainError unless the invariants hold (total mass 1 within 1e-12).
  void validate() const;

  static MixingMeasure point_mass(double lambda) { return {{lambda}, {1.0}, 0.0}; }
  static MixingMeasure at_infinity() { return {{}, {}, 1.0}; }
};

/// ln r_{kappa,lambda}(x), the negative-binomial kernel obtained by integrating
/// a Poisson(theta) likelihood against Gamma(kappa, lambda). lambda may be
/// +infinity, in which case the kernel is the point mass at x = 0.
double nb_log_kernel(double kappa, double lambda, std::int64_t x);

class GammaMixtureModel;

/// Posterior density pi(. | x) for a fixed count, with the x-dependent
/// normalizer precomputed. Only the finite atoms enter; see
/// GammaMixtureModel::posterior.
class PosteriorDensity {
 public:
  double log_density(double theta) const;
  double density(double theta) const;
  std::int64_t x() const { return x_; }
  /// Shape of every conjugate component: x + kappa.
  double shape() const { return shape_; }

 private:
  friend class GammaMixtureModel;
  PosteriorDensity(const GammaMixtureModel* model, std::int64_t x, double log_const, double shape)
      : model_(model), x_(x), log_const_(log_const), shape_(shape) {}

  const GammaMixtureModel* model_;
  std::int64_t x_;
  double log_const_;
  double shape_;
};

/// theta | lambda ~ Gamma(kappa, lambda), lambda ~ mixing. Immutable.
class GammaMixtureModel {
 public:
  GammaMixtureModel(double kappa, MixingMeasure mixing, std::int64_t n_fit = 0,
                    std::optional<double> loglik = std::nullopt);

  static GammaMixtureModel single_atom(double kappa, double lambda) {
    return GammaMixtureModel(kappa, MixingMeasure::point_mass(lambda));
  }

  double kappa() const { return kappa_; }
  const MixingMeasure& mixing() const { return mixing_; }
  std::int64_t n_fit() const { return n_fit_; }
  const std::optional<double>& loglik() const { return loglik_; }
  double mass_at_infinity() const { return mixing_.mass_at_infinity; }

  /// True when the whole mixing mass sits at infinity.
  bool degenerate_at_infinity() const { return support_.empty(); }

  /// Positive-weight finite atoms (ascending) and their weights.
  std::span<const double> support() const { return support_; }
  std::span<const double> support_weights() const { return support_weights_; }
  double min_support_atom() const;
  double max_support_atom() const;

  double log_marginal_pmf(std::int64_t x) const;
  double marginal_pmf(std::int64_t x) const;
  /// Contribution of the finite atoms only: sum_j w_j r(x | lambda_j).
  double log_finite_marginal_pmf(std::int64_t x) const;

  /// Density of the absolutely continuous part of the prior on theta. The atom
  /// at theta = 0 induced by mass at infinity is not part of it.
  double prior_density(double theta) const;
  double log_prior_density(double theta) const;

  /// ln pi(theta | x), normalized against the finite-atom part of f(x).
  /// Throws EvaluationError if that part vanishes at x.
  double posterior_log_density(double theta, std::int64_t x) const;
  PosteriorDensity posterior(std::int64_t x) const;

  /// Posterior weights of the conjugate components at x: w_j r(x|lambda_j) / f_fin(x).
  std::vector<double> posterior_atom_weights(std::int64_t x) const;

  /// Robbins form (x+1) f(x+1) / f(x). Returns 0 for the degenerate model.
  double posterior_mean(std::int64_t x) const;

  /// Smallest X with sum_{x <= X} f(x) >= 1 - eps.
  std::int64_t tail_cutoff(double eps) const;

  /// theta beyond which every component prior Gamma(kappa, lambda_j) has upper
  /// tail below eps.
  double prior_upper_bound(double eps) const;

 private:
  friend class PosteriorDensity;
  double log_component_sum(double theta) const;

  double kappa_;
  MixingMeasure mixing_;
  std::int64_t n_fit_;
  std::optional<double> loglik_;

  std::vector<double> support_;
  std::vector<double> support_weights_;
  // ln w_j + kappa ln lambda_j for the support atoms.
  std::vector<double> log_scaled_weights_;
  double log_gamma_kappa_;
};

/// Observed counts with cached empirical pmf/cdf. Frequencies are kept as
/// integers so that the empirical cdf reaches exactly 1 at the maximum.
class CountSample {
 public:
  CountSample() = default;
  explicit CountSample(std::vector<std::int64_t> counts);

  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t max_count() const { return max_; }

  std::int64_t frequency(std::int64_t x) const;
  double empirical_pmf(std::int64_t x) const;
  double empirical_cdf(std::int64_t m) const;
  /// Empirical cdf on 0..max_count().
  std::vector<double> empirical_cdf_table() const;

  /// Distinct observed values (ascending) with multiplicities.
  const std::vector<std::pair<std::int64_t, std::int64_t>>& distinct() const { return distinct_; }

  CountSample subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t max_ = 0;
  std::vector<std::int64_t> freq_;        // index 0..max
  std::vector<std::int64_t> cum_freq_;    // index 0..max
  std::vector<std::pair<std::int64_t, std::int64_t>> distinct_;
};

/// Explicit polynomial rate exponent alpha*(L, U) for prior density
/// estimation over P([L, U]).
double alpha_star(double lower, double upper);

}  // namespace gsnpmle
