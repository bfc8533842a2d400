#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gsnpmle/mixture.hpp"
#include "gsnpmle/rng.hpp"

namespace gsnpmle {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Sorted, pairwise disjoint intervals in theta units.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  /// Throws DomainError unless 0 <= lo < hi < inf and the list is sorted with
  /// positive gaps.
  explicit IntervalUnion(std::vector<Interval> intervals);

  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  double total_length() const;
  bool contains(double theta) const;
  /// True when every interval of this union lies inside `other`.
  bool subset_of(const IntervalUnion& other, double slack = 0.0) const;

 private:
  std::vector<Interval> intervals_;
};

struct CoverageRule {
  double threshold = 0.0;
  double beta = 0.0;
  std::int64_t mc_draws = 0;
  /// sets[x] for x = 0..x_max.
  std::vector<IntervalUnion> sets;
  std::string model_ref;

  std::int64_t x_max() const { return static_cast<std::int64_t>(sets.size()) - 1; }
  /// Set for count x; counts beyond x_max get the empty set.
  const IntervalUnion& set(std::int64_t x) const;
};

/// Short content hash of a model, used to tie a rule to the fit it came from.
std::string model_fingerprint(const GammaMixtureModel& model);

/// Lower beta-quantile (order statistic ceil(beta B)) of pi(theta_b | X_b)
/// over B draws from the model. Requires no mass at infinity.
double estimate_threshold(const GammaMixtureModel& model, double beta, std::int64_t mc_draws, Rng& rng);

/// The theta grid used to locate level-set crossings for count x: 1024
/// cdf-spaced points of each of Gamma(x+kappa, lambda_min+1) and
/// Gamma(x+kappa, lambda_max+1), merged, up to the 1-1e-10 quantile of the
/// former.
std::vector<double> level_set_grid(const GammaMixtureModel& model, std::int64_t x);

/// {theta : pi(theta | x) >= k}. k above the posterior maximum yields an
/// empty union.
IntervalUnion level_set(const GammaMixtureModel& model, std::int64_t x, double k);

/// Threshold plus level sets for x = 0..x_max, where x_max is the 1-1e-8
/// marginal tail cutoff (raised to min_x_max if that is larger).
CoverageRule build_rule(const GammaMixtureModel& model, double beta, std::int64_t mc_draws, Rng& rng,
                        std::int64_t min_x_max = 0);

/// Level sets for a given threshold, skipping the Monte Carlo step.
CoverageRule rule_from_threshold(const GammaMixtureModel& model, double threshold, double beta,
                                 std::int64_t mc_draws, std::int64_t min_x_max = 0);

/// pi(theta | x) >= k by direct density comparison.
bool contains(const GammaMixtureModel& model, double k, std::int64_t x, double theta);

/// Marginal coverage sum_x int 1(theta in set(x)) p_theta(x) g(theta) dtheta of
/// the rule under a Gamma-mixture truth, in closed form through the
/// regularized incomplete gamma function.
double exact_coverage(const CoverageRule& rule, const GammaMixtureModel& truth);

/// Garwood interval (lo, hi) for a Poisson count.
std::pair<double, double> garwood_interval(std::int64_t x, double beta);

/// Per-interval CSV: x,lo,hi,set_length.
void write_rule_csv(const CoverageRule& rule, std::ostream& out);

}  // namespace gsnpmle
