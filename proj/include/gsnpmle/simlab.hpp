#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "gsnpmle/mixture.hpp"
#include "gsnpmle/rng.hpp"
#include "gsnpmle/shape_select.hpp"

namespace gsnpmle {

struct GammaComponent {
  double weight;
  double shape;
  double rate;
};
struct IgComponent {
  double weight;
  double mu;
  double lam;
};
struct GammaMixturePrior {
  std::vector<GammaComponent> components;
};
struct LognormalPrior {
  double mu = 0.0;
  double sigma = 1.0;
};
struct IgMixturePrior {
  std::vector<IgComponent> components;
};
using Prior = std::variant<GammaMixturePrior, LognormalPrior, IgMixturePrior>;

/// Throws DomainError naming the offending field.
void validate_prior(const Prior& prior);
double sample_prior(const Prior& prior, Rng& rng);
double prior_density(const Prior& prior, double theta);
/// Theta beyond which the prior has mass below eps.
double prior_tail_point(const Prior& prior, double eps);
/// Marginal pmf of X under the prior: closed form for Gamma mixtures,
/// quadrature otherwise.
double prior_marginal_pmf(const Prior& prior, std::int64_t x);

/// The Gamma-mixture prior as a model when every component has the same shape.
std::optional<GammaMixtureModel> as_model(const Prior& prior);

/// A density on (0, inf) together with a point beyond which its mass is
/// below 1e-8 and optional interior breakpoints for quadrature.
struct DensityEvaluator {
  std::function<double(double)> density;
  double upper = 0.0;
  std::vector<double> breakpoints;
};
DensityEvaluator density_evaluator(const Prior& prior);
DensityEvaluator density_evaluator(const GammaMixtureModel& model);

/// 1/2 int |g1 - g2| over (0, max(upper1, upper2)], absolute tolerance 1e-5.
double tv_prior(const DensityEvaluator& g1, const DensityEvaluator& g2);

/// sum_x TV(posterior_hat(.|x), posterior_true(.|x)) f_true(x), x up to the
/// 1-1e-8 tail cutoff of f_true.
double wtv(const GammaMixtureModel& model_hat, const GammaMixtureModel& model_true);

using PmfEvaluator = std::function<double(std::int64_t)>;
/// 1/2 sum_x (sqrt f1 - sqrt f2)^2, summed until both cumulative masses reach
/// 1 - 1e-12.
double hellinger_sq(const PmfEvaluator& f1, const PmfEvaluator& f2);

struct KappaRule {
  enum class Kind { kFixed, kNeighborhood } kind = Kind::kFixed;
  double kappa = 1.0;
  EtaSpec eta;
  KappaConfig config;
};

struct ScenarioSpec {
  std::string name = "scenario";
  Prior prior;
  std::int64_t n = 1000;
  double beta = 0.05;
  int reps = 1;
  KappaRule kappa_rule;
  std::uint64_t base_seed = 0;
  std::int64_t mc_draws = 200000;
  /// Also compute hellinger_sq and tv_prior per replication.
  bool metrics = false;

  void validate() const;
};

struct ReplicationResult {
  int rep_id = 0;
  double coverage_opt = 0.0;
  double length_opt = 0.0;
  double coverage_garwood = 0.0;
  double length_garwood = 0.0;
  double kappa_hat = 0.0;
  std::optional<double> hellinger_sq;
  std::optional<double> tv_prior;
};

struct ReplicationFailure {
  int rep_id = 0;
  std::string error;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
};

struct StudyResult {
  std::vector<ReplicationResult> replications;  // ordered by rep_id
  std::vector<ReplicationFailure> failures;
  Summary coverage_opt, length_opt, coverage_garwood, length_garwood, kappa_hat;
};

struct ScenarioDraw {
  std::vector<double> thetas;
  CountSample counts;
};

/// theta_i from the prior, X_i | theta_i ~ Poisson; stream (base_seed, rep_id).
ScenarioDraw sample_scenario(const ScenarioSpec& spec, int rep_id);
ScenarioDraw sample_scenario(const Prior& prior, std::int64_t n, Rng& rng);

ReplicationResult run_replication(const ScenarioSpec& spec, int rep_id);
StudyResult run_coverage_study(const ScenarioSpec& spec);

struct RatePoint {
  std::int64_t n = 0;
  int rep = 0;
  double tv = 0.0;
};
struct RateResult {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::int64_t> n_values;
  std::vector<double> mean_tv;  // per n_values entry
  std::vector<RatePoint> points;
};

/// TV(g_hat, g_true) across sample sizes with unconstrained NPMLE fits, and
/// the least-squares slope of ln TV on ln n.
RateResult rate_experiment(const GammaMixturePrior& prior, double kappa, const std::vector<std::int64_t>& n_list,
                           int reps, std::uint64_t base_seed);

/// sqrt(mean (posterior_mean(model, X_i) - Z_i)^2).
double prediction_rmse(const CountSample& train, const std::vector<std::int64_t>& future,
                       const GammaMixtureModel& model);

void write_replications_csv(const StudyResult& result, std::ostream& out);
void write_aggregate_csv(const StudyResult& result, std::ostream& out);
void write_failures_csv(const StudyResult& result, std::ostream& out);
void write_rates_csv(const RateResult& result, std::ostream& out);

}  // namespace gsnpmle
