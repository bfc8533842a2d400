#include "gsnpmle/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/special_functions.hpp"

namespace gsnpmle {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void MixingMeasure::validate() const {
  if (atoms.size() != weights.size()) throw DomainError("mixing measure: atoms and weights differ in length");
  if (!(mass_at_infinity >= 0.0) || !std::isfinite(mass_at_infinity)) {
    throw DomainError("mixing measure: mass_at_infinity must be a finite nonnegative number");
  }
  double total = mass_at_infinity;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (!std::isfinite(atoms[j]) || !(atoms[j] > 0.0)) throw DomainError("mixing measure: atoms must be finite and positive");
    if (j > 0 && !(atoms[j] > atoms[j - 1])) throw DomainError("mixing measure: atoms must be strictly increasing");
    if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) throw DomainError("mixing measure: weights must be nonnegative");
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("mixing measure: total mass " + std::to_string(total) + " differs from 1");
  }
}

double nb_log_kernel(double kappa, double lambda, std::int64_t x) {
  if (x < 0) return kNegInf;
  if (std::isinf(lambda)) return x == 0 ? 0.0 : kNegInf;
  const double xd = static_cast<double>(x);
  const double log1p_lambda = std::log1p(lambda);
  return log_gamma(xd + kappa) - log_factorial(xd) - log_gamma(kappa) - xd * log1p_lambda +
         kappa * (std::log(lambda) - log1p_lambda);
}

// ---------------------------------------------------------------------------
// PosteriorDensity

double PosteriorDensity::log_density(double theta) const {
  if (!(theta > 0.0)) return kNegInf;
  return (shape_ - 1.0) * std::log(theta) - theta + model_->log_component_sum(theta) + log_const_;
}

double PosteriorDensity::density(double theta) const { return std::exp(log_density(theta)); }

// ---------------------------------------------------------------------------
// GammaMixtureModel

GammaMixtureModel::GammaMixtureModel(double kappa, MixingMeasure mixing, std::int64_t n_fit,
                                     std::optional<double> loglik)
    : kappa_(kappa), mixing_(std::move(mixing)), n_fit_(n_fit), loglik_(loglik) {
  if (!(kappa_ > 0.0) || !std::isfinite(kappa_)) throw DomainError("model: kappa must be positive");
  if (n_fit_ < 0) throw DomainError("model: n_fit must be nonnegative");
  mixing_.validate();
  for (std::size_t j = 0; j < mixing_.atoms.size(); ++j) {
    if (mixing_.weights[j] > 0.0) {
      support_.push_back(mixing_.atoms[j]);
      support_weights_.push_back(mixing_.weights[j]);
      log_scaled_weights_.push_back(std::log(mixing_.weights[j]) + kappa_ * std::log(mixing_.atoms[j]));
    }
  }
  log_gamma_kappa_ = log_gamma(kappa_);
}

double GammaMixtureModel::min_support_atom() const {
  if (support_.empty()) throw EvaluationError("model has no finite atoms");
  return support_.front();
}

double GammaMixtureModel::max_support_atom() const {
  if (support_.empty()) throw EvaluationError("model has no finite atoms");
  return support_.back();
}

double GammaMixtureModel::log_component_sum(double theta) const {
  double mx = kNegInf;
  for (std::size_t j = 0; j < support_.size(); ++j) mx = std::max(mx, log_scaled_weights_[j] - support_[j] * theta);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (std::size_t j = 0; j < support_.size(); ++j) sum += std::exp(log_scaled_weights_[j] - support_[j] * theta - mx);
  return mx + std::log(sum);
}

double GammaMixtureModel::log_finite_marginal_pmf(std::int64_t x) const {
  if (x < 0 || support_.empty()) return kNegInf;
  // Shared part of the kernel, then the atom-dependent terms.
  const double xd = static_cast<double>(x);
  const double base = log_gamma(xd + kappa_) - log_factorial(xd) - log_gamma_kappa_;
  double mx = kNegInf;
  std::vector<double> terms(support_.size());
  for (std::size_t j = 0; j < support_.size(); ++j) {
    const double l1p = std::log1p(support_[j]);
    terms[j] = std::log(support_weights_[j]) - xd * l1p + kappa_ * (std::log(support_[j]) - l1p);
    mx = std::max(mx, terms[j]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - mx);
  return base + mx + std::log(sum);
}

double GammaMixtureModel::log_marginal_pmf(std::int64_t x) const {
  if (x < 0) return kNegInf;
  const double finite = log_finite_marginal_pmf(x);
  if (x != 0 || mixing_.mass_at_infinity == 0.0) return finite;
  const double inf_term = std::log(mixing_.mass_at_infinity);
  const double pair[2] = {finite, inf_term};
  return log_sum_exp(pair, pair + 2);
}

double GammaMixtureModel::marginal_pmf(std::int64_t x) const { return std::exp(log_marginal_pmf(x)); }

double GammaMixtureModel::log_prior_density(double theta) const {
  if (!(theta > 0.0) || support_.empty()) return kNegInf;
  return (kappa_ - 1.0) * std::log(theta) + log_component_sum(theta) - log_gamma_kappa_;
}

double GammaMixtureModel::prior_density(double theta) const { return std::exp(log_prior_density(theta)); }

PosteriorDensity GammaMixtureModel::posterior(std::int64_t x) const {
  const double lf = log_finite_marginal_pmf(x);
  if (!std::isfinite(lf)) {
    throw EvaluationError("posterior density undefined: finite-atom marginal vanishes at x = " + std::to_string(x));
  }
  const double xd = static_cast<double>(x);
  const double log_const = -log_factorial(xd) - log_gamma_kappa_ - lf;
  return PosteriorDensity(this, x, log_const, xd + kappa_);
}

double GammaMixtureModel::posterior_log_density(double theta, std::int64_t x) const {
  return posterior(x).log_density(theta);
}

std::vector<double> GammaMixtureModel::posterior_atom_weights(std::int64_t x) const {
  std::vector<double> out(support_.size());
  const double lf = log_finite_marginal_pmf(x);
  if (!std::isfinite(lf)) throw EvaluationError("posterior weights undefined at x = " + std::to_string(x));
  for (std::size_t j = 0; j < support_.size(); ++j) {
    out[j] = std::exp(std::log(support_weights_[j]) + nb_log_kernel(kappa_, support_[j], x) - lf);
  }
  return out;
}

double GammaMixtureModel::posterior_mean(std::int64_t x) const {
  if (x < 0) throw DomainError("posterior_mean: negative count");
  if (degenerate_at_infinity()) return 0.0;
  const double lf = log_marginal_pmf(x);
  if (!std::isfinite(lf)) throw EvaluationError("posterior_mean: f(x) = 0 at x = " + std::to_string(x));
  const double lf_next = log_marginal_pmf(x + 1);
  if (!std::isfinite(lf_next)) return 0.0;
  return std::exp(std::log(static_cast<double>(x) + 1.0) + lf_next - lf);
}

std::int64_t GammaMixtureModel::tail_cutoff(double eps) const {
  if (!(eps > 0.0) || eps >= 1.0) throw DomainError("tail_cutoff: eps must lie in (0, 1)");
  constexpr std::int64_t kMaxCount = 50'000'000;
  const double target = 1.0 - eps;
  if (support_.empty()) return 0;

  // Kernel recurrence r(x+1) = r(x) (x + kappa) / ((x + 1)(lambda + 1)), in logs.
  std::vector<double> log_terms(support_.size());
  std::vector<double> log1p_atoms(support_.size());
  for (std::size_t j = 0; j < support_.size(); ++j) {
    log1p_atoms[j] = std::log1p(support_[j]);
    log_terms[j] = std::log(support_weights_[j]) + kappa_ * (std::log(support_[j]) - log1p_atoms[j]);
  }
  double cumulative = mixing_.mass_at_infinity;
  double compensation = 0.0;
  for (std::int64_t x = 0; x <= kMaxCount; ++x) {
    double fx = 0.0;
    for (double t : log_terms) fx += std::exp(t);
    // Kahan summation keeps the running total accurate over long tails.
    const double y = fx - compensation;
    const double t = cumulative + y;
    compensation = (t - cumulative) - y;
    cumulative = t;
    if (cumulative >= target) return x;
    const double xd = static_cast<double>(x);
    const double step = std::log(xd + kappa_) - std::log(xd + 1.0);
    for (std::size_t j = 0; j < log_terms.size(); ++j) log_terms[j] += step - log1p_atoms[j];
  }
  throw EvaluationError("tail_cutoff: marginal tail too heavy");
}

double GammaMixtureModel::prior_upper_bound(double eps) const {
  if (support_.empty()) return 0.0;
  return gamma_upper_quantile(eps, kappa_) / support_.front();
}

// ---------------------------------------------------------------------------
// CountSample

CountSample::CountSample(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] < 0) throw DomainError("count sample: negative count at index " + std::to_string(i));
  }
  if (counts_.empty()) return;
  max_ = *std::max_element(counts_.begin(), counts_.end());
  freq_.assign(static_cast<std::size_t>(max_) + 1, 0);
  for (auto c : counts_) ++freq_[static_cast<std::size_t>(c)];
  cum_freq_.resize(freq_.size());
  std::partial_sum(freq_.begin(), freq_.end(), cum_freq_.begin());
  for (std::size_t x = 0; x < freq_.size(); ++x) {
    if (freq_[x] > 0) distinct_.emplace_back(static_cast<std::int64_t>(x), freq_[x]);
  }
}

std::int64_t CountSample::frequency(std::int64_t x) const {
  if (x < 0 || x > max_ || counts_.empty()) return 0;
  return freq_[static_cast<std::size_t>(x)];
}

double CountSample::empirical_pmf(std::int64_t x) const {
  if (counts_.empty()) throw DomainError("empirical pmf of an empty sample");
  return static_cast<double>(frequency(x)) / static_cast<double>(counts_.size());
}

double CountSample::empirical_cdf(std::int64_t m) const {
  if (counts_.empty()) throw DomainError("empirical cdf of an empty sample");
  if (m < 0) return 0.0;
  if (m >= max_) return 1.0;
  return static_cast<double>(cum_freq_[static_cast<std::size_t>(m)]) / static_cast<double>(counts_.size());
}

std::vector<double> CountSample::empirical_cdf_table() const {
  std::vector<double> out(cum_freq_.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = empirical_cdf(static_cast<std::int64_t>(m));
  return out;
}

CountSample CountSample::subset(std::span<const std::size_t> indices) const {
  std::vector<std::int64_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(counts_.at(i));
  return CountSample(std::move(out));
}

double alpha_star(double lower, double upper) {
  if (!(lower > 0.0) || !(upper > lower) || !std::isfinite(upper)) {
    throw DomainError("alpha_star: requires 0 < L < U < infinity");
  }
  const double width = upper - lower;
  const double tau =
      std::min(0.25, std::exp(1.0) * lower * (1.0 + lower) / (4.0 * width * (1.0 + lower + upper)));
  const double log_inv_rho = tau * std::log(2.0);
  const double log_b = (4.0 + 3.0 * lower + 3.0 * upper + 2.0 * lower * upper) / width;
  return log_inv_rho / (2.0 * (log_b + log_inv_rho));
}

}  // namespace gsnpmle
