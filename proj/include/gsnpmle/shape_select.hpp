#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsnpmle/mixture.hpp"
#include "gsnpmle/rng.hpp"

namespace gsnpmle {

std::vector<double> default_kappa_grid();  // 0.1, 0.2, ..., 6.0
std::vector<double> default_cv_eta_grid();

struct KappaConfig {
  std::vector<double> kappa_grid = default_kappa_grid();
  int atom_grid_size = 150;
  int cv_folds = 5;
  std::vector<double> cv_eta_grid = default_cv_eta_grid();

  void validate() const;
};

enum class EtaRule { kFixed, kDkw, kCv };

/// Parsed radius rule: "0.05" (fixed), "dkw:C" or "cv".
struct EtaSpec {
  EtaRule rule = EtaRule::kFixed;
  double value = 0.0;  // eta for kFixed, C for kDkw, unused for kCv

  static EtaSpec parse(const std::string& text);
};

std::string to_string(EtaRule rule);

/// max_m |F1(m) - F2(m)| over the common range.
double ks_distance(std::span<const double> f1, std::span<const double> f2);

/// Cdf of the negative-binomial kernel r_{kappa,lambda} on 0..m_max.
std::vector<double> nb_cdf(double kappa, double lambda, std::int64_t m_max);

struct KsFit {
  std::vector<double> weights;
  double delta = 0.0;
  /// KS constraints within 1e-8 of the optimal radius.
  int active_constraints = 0;
  double dual_residual = 0.0;
  double primal_residual = 0.0;
};

/// 150 (or `size`) log-spaced atoms on [kappa / X_(n), min(10 kappa n, 1e6)].
std::vector<double> ks_atom_grid(const CountSample& sample, double kappa, int size);

/// min t over (t, w in simplex) with |F_w(m) - F_n(m)| <= t for m = 0..X_(n).
KsFit min_ks_fit(const CountSample& sample, double kappa, std::span<const double> atoms);

struct KappaProfile {
  std::vector<double> kappas;
  std::vector<double> raw_delta;
  /// Running minimum of raw_delta along the grid. The model classes are
  /// nested in kappa, so any increase is a discretization artifact.
  std::vector<double> delta;
  int monotonicity_violations = 0;  // raw increases above 1e-9
  double max_violation = 0.0;
};

KappaProfile kappa_profile(const CountSample& sample, const KappaConfig& config);

struct KappaEstimate {
  double kappa_hat = 0.0;
  double eta = 0.0;
  EtaRule rule = EtaRule::kFixed;
  /// No grid kappa reached delta <= eta; kappa_hat is the largest grid value.
  bool fallback = false;
  KappaProfile profile;
};

/// Smallest grid kappa with profile delta <= eta (largest grid value plus the
/// fallback flag when none qualifies).
KappaEstimate select_kappa(const KappaProfile& profile, double eta);

double estimate_kappa(const CountSample& sample, double eta, const KappaConfig& config = {});

/// C sqrt(ln n / n); requires C > 1/sqrt(2).
double dkw_eta(double n, double c);

struct CvResult {
  double eta = 0.0;
  std::vector<double> scores;  // mean held-out log f per cv_eta_grid entry
};

CvResult cross_validate_eta(const CountSample& sample, const KappaConfig& config, Rng& rng);
double cv_select_eta(const CountSample& sample, const KappaConfig& config, Rng& rng);

/// Resolves the radius by the given rule and returns the estimate with its
/// profile.
KappaEstimate estimate_kappa(const CountSample& sample, const EtaSpec& eta, const KappaConfig& config, Rng& rng);

}  // namespace gsnpmle
