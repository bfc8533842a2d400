#include "gsnpmle/shape_select.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/parallel.hpp"
#include "gsnpmle/simplex_lp.hpp"

namespace gsnpmle {
namespace {

constexpr double kActiveTol = 1e-8;
constexpr double kMonotoneSlack = 1e-9;
const double kLogScoreFloor = std::log(1e-300);

}  // namespace

std::vector<double> default_kappa_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 60; ++i) g.push_back(i / 10.0);
  return g;
}

std::vector<double> default_cv_eta_grid() { return {0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1}; }

void KappaConfig::validate() const {
  if (kappa_grid.empty()) throw DomainError("kappa config: kappa_grid is empty");
  for (std::size_t i = 0; i < kappa_grid.size(); ++i) {
    if (!(kappa_grid[i] > 0.0) || !std::isfinite(kappa_grid[i])) throw DomainError("kappa config: kappa_grid must be positive");
    if (i > 0 && !(kappa_grid[i] > kappa_grid[i - 1])) throw DomainError("kappa config: kappa_grid must be strictly increasing");
  }
  if (atom_grid_size < 1) throw DomainError("kappa config: atom_grid_size must be positive");
  if (cv_folds < 2) throw DomainError("kappa config: cv_folds must be at least 2");
  for (double e : cv_eta_grid) {
    if (!(e > 0.0)) throw DomainError("kappa config: cv_eta_grid entries must be positive");
  }
}

EtaSpec EtaSpec::parse(const std::string& text) {
  EtaSpec spec;
  if (text == "cv") {
    spec.rule = EtaRule::kCv;
    return spec;
  }
  std::string number = text;
  if (text.rfind("dkw:", 0) == 0) {
    spec.rule = EtaRule::kDkw;
    number = text.substr(4);
  }
  std::size_t used = 0;
  try {
    spec.value = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != number.size() || !std::isfinite(spec.value)) {
    throw DomainError("eta must be a positive number, dkw:C or cv (got '" + text + "')");
  }
  if (spec.rule == EtaRule::kFixed && !(spec.value > 0.0)) throw DomainError("eta must be positive");
  if (spec.rule == EtaRule::kDkw && !(spec.value > 1.0 / std::sqrt(2.0))) {
    throw DomainError("dkw constant C must exceed 1/sqrt(2)");
  }
  return spec;
}

std::string to_string(EtaRule rule) {
  switch (rule) {
    case EtaRule::kFixed: return "fixed";
    case EtaRule::kDkw: return "dkw";
    case EtaRule::kCv: return "cv";
  }
  return "fixed";
}

double ks_distance(std::span<const double> f1, std::span<const double> f2) {
  if (f1.size() != f2.size()) throw DomainError("ks_distance: cdfs must share a range");
  double d = 0.0;
  for (std::size_t m = 0; m < f1.size(); ++m) d = std::max(d, std::abs(f1[m] - f2[m]));
  return d;
}

std::vector<double> nb_cdf(double kappa, double lambda, std::int64_t m_max) {
  std::vector<double> out(static_cast<std::size_t>(m_max + 1));
  const double log1p_l = std::log1p(lambda);
  double log_r = kappa * (std::log(lambda) - log1p_l);
  double cum = 0.0;
  for (std::int64_t x = 0; x <= m_max; ++x) {
    cum += std::exp(log_r);
    out[static_cast<std::size_t>(x)] = std::min(cum, 1.0);
    const double xd = static_cast<double>(x);
    log_r += std::log(xd + kappa) - std::log(xd + 1.0) - log1p_l;
  }
  return out;
}

std::vector<double> ks_atom_grid(const CountSample& sample, double kappa, int size) {
  if (sample.empty()) throw DomainError("ks_atom_grid: empty sample");
  const auto xmax = sample.max_count();
  const double lo = xmax > 0 ? kappa / static_cast<double>(xmax) : kappa;
  const double hi = std::min(1e6, 10.0 * kappa * static_cast<double>(sample.size()));
  if (size == 1 || !(hi > lo)) return {lo};
  std::vector<double> g(static_cast<std::size_t>(size));
  const double step = (std::log(hi) - std::log(lo)) / (size - 1);
  for (int j = 0; j < size; ++j) g[static_cast<std::size_t>(j)] = std::exp(std::log(lo) + step * j);
  g.front() = lo;
  g.back() = hi;
  return g;
}

KsFit min_ks_fit(const CountSample& sample, double kappa, std::span<const double> atoms) {
  if (atoms.empty()) throw DomainError("min_ks_fit: atom list is empty");
  if (sample.empty()) throw DomainError("min_ks_fit: empty sample");
  const std::int64_t mmax = sample.max_count();
  const auto rows = static_cast<Eigen::Index>(mmax + 1);
  const auto na = static_cast<Eigen::Index>(atoms.size());
  const auto fn = sample.empirical_cdf_table();

  Eigen::MatrixXd cdf(rows, na);
  for (Eigen::Index j = 0; j < na; ++j) {
    const auto c = nb_cdf(kappa, atoms[static_cast<std::size_t>(j)], mmax);
    for (Eigen::Index m = 0; m < rows; ++m) cdf(m, j) = c[static_cast<std::size_t>(m)];
  }

  // Variables (w_1..w_J, t).
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Zero(na + 1);
  lp.c(na) = 1.0;
  lp.a_ub = Eigen::MatrixXd::Zero(2 * rows, na + 1);
  lp.b_ub.resize(2 * rows);
  for (Eigen::Index m = 0; m < rows; ++m) {
    lp.a_ub.row(m).head(na) = cdf.row(m);
    lp.a_ub(m, na) = -1.0;
    lp.b_ub(m) = fn[static_cast<std::size_t>(m)];
    lp.a_ub.row(rows + m).head(na) = -cdf.row(m);
    lp.a_ub(rows + m, na) = -1.0;
    lp.b_ub(rows + m) = -fn[static_cast<std::size_t>(m)];
  }
  lp.a_eq = Eigen::MatrixXd::Zero(1, na + 1);
  lp.a_eq.row(0).head(na).setOnes();
  lp.b_eq = Eigen::VectorXd::Ones(1);

  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::kOptimal) {
    throw SolverError("min_ks_fit: simplex did not reach optimality (status " +
                      std::to_string(static_cast<int>(sol.status)) + ", pivots " + std::to_string(sol.pivots) + ")");
  }
  KsFit fit;
  fit.weights.assign(sol.x.data(), sol.x.data() + na);
  const double total = std::accumulate(fit.weights.begin(), fit.weights.end(), 0.0);
  for (double& w : fit.weights) w /= total;
  // delta recomputed from the normalized weights
  double delta = 0.0;
  std::vector<double> gaps(static_cast<std::size_t>(rows));
  for (Eigen::Index m = 0; m < rows; ++m) {
    double fm = 0.0;
    for (Eigen::Index j = 0; j < na; ++j) fm += fit.weights[static_cast<std::size_t>(j)] * cdf(m, j);
    gaps[static_cast<std::size_t>(m)] = std::abs(fm - fn[static_cast<std::size_t>(m)]);
    delta = std::max(delta, gaps[static_cast<std::size_t>(m)]);
  }
  fit.delta = delta;
  for (double g : gaps) fit.active_constraints += std::abs(g - delta) <= kActiveTol;
  fit.dual_residual = sol.dual_residual;
  fit.primal_residual = sol.primal_residual;
  return fit;
}

KappaProfile kappa_profile(const CountSample& sample, const KappaConfig& config) {
  config.validate();
  if (sample.empty()) throw DomainError("kappa_profile: empty sample");
  KappaProfile p;
  p.kappas = config.kappa_grid;
  p.raw_delta.resize(p.kappas.size());
  parallel_for(p.kappas.size(), [&](std::size_t i) {
    const auto atoms = ks_atom_grid(sample, p.kappas[i], config.atom_grid_size);
    p.raw_delta[i] = min_ks_fit(sample, p.kappas[i], atoms).delta;
  });
  p.delta = p.raw_delta;
  for (std::size_t i = 1; i < p.delta.size(); ++i) {
    const double rise = p.raw_delta[i] - p.delta[i - 1];
    if (rise > kMonotoneSlack) {
      ++p.monotonicity_violations;
      p.max_violation = std::max(p.max_violation, rise);
    }
    p.delta[i] = std::min(p.delta[i], p.delta[i - 1]);
  }
  return p;
}

KappaEstimate select_kappa(const KappaProfile& profile, double eta) {
  if (!(eta > 0.0)) throw DomainError("select_kappa: eta must be positive");
  if (profile.kappas.empty()) throw DomainError("select_kappa: empty profile");
  KappaEstimate est;
  est.eta = eta;
  est.profile = profile;
  // delta is nonincreasing, so the qualifying set is a suffix of the grid.
  const auto it = std::partition_point(profile.delta.begin(), profile.delta.end(), [&](double d) { return d > eta; });
  if (it == profile.delta.end()) {
    est.kappa_hat = profile.kappas.back();
    est.fallback = true;
  } else {
    est.kappa_hat = profile.kappas[static_cast<std::size_t>(it - profile.delta.begin())];
  }
  return est;
}

double estimate_kappa(const CountSample& sample, double eta, const KappaConfig& config) {
  return select_kappa(kappa_profile(sample, config), eta).kappa_hat;
}

double dkw_eta(double n, double c) {
  if (!(c > 1.0 / std::sqrt(2.0))) throw DomainError("dkw_eta: C must exceed 1/sqrt(2)");
  if (!(n > 1.0)) throw DomainError("dkw_eta: n must exceed 1");
  return c * std::sqrt(std::log(n) / n);
}

CvResult cross_validate_eta(const CountSample& sample, const KappaConfig& config, Rng& rng) {
  config.validate();
  if (config.cv_eta_grid.empty()) throw DomainError("cv_select_eta: candidate grid is empty");
  const std::size_t n = sample.size();
  const auto folds = static_cast<std::size_t>(config.cv_folds);
  if (n < folds) throw DomainError("cv_select_eta: fewer observations than folds");

  // Seeded fold assignment: shuffle indices, then deal them round-robin.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::size_t>> train(folds), held(folds);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t f = pos % folds;
    for (std::size_t g = 0; g < folds; ++g) (g == f ? held[g] : train[g]).push_back(order[pos]);
  }

  const std::size_t ne = config.cv_eta_grid.size();
  std::vector<std::vector<double>> fold_scores(folds, std::vector<double>(ne));
  parallel_for(folds, [&](std::size_t f) {
    const CountSample tr = sample.subset(train[f]);
    const auto profile = kappa_profile(tr, config);
    std::map<double, GammaMixtureModel> fits;
    for (std::size_t e = 0; e < ne; ++e) {
      const double kappa = select_kappa(profile, config.cv_eta_grid[e]).kappa_hat;
      auto it = fits.find(kappa);
      if (it == fits.end()) it = fits.emplace(kappa, fit_npmle(tr, kappa).model).first;
      double s = 0.0;
      for (std::size_t i : held[f]) s += std::max(it->second.log_marginal_pmf(sample.counts()[i]), kLogScoreFloor);
      fold_scores[f][e] = s / static_cast<double>(held[f].size());
    }
  });

  CvResult res;
  res.scores.assign(ne, 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t f = 0; f < folds; ++f) res.scores[e] += fold_scores[f][e];
    res.scores[e] /= static_cast<double>(folds);
  }
  // Best mean score; exact ties go to the larger radius.
  std::size_t best = 0;
  for (std::size_t e = 1; e < ne; ++e) {
    const double a = res.scores[e], b = res.scores[best];
    if (a > b || (a == b && config.cv_eta_grid[e] > config.cv_eta_grid[best])) best = e;
  }
  res.eta = config.cv_eta_grid[best];
  return res;
}

double cv_select_eta(const CountSample& sample, const KappaConfig& config, Rng& rng) {
  return cross_validate_eta(sample, config, rng).eta;
}

KappaEstimate estimate_kappa(const CountSample& sample, const EtaSpec& eta, const KappaConfig& config, Rng& rng) {
  double radius = eta.value;
  if (eta.rule == EtaRule::kDkw) radius = dkw_eta(static_cast<double>(sample.size()), eta.value);
  if (eta.rule == EtaRule::kCv) radius = cv_select_eta(sample, config, rng);
  auto est = select_kappa(kappa_profile(sample, config), radius);
  est.rule = eta.rule;
  return est;
}

}  // namespace gsnpmle
