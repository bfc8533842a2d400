#include <doctest.h>

#include <cmath>
#include <vector>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/rng.hpp"
#include "oracles.hpp"

using namespace gsnpmle;

namespace {

std::vector<double> weights_on(const GammaMixtureModel& m, const std::vector<double>& atoms) {
  std::vector<double> w(atoms.size(), 0.0);
  const auto& mix = m.mixing();
  for (std::size_t k = 0; k < mix.atoms.size(); ++k) {
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      if (mix.atoms[k] == atoms[j]) w[j] = mix.weights[k];
    }
  }
  return w;
}

CountSample setting_one(int n, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::vector<std::int64_t> xs(n);
  for (auto& x : xs) x = sample_poisson(sample_gamma(2, rng.uniform() < 0.5 ? 2 : 4, rng), rng);
  return CountSample(std::move(xs));
}

}  // namespace

TEST_CASE("build_grid") {
  CountSample s({0, 3, 10, 2});
  SolverConfig cfg;
  const auto g = build_grid(s, 2.0, cfg);
  CHECK(g.size() == 300);
  CHECK(g.front() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(g.back() == doctest::Approx(80.0));
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(g[j] > g[j - 1]);
  cfg.support_bounds = std::make_pair(1.0 / 3, 1.0);
  const auto c = build_grid(s, 2.0, cfg);
  for (double a : c) CHECK((a >= 1.0 / 3 - 1e-15 && a <= 1.0 + 1e-15));
  CHECK_FALSE(infinity_atom_enabled(s, cfg));
  CHECK(infinity_atom_enabled(s, SolverConfig{}));
  CHECK(build_grid(CountSample({0, 0}), 1.5, SolverConfig{}).front() == 1.5);
  CHECK_THROWS_AS(build_grid(CountSample{}, 1.0, SolverConfig{}), DomainError);
  SolverConfig bad;
  bad.grid_min = 5;
  bad.grid_max = 1;
  CHECK_THROWS_AS(build_grid(s, 1.0, bad), DomainError);
}

TEST_CASE("fit_npmle trivial cases") {
  CountSample s({0, 1, 4});
  SolverConfig one;
  one.atoms = std::vector<double>{0.8};
  const auto fit = fit_npmle(s, 2.0, one);
  REQUIRE(fit.model.mixing().atoms.size() == 1);
  CHECK(fit.model.mixing().weights[0] == 1.0);
  CHECK(std::abs(optimality_gap(fit.model, s, one)) < 1e-14);

  const auto zeros = fit_npmle(CountSample({0, 0, 0}), 2.0);
  CHECK(zeros.model.mass_at_infinity() == 1.0);
  CHECK(zeros.model.degenerate_at_infinity());
}

TEST_CASE("fit_npmle matches a brute-force simplex oracle") {
  const std::vector<std::int64_t> xs{0, 1, 1, 2, 3, 8};
  const std::vector<double> atoms{0.5, 1, 4};
  SolverConfig cfg;
  cfg.atoms = atoms;
  for (auto method : {SolverMethod::kConstrainedNewton, SolverMethod::kEm}) {
    cfg.method = method;
    const auto fit = fit_npmle(CountSample(xs), 2.0, cfg);
    const auto w = weights_on(fit.model, atoms);
    const auto oracle = oracle::npmle_weights(xs, 2.0, atoms);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(w[j] - oracle[j]) < 5e-3);
    CHECK(fit.diagnostics.final_gradient_gap <= 1e-8);
  }
}

TEST_CASE("fit_npmle on setting (i) data") {
  const auto s = setting_one(1000, 5);
  const auto fit = fit_npmle(s, 2.0);
  const auto& d = fit.diagnostics;
  CHECK(d.converged);
  CHECK(d.final_gradient_gap <= 1e-8);
  CHECK(d.final_gradient_gap >= -1e-8);
  CHECK(optimality_gap(fit.model, s) <= 1e-8);
  // monotone trace
  for (std::size_t i = 1; i < d.loglik_trace_tail.size(); ++i) {
    CHECK(d.loglik_trace_tail[i] >= d.loglik_trace_tail[i - 1] - 1e-12);
  }
  // simplex
  double total = fit.model.mass_at_infinity();
  for (double w : fit.model.mixing().weights) {
    CHECK(w >= 0);
    total += w;
  }
  CHECK(std::abs(total - 1) < 1e-12);
  const double ll = mean_log_likelihood(fit.model, s);
  CHECK(std::abs(ll * 1000 - *fit.model.loglik()) < 1e-8);

  // perturbing a converged weight lowers the likelihood
  auto mix = fit.model.mixing();
  mix.weights[0] += 0.01;
  double z = mix.mass_at_infinity;
  for (double w : mix.weights) z += w;
  for (double& w : mix.weights) w /= z;
  mix.mass_at_infinity /= z;
  double t = mix.mass_at_infinity;
  for (double w : mix.weights) t += w;
  mix.weights.back() += 1 - t;
  CHECK(mean_log_likelihood(GammaMixtureModel(2.0, mix), s) < ll);

  // grid refinement stability
  SolverConfig fine;
  fine.grid_size = 600;
  const auto fit2 = fit_npmle(s, 2.0, fine);
  CHECK(std::abs(*fit2.model.loglik() - *fit.model.loglik()) < 1e-6 * 1000);
  CHECK(fit.diagnostics.support_size <= static_cast<int>(s.distinct().size()) + 1);
}

TEST_CASE("EM and constrained Newton agree") {
  const auto s = setting_one(300, 8);
  SolverConfig em;
  em.method = SolverMethod::kEm;
  em.tol_gradient = 1e-5;
  em.max_iters = 200000;
  em.grid_size = 60;
  SolverConfig cnm = em;
  cnm.method = SolverMethod::kConstrainedNewton;
  cnm.tol_gradient = 1e-10;
  const auto a = fit_npmle(s, 2.0, em);
  const auto b = fit_npmle(s, 2.0, cnm);
  CHECK(*b.model.loglik() >= *a.model.loglik() - 1e-9);
  // a gradient gap of tol bounds the total log-likelihood shortfall by n * tol
  CHECK(*a.model.loglik() >= *b.model.loglik() - 300 * 1e-5);
}

TEST_CASE("non-convergence is reported") {
  const auto s = setting_one(300, 9);
  SolverConfig cfg;
  cfg.method = SolverMethod::kEm;
  cfg.max_iters = 3;
  CHECK_THROWS_AS(fit_npmle(s, 2.0, cfg), NonConvergenceError);
}
