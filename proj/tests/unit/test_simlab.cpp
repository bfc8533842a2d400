#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/simlab.hpp"

using namespace gsnpmle;

namespace {

const Prior kSettingOne = GammaMixturePrior{{{0.5, 2, 2}, {0.5, 2, 4}}};

double gamma_pdf(double t, double shape, double rate) {
  return std::exp(shape * std::log(rate) + (shape - 1) * std::log(t) - rate * t - std::lgamma(shape));
}

GammaMixtureModel random_model(std::mt19937& gen, double kappa) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> atoms{0.2 + u(gen), 1.5 + 3 * u(gen)};
  const double w = 0.2 + 0.6 * u(gen);
  return GammaMixtureModel(kappa, MixingMeasure{atoms, {w, 1 - w}, 0.0});
}

}  // namespace

TEST_CASE("scenario sampling moments") {
  Rng r(1, 0);
  const auto one = sample_scenario(GammaMixturePrior{{{1.0, 2, 2}}}, 100000, r);
  double m = 0;
  for (double t : one.thetas) m += t;
  CHECK(std::abs(m / 1e5 - 1.0) < 0.02);

  const auto s1 = sample_scenario(kSettingOne, 100000, r);
  double mx = 0;
  for (auto x : s1.counts.counts()) mx += double(x);
  CHECK(std::abs(mx / 1e5 - 0.75) < 0.02);

  const auto ln = sample_scenario(LognormalPrior{0, 1}, 100000, r);
  double s = 0, s2 = 0;
  for (double t : ln.thetas) s += t, s2 += t * t;
  const double mean = s / 1e5, sd = std::sqrt(s2 / 1e5 - mean * mean);
  CHECK(std::abs(mean - std::exp(0.5)) < 3 * sd / std::sqrt(1e5));

  ScenarioSpec spec;
  spec.prior = kSettingOne;
  spec.n = 50;
  spec.base_seed = 9;
  CHECK(sample_scenario(spec, 3).counts.counts() == sample_scenario(spec, 3).counts.counts());
  CHECK(sample_scenario(spec, 3).counts.counts() != sample_scenario(spec, 4).counts.counts());
}

TEST_CASE("prior validation names the field") {
  CHECK_THROWS_WITH_AS(validate_prior(GammaMixturePrior{{{0.5, 2, 2}}}), doctest::Contains("prior.components"), DomainError);
  CHECK_THROWS_AS(validate_prior(LognormalPrior{0, -1}), DomainError);
  CHECK_NOTHROW(validate_prior(IgMixturePrior{{{0.5, 1, 1}, {0.5, 3, 9}}}));
}

TEST_CASE("prior densities integrate to one") {
  for (const Prior& p : {kSettingOne, Prior(LognormalPrior{0, 1}), Prior(IgMixturePrior{{{0.5, 1, 1}, {0.5, 3, 9}}}),
                         Prior(GammaMixturePrior{{{0.75, 3, 1}, {0.25, 3, 10}}})}) {
    const auto ev = density_evaluator(p);
    DensityEvaluator zero;
    zero.density = [](double) { return 0.0; };
    // TV against the zero density is half the total mass
    CHECK(std::abs(2 * tv_prior(ev, zero) - 1.0) < 1e-4);
  }
}

TEST_CASE("tv_prior") {
  const auto g = density_evaluator(kSettingOne);
  CHECK(tv_prior(g, g) < 1e-5);
  const auto a = density_evaluator(Prior(GammaMixturePrior{{{1.0, 400, 400}}}));
  const auto b = density_evaluator(Prior(GammaMixturePrior{{{1.0, 400, 100}}}));
  CHECK(tv_prior(a, b) > 1 - 1e-4);

  const auto g22 = density_evaluator(Prior(GammaMixturePrior{{{1.0, 2, 2}}}));
  const auto g24 = density_evaluator(Prior(GammaMixturePrior{{{1.0, 2, 4}}}));
  // 1e7-point midpoint Riemann sum on (0, 40]
  const int pts = 10000000;
  const double h = 40.0 / pts;
  double riemann = 0;
  for (int i = 0; i < pts; ++i) {
    const double t = (i + 0.5) * h;
    riemann += std::abs(gamma_pdf(t, 2, 2) - gamma_pdf(t, 2, 4)) * h;
  }
  CHECK(std::abs(tv_prior(g22, g24) - 0.5 * riemann) < 1e-4);
  CHECK(std::abs(tv_prior(g22, g24) - tv_prior(g24, g22)) < 1e-9);

  std::mt19937 gen(4);
  for (int rep = 0; rep < 5; ++rep) {
    const auto m1 = density_evaluator(random_model(gen, 2.0));
    const auto m2 = density_evaluator(random_model(gen, 1.5));
    const auto m3 = density_evaluator(random_model(gen, 3.0));
    CHECK(tv_prior(m1, m3) <= tv_prior(m1, m2) + tv_prior(m2, m3) + 1e-4);
  }
}

TEST_CASE("hellinger_sq") {
  const PmfEvaluator p0 = [](std::int64_t x) { return x == 0 ? 1.0 : 0.0; };
  const PmfEvaluator p1 = [](std::int64_t x) { return x == 1 ? 1.0 : 0.0; };
  CHECK(hellinger_sq(p0, p0) == 0.0);
  CHECK(hellinger_sq(p0, p1) == doctest::Approx(1.0));
  const auto a = GammaMixtureModel::single_atom(2.0, 1.0);
  const auto b = GammaMixtureModel::single_atom(2.5, 0.6);
  const PmfEvaluator fa = [&](std::int64_t x) { return a.marginal_pmf(x); };
  const PmfEvaluator fb = [&](std::int64_t x) { return b.marginal_pmf(x); };
  double direct = 0;
  for (int x = 0; x < 10000; ++x) {
    const double pa = std::exp(std::lgamma(x + 2.0) - std::lgamma(x + 1.0) - std::lgamma(2.0) + 2 * std::log(0.5) - x * std::log(2.0));
    const double pb = std::exp(std::lgamma(x + 2.5) - std::lgamma(x + 1.0) - std::lgamma(2.5) + 2.5 * std::log(0.6 / 1.6) -
                               x * std::log(1.6));
    direct += 0.5 * (std::sqrt(pa) - std::sqrt(pb)) * (std::sqrt(pa) - std::sqrt(pb));
  }
  CHECK(std::abs(hellinger_sq(fa, fb) - direct) < 1e-12);
  CHECK(hellinger_sq(fa, fb) == doctest::Approx(hellinger_sq(fb, fa)).epsilon(1e-12));
  // quadrature marginal of the lognormal prior sums to one
  const Prior ln = LognormalPrior{0, 1};
  double total = 0;
  for (int x = 0; x < 1000; ++x) total += prior_marginal_pmf(ln, x);
  CHECK(std::abs(total - 1) < 1e-8);
}

TEST_CASE("wtv") {
  const auto m = GammaMixtureModel(2.0, MixingMeasure{{2.0, 4.0}, {0.5, 0.5}, 0.0});
  CHECK(wtv(m, m) < 1e-4);

  // single atoms: per-x Gamma vs Gamma TV by a Riemann sum
  const auto a = GammaMixtureModel::single_atom(2.0, 1.0);
  const auto b = GammaMixtureModel::single_atom(2.0, 1.5);
  double oracle = 0;
  for (int x = 0; x <= a.tail_cutoff(1e-8) + 0; ++x) {
    const int pts = 200000;
    const double top = 80.0 + 4 * x, h = top / pts;
    double tv = 0;
    for (int i = 0; i < pts; ++i) {
      const double t = (i + 0.5) * h;
      tv += std::abs(gamma_pdf(t, x + 2.0, 2.0) - gamma_pdf(t, x + 2.0, 2.5)) * h;
    }
    oracle += 0.5 * tv * b.marginal_pmf(x);
  }
  // wtv(hat, true) weights by the true marginal
  CHECK(std::abs(wtv(a, b) - oracle) < 1e-4);

  std::mt19937 gen(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto h = random_model(gen, 2.0);
    const auto t = random_model(gen, 2.0);
    double tv_marg = 0;
    for (int x = 0; x < 400; ++x) tv_marg += 0.5 * std::abs(h.marginal_pmf(x) - t.marginal_pmf(x));
    CHECK(wtv(h, t) <= tv_prior(density_evaluator(h), density_evaluator(t)) + tv_marg + 1e-4);
  }
}

TEST_CASE("prediction_rmse") {
  const auto m = GammaMixtureModel::single_atom(1.0, 1.0);  // posterior mean (x + 1) / 2
  CHECK(prediction_rmse(CountSample({1, 3, 5}), {1, 2, 3}, m) == doctest::Approx(0.0));
  CHECK_THROWS_AS(prediction_rmse(CountSample({1, 3}), {1}, m), DomainError);

  // paired seasons from setting (i): posterior mean beats the global mean
  Rng r(21, 0);
  const auto truth = *as_model(kSettingOne);
  std::vector<std::int64_t> x(2000), z(2000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = sample_prior(kSettingOne, r);
    x[i] = sample_poisson(t, r);
    z[i] = sample_poisson(t, r);
  }
  const CountSample train(x);
  double mean = 0;
  for (auto v : x) mean += double(v) / x.size();
  double base = 0;
  for (auto v : z) base += (mean - v) * (mean - v);
  base = std::sqrt(base / z.size());
  CHECK(base >= prediction_rmse(train, z, truth));
}

TEST_CASE("coverage study determinism and OPT vs Garwood pattern") {
  ScenarioSpec spec;
  spec.prior = kSettingOne;
  spec.n = 400;
  spec.reps = 3;
  spec.kappa_rule.kappa = 2.0;
  spec.base_seed = 77;
  spec.mc_draws = 50000;
  const auto a = run_coverage_study(spec);
  const auto b = run_coverage_study(spec);
  REQUIRE(a.replications.size() == 3);
  CHECK(a.failures.empty());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.replications[i].coverage_opt == b.replications[i].coverage_opt);
    CHECK(a.replications[i].length_opt == b.replications[i].length_opt);
  }
  CHECK(a.coverage_garwood.mean >= a.coverage_opt.mean - 0.01);
  CHECK(a.length_garwood.mean >= a.length_opt.mean);
  for (const auto& r : a.replications) {
    CHECK((r.coverage_opt >= 0 && r.coverage_opt <= 1));
    CHECK(r.length_opt >= 0);
  }

  spec.beta = 0.5;
  spec.n = 1000;
  spec.reps = 4;
  const auto half = run_coverage_study(spec);
  CHECK(std::abs(half.coverage_opt.mean - 0.5) < 0.03);

  ScenarioSpec bad = spec;
  bad.beta = 1.5;
  CHECK_THROWS_WITH_AS(run_coverage_study(bad), doctest::Contains("beta"), DomainError);
}

TEST_CASE("rate experiment small run") {
  const auto res = rate_experiment(std::get<GammaMixturePrior>(kSettingOne), 2.0, {128, 1024}, 4, 3);
  CHECK(res.points.size() == 8);
  CHECK(res.slope < 0);
  CHECK(res.mean_tv[1] < res.mean_tv[0]);
}
