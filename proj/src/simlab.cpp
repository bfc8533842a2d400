#include "gsnpmle/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gsnpmle/coverage.hpp"
#include "gsnpmle/errors.hpp"
#include "gsnpmle/format.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/parallel.hpp"
#include "gsnpmle/quadrature.hpp"
#include "gsnpmle/special_functions.hpp"

namespace gsnpmle {
namespace {

constexpr double kDensityTail = 1e-8;
constexpr double kTvTol = 1e-5;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_weights(double total, const char* field) {
  if (std::abs(total - 1.0) > 1e-12) throw DomainError(std::string(field) + ": component weights must sum to 1");
}

template <class Comp>
std::size_t pick_component(const std::vector<Comp>& comps, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    acc += comps[i].weight;
    if (u < acc) return i;
  }
  return comps.size() - 1;
}

double ig_cdf(double x, double mu, double lam) {
  const double s = std::sqrt(lam / x);
  const double a = normal_cdf(s * (x / mu - 1.0));
  const double z = -s * (x / mu + 1.0);
  const double b = std::exp(2.0 * lam / mu + std::log(std::max(normal_cdf(z), 1e-300)));
  return std::min(1.0, a + (normal_cdf(z) > 0.0 ? b : 0.0));
}

double ig_density(double x, double mu, double lam) {
  return std::sqrt(lam / (2.0 * std::numbers::pi * x * x * x)) * std::exp(-lam * (x - mu) * (x - mu) / (2.0 * mu * mu * x));
}

double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - log_gamma(shape);
}

// Breakpoints 0, upper 2^-40, ..., upper/2, plus extras inside (0, upper), then upper.
std::vector<double> breakpoints_for(double upper, std::vector<double> extra) {
  std::vector<double> br{0.0, upper};
  for (int i = 1; i <= 40; ++i) br.push_back(std::ldexp(upper, -i));
  for (double e : extra) {
    if (e > 0.0 && e < upper) br.push_back(e);
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

// TV between two posterior densities at count x, by quadrature.
double posterior_tv(const GammaMixtureModel& a, const GammaMixtureModel& b, std::int64_t x) {
  const auto pa = a.posterior(x);
  const auto pb = b.posterior(x);
  const double xd = static_cast<double>(x);
  const double upper = std::max(gamma_upper_quantile(1e-10, xd + a.kappa()) / (a.min_support_atom() + 1.0),
                                gamma_upper_quantile(1e-10, xd + b.kappa()) / (b.min_support_atom() + 1.0));
  std::vector<double> modes;
  for (const auto* m : {&a, &b}) {
    for (double l : m->support()) modes.push_back(std::max(xd + m->kappa() - 1.0, 0.0) / (l + 1.0));
  }
  const auto br = breakpoints_for(upper, modes);
  const auto r = integrate_piecewise([&](double t) { return std::abs(pa.density(t) - pb.density(t)); }, br, 1e-7, 20000);
  return std::min(1.0, 0.5 * r.value);
}

}  // namespace

void validate_prior(const Prior& prior) {
  std::visit(Overloaded{
                 [](const GammaMixturePrior& p) {
                   if (p.components.empty()) throw DomainError("prior.components: empty");
                   double t = 0.0;
                   for (const auto& c : p.components) {
                     if (!(c.weight >= 0.0) || !(c.shape > 0.0) || !(c.rate > 0.0) || !std::isfinite(c.shape) ||
                         !std::isfinite(c.rate)) {
                       throw DomainError("prior.components: weight >= 0, shape > 0 and rate > 0 required");
                     }
                     t += c.weight;
                   }
                   check_weights(t, "prior.components");
                 },
                 [](const LognormalPrior& p) {
                   if (!std::isfinite(p.mu) || !(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
                     throw DomainError("prior.sigma: lognormal needs finite mu and sigma > 0");
                   }
                 },
                 [](const IgMixturePrior& p) {
                   if (p.components.empty()) throw DomainError("prior.components: empty");
                   double t = 0.0;
                   for (const auto& c : p.components) {
                     if (!(c.weight >= 0.0) || !(c.mu > 0.0) || !(c.lam > 0.0) || !std::isfinite(c.mu) ||
                         !std::isfinite(c.lam)) {
                       throw DomainError("prior.components: weight >= 0, mu > 0 and lam > 0 required");
                     }
                     t += c.weight;
                   }
                   check_weights(t, "prior.components");
                 },
             },
             prior);
}

double sample_prior(const Prior& prior, Rng& rng) {
  return std::visit(Overloaded{
                        [&](const GammaMixturePrior& p) {
                          const auto& c = p.components[pick_component(p.components, rng)];
                          return sample_gamma(c.shape, c.rate, rng);
                        },
                        [&](const LognormalPrior& p) { return sample_lognormal(p.mu, p.sigma, rng); },
                        [&](const IgMixturePrior& p) {
                          const auto& c = p.components[pick_component(p.components, rng)];
                          return sample_inverse_gaussian(c.mu, c.lam, rng);
                        },
                    },
                    prior);
}

double prior_density(const Prior& prior, double theta) {
  if (!(theta > 0.0)) return 0.0;
  return std::visit(Overloaded{
                        [&](const GammaMixturePrior& p) {
                          double s = 0.0;
                          for (const auto& c : p.components) s += c.weight * std::exp(log_gamma_density(theta, c.shape, c.rate));
                          return s;
                        },
                        [&](const LognormalPrior& p) {
                          const double z = (std::log(theta) - p.mu) / p.sigma;
                          return std::exp(-0.5 * z * z) / (theta * p.sigma * std::sqrt(2.0 * std::numbers::pi));
                        },
                        [&](const IgMixturePrior& p) {
                          double s = 0.0;
                          for (const auto& c : p.components) s += c.weight * ig_density(theta, c.mu, c.lam);
                          return s;
                        },
                    },
                    prior);
}

double prior_tail_point(const Prior& prior, double eps) {
  return std::visit(Overloaded{
                        [&](const GammaMixturePrior& p) {
                          double t = 0.0;
                          for (const auto& c : p.components) t = std::max(t, gamma_upper_quantile(eps, c.shape) / c.rate);
                          return t;
                        },
                        [&](const LognormalPrior& p) { return std::exp(p.mu + p.sigma * normal_quantile(1.0 - eps)); },
                        [&](const IgMixturePrior& p) {
                          double t = 0.0;
                          for (const auto& c : p.components) {
                            double lo = c.mu, hi = 2.0 * c.mu;
                            while (1.0 - ig_cdf(hi, c.mu, c.lam) > eps) hi *= 2.0;
                            for (int i = 0; i < 200 && hi - lo > 1e-10 * hi; ++i) {
                              const double mid = 0.5 * (lo + hi);
                              (1.0 - ig_cdf(mid, c.mu, c.lam) > eps ? lo : hi) = mid;
                            }
                            t = std::max(t, hi);
                          }
                          return t;
                        },
                    },
                    prior);
}

double prior_marginal_pmf(const Prior& prior, std::int64_t x) {
  if (x < 0) return 0.0;
  if (const auto* g = std::get_if<GammaMixturePrior>(&prior)) {
    double s = 0.0;
    for (const auto& c : g->components) s += c.weight * std::exp(nb_log_kernel(c.shape, c.rate, x));
    return s;
  }
  const double xd = static_cast<double>(x);
  const double upper = std::max(prior_tail_point(prior, 1e-14), xd + 40.0 * std::sqrt(xd + 1.0));
  const auto br = breakpoints_for(upper, {xd, 0.5 * xd, 2.0 * xd});
  const auto r = integrate_piecewise(
      [&](double t) { return std::exp(xd * std::log(t) - t - log_factorial(xd)) * prior_density(prior, t); }, br, 1e-14,
      20000);
  return r.value;
}

std::optional<GammaMixtureModel> as_model(const Prior& prior) {
  const auto* g = std::get_if<GammaMixturePrior>(&prior);
  if (!g) return std::nullopt;
  std::vector<std::pair<double, double>> rw;
  for (const auto& c : g->components) {
    if (c.shape != g->components.front().shape) return std::nullopt;
    rw.emplace_back(c.rate, c.weight);
  }
  std::sort(rw.begin(), rw.end());
  MixingMeasure mix;
  for (const auto& [rate, w] : rw) {
    if (!mix.atoms.empty() && mix.atoms.back() == rate) {
      mix.weights.back() += w;
    } else {
      mix.atoms.push_back(rate);
      mix.weights.push_back(w);
    }
  }
  return GammaMixtureModel(g->components.front().shape, std::move(mix));
}

DensityEvaluator density_evaluator(const Prior& prior) {
  DensityEvaluator ev;
  ev.density = [prior](double t) { return prior_density(prior, t); };
  ev.upper = prior_tail_point(prior, kDensityTail);
  std::visit(Overloaded{
                 [&](const GammaMixturePrior& p) {
                   for (const auto& c : p.components) ev.breakpoints.push_back(std::max(c.shape - 1.0, 0.0) / c.rate);
                 },
                 [&](const LognormalPrior& p) { ev.breakpoints.push_back(std::exp(p.mu - p.sigma * p.sigma)); },
                 [&](const IgMixturePrior& p) {
                   for (const auto& c : p.components) ev.breakpoints.push_back(c.mu);
                 },
             },
             prior);
  return ev;
}

DensityEvaluator density_evaluator(const GammaMixtureModel& model) {
  DensityEvaluator ev;
  ev.density = [model](double t) { return model.prior_density(t); };
  ev.upper = model.degenerate_at_infinity() ? 0.0 : model.prior_upper_bound(kDensityTail);
  for (double l : model.support()) ev.breakpoints.push_back(std::max(model.kappa() - 1.0, 0.0) / l + 1.0 / l);
  return ev;
}

double tv_prior(const DensityEvaluator& g1, const DensityEvaluator& g2) {
  const double upper = std::max(g1.upper, g2.upper);
  if (!(upper > 0.0)) return 0.0;
  std::vector<double> extra = g1.breakpoints;
  extra.insert(extra.end(), g2.breakpoints.begin(), g2.breakpoints.end());
  const auto br = breakpoints_for(upper, extra);
  const auto r = integrate_piecewise([&](double t) { return std::abs(g1.density(t) - g2.density(t)); }, br,
                                     kTvTol, 40000);
  return std::clamp(0.5 * r.value, 0.0, 1.0);
}

double wtv(const GammaMixtureModel& model_hat, const GammaMixtureModel& model_true) {
  if (model_hat.mass_at_infinity() > 0.0 || model_true.mass_at_infinity() > 0.0) {
    throw PreconditionError("wtv: models must not carry mass at infinity");
  }
  const std::int64_t x_max = model_true.tail_cutoff(1e-8);
  double total = 0.0;
  for (std::int64_t x = 0; x <= x_max; ++x) {
    total += posterior_tv(model_hat, model_true, x) * model_true.marginal_pmf(x);
  }
  return total;
}

double hellinger_sq(const PmfEvaluator& f1, const PmfEvaluator& f2) {
  constexpr double kTarget = 1.0 - 1e-12;
  constexpr std::int64_t kCap = 10'000'000;
  constexpr int kNegligibleRun = 1000;
  double c1 = 0.0, c2 = 0.0, h = 0.0;
  int negligible = 0;
  for (std::int64_t x = 0; x <= kCap; ++x) {
    const double a = f1(x), b = f2(x);
    c1 += a;
    c2 += b;
    const double d = std::sqrt(a) - std::sqrt(b);
    h += d * d;
    if (c1 >= kTarget && c2 >= kTarget) break;
    negligible = (a < 1e-18 && b < 1e-18) ? negligible + 1 : 0;
    if (negligible >= kNegligibleRun) break;
  }
  return std::clamp(0.5 * h, 0.0, 1.0);
}

void ScenarioSpec::validate() const {
  validate_prior(prior);
  if (n < 1) throw DomainError("n: must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta: must lie in (0, 1)");
  if (reps < 1) throw DomainError("reps: must be positive");
  if (mc_draws < 1) throw DomainError("mc_draws: must be positive");
  if (kappa_rule.kind == KappaRule::Kind::kFixed) {
    if (!(kappa_rule.kappa > 0.0) || !std::isfinite(kappa_rule.kappa)) throw DomainError("kappa_rule.kappa: must be positive");
  } else {
    kappa_rule.config.validate();
  }
}

ScenarioDraw sample_scenario(const Prior& prior, std::int64_t n, Rng& rng) {
  ScenarioDraw d;
  d.thetas.resize(static_cast<std::size_t>(n));
  std::vector<std::int64_t> xs(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < d.thetas.size(); ++i) {
    d.thetas[i] = sample_prior(prior, rng);
    xs[i] = sample_poisson(d.thetas[i], rng);
  }
  d.counts = CountSample(std::move(xs));
  return d;
}

ScenarioDraw sample_scenario(const ScenarioSpec& spec, int rep_id) {
  Rng rng(spec.base_seed, stream_for(static_cast<std::uint64_t>(rep_id), StreamPurpose::kData));
  return sample_scenario(spec.prior, spec.n, rng);
}

ReplicationResult run_replication(const ScenarioSpec& spec, int rep_id) {
  const auto rep = static_cast<std::uint64_t>(rep_id);
  const ScenarioDraw draw = sample_scenario(spec, rep_id);
  const CountSample& sample = draw.counts;

  ReplicationResult out;
  out.rep_id = rep_id;
  if (spec.kappa_rule.kind == KappaRule::Kind::kFixed) {
    out.kappa_hat = spec.kappa_rule.kappa;
  } else {
    Rng folds(spec.base_seed, stream_for(rep, StreamPurpose::kFolds));
    out.kappa_hat = estimate_kappa(sample, spec.kappa_rule.eta, spec.kappa_rule.config, folds).kappa_hat;
  }

  // Coverage sets need a finitely supported mixing measure.
  SolverConfig cfg;
  cfg.allow_infinity_atom = false;
  const auto fit = fit_npmle(sample, out.kappa_hat, cfg);
  const GammaMixtureModel& model = fit.model;

  Rng thr(spec.base_seed, stream_for(rep, StreamPurpose::kThreshold));
  const CoverageRule rule = build_rule(model, spec.beta, spec.mc_draws, thr, sample.max_count());

  const auto& xs = sample.counts();
  const double n = static_cast<double>(xs.size());
  double cov = 0.0, len = 0.0, gcov = 0.0, glen = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cov += contains(model, rule.threshold, xs[i], draw.thetas[i]) ? 1.0 : 0.0;
    len += rule.set(xs[i]).total_length();
    const auto [lo, hi] = garwood_interval(xs[i], spec.beta);
    gcov += (draw.thetas[i] >= lo && draw.thetas[i] <= hi) ? 1.0 : 0.0;
    glen += hi - lo;
  }
  out.coverage_opt = cov / n;
  out.length_opt = len / n;
  out.coverage_garwood = gcov / n;
  out.length_garwood = glen / n;

  if (spec.metrics) {
    out.hellinger_sq = hellinger_sq([&](std::int64_t x) { return model.marginal_pmf(x); },
                                    [&](std::int64_t x) { return prior_marginal_pmf(spec.prior, x); });
    out.tv_prior = tv_prior(density_evaluator(model), density_evaluator(spec.prior));
  }
  return out;
}

StudyResult run_coverage_study(const ScenarioSpec& spec) {
  spec.validate();
  const auto reps = static_cast<std::size_t>(spec.reps);
  std::vector<std::optional<ReplicationResult>> slots(reps);
  std::vector<std::string> errors(reps);
  parallel_for(reps, [&](std::size_t r) {
    try {
      slots[r] = run_replication(spec, static_cast<int>(r));
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  StudyResult res;
  std::vector<double> c, l, gc, gl, k;
  for (std::size_t r = 0; r < reps; ++r) {
    if (!slots[r]) {
      res.failures.push_back({static_cast<int>(r), errors[r]});
      continue;
    }
    const auto& v = *slots[r];
    res.replications.push_back(v);
    c.push_back(v.coverage_opt);
    l.push_back(v.length_opt);
    gc.push_back(v.coverage_garwood);
    gl.push_back(v.length_garwood);
    k.push_back(v.kappa_hat);
  }
  res.coverage_opt = summarize(c);
  res.length_opt = summarize(l);
  res.coverage_garwood = summarize(gc);
  res.length_garwood = summarize(gl);
  res.kappa_hat = summarize(k);
  return res;
}

RateResult rate_experiment(const GammaMixturePrior& prior, double kappa, const std::vector<std::int64_t>& n_list,
                           int reps, std::uint64_t base_seed) {
  validate_prior(prior);
  if (!(kappa > 0.0)) throw DomainError("rate_experiment: kappa must be positive");
  if (reps < 1 || n_list.empty()) throw DomainError("rate_experiment: need reps >= 1 and a nonempty n list");
  for (auto n : n_list) {
    if (n < 2) throw DomainError("rate_experiment: sample sizes must be at least 2");
  }
  const Prior p = prior;
  const DensityEvaluator truth = density_evaluator(p);

  RateResult res;
  res.n_values = n_list;
  const std::size_t total = n_list.size() * static_cast<std::size_t>(reps);
  res.points.resize(total);
  parallel_for(total, [&](std::size_t idx) {
    const std::size_t i = idx / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(idx % static_cast<std::size_t>(reps));
    const std::int64_t n = n_list[i];
    // Seed depends on n only, so adding replications leaves earlier ones unchanged.
    Rng rng(base_seed + static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ULL,
            stream_for(static_cast<std::uint64_t>(rep), StreamPurpose::kData));
    const ScenarioDraw d = sample_scenario(p, n, rng);
    const auto fit = fit_npmle(d.counts, kappa);
    // Measure TV: the atom at theta = 0 from mass at infinity counts in full.
    const double tv = tv_prior(density_evaluator(fit.model), truth) + 0.5 * fit.model.mass_at_infinity();
    res.points[idx] = {n, rep, std::min(tv, 1.0)};
  });

  res.mean_tv.assign(n_list.size(), 0.0);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const auto& pt = res.points[idx];
    res.mean_tv[idx / static_cast<std::size_t>(reps)] += pt.tv / reps;
    const double lx = std::log(static_cast<double>(pt.n)), ly = std::log(pt.tv);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(total);
  const double denom = m * sxx - sx * sx;
  res.slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  res.intercept = (sy - res.slope * sx) / m;
  return res;
}

double prediction_rmse(const CountSample& train, const std::vector<std::int64_t>& future,
                       const GammaMixtureModel& model) {
  if (train.size() != future.size()) throw DomainError("prediction_rmse: train and future lengths differ");
  if (train.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < future.size(); ++i) {
    const double e = model.posterior_mean(train.counts()[i]) - static_cast<double>(future[i]);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(future.size()));
}

void write_replications_csv(const StudyResult& result, std::ostream& out) {
  const bool metrics = !result.replications.empty() && result.replications.front().hellinger_sq.has_value();
  out << "rep_id,coverage_opt,length_opt,coverage_garwood,length_garwood,kappa_hat";
  if (metrics) out << ",hellinger_sq,tv_prior";
  out << '\n';
  for (const auto& r : result.replications) {
    out << r.rep_id << ',' << format_double(r.coverage_opt) << ',' << format_double(r.length_opt) << ','
        << format_double(r.coverage_garwood) << ',' << format_double(r.length_garwood) << ','
        << format_double(r.kappa_hat);
    if (metrics) out << ',' << format_double(r.hellinger_sq.value_or(NAN)) << ',' << format_double(r.tv_prior.value_or(NAN));
    out << '\n';
  }
}

void write_aggregate_csv(const StudyResult& result, std::ostream& out) {
  out << "statistic,coverage_opt,length_opt,coverage_garwood,length_garwood,kappa_hat,reps_ok,reps_failed\n";
  const auto row = [&](const char* name, auto get) {
    out << name;
    for (const Summary* s : {&result.coverage_opt, &result.length_opt, &result.coverage_garwood, &result.length_garwood,
                             &result.kappa_hat}) {
      out << ',' << format_double(get(*s));
    }
    out << ',' << result.replications.size() << ',' << result.failures.size() << '\n';
  };
  row("mean", [](const Summary& s) { return s.mean; });
  row("sd", [](const Summary& s) { return s.sd; });
}

void write_failures_csv(const StudyResult& result, std::ostream& out) {
  out << "rep_id,error\n";
  for (const auto& f : result.failures) {
    std::string msg = f.error;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    out << f.rep_id << ",\"" << msg << "\"\n";
  }
}

void write_rates_csv(const RateResult& result, std::ostream& out) {
  out << "kind,n,rep,value\n";
  for (const auto& p : result.points) out << "tv," << p.n << ',' << p.rep << ',' << format_double(p.tv) << '\n';
  for (std::size_t i = 0; i < result.n_values.size(); ++i) {
    out << "mean_tv," << result.n_values[i] << ",," << format_double(result.mean_tv[i]) << '\n';
  }
  out << "slope,,," << format_double(result.slope) << '\n';
  out << "intercept,,," << format_double(result.intercept) << '\n';
}

}  // namespace gsnpmle
