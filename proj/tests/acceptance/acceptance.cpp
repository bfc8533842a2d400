// End-to-end acceptance checks. Prints one line per criterion and exits
// nonzero when any criterion fails.
//
//   acceptance [--smoke] [criterion ...]
//
// --smoke swaps criterion 1 for its 20-replication variant.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsnpmle/coverage.hpp"
#include "gsnpmle/format.hpp"
#include "gsnpmle/io.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/shape_select.hpp"
#include "gsnpmle/simlab.hpp"
#include "oracles.hpp"

using namespace gsnpmle;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

const GammaMixturePrior kSettingOne{{{0.5, 2, 2}, {0.5, 2, 4}}};

CountSample draw(const Prior& prior, std::int64_t n, std::uint64_t seed, int rep) {
  Rng rng(seed, stream_for(static_cast<std::uint64_t>(rep), StreamPurpose::kData));
  return sample_scenario(prior, n, rng).counts;
}

Outcome study_gamma_mixture(bool smoke) {
  ScenarioSpec spec;
  spec.name = "setting-i";
  spec.prior = kSettingOne;
  spec.n = 1000;
  spec.beta = 0.05;
  spec.reps = smoke ? 20 : 100;
  spec.kappa_rule.kappa = 2.0;
  spec.base_seed = 20240101;
  const StudyResult r = run_coverage_study(spec);
  const double cov_tol = smoke ? 0.03 : 0.02;
  const double len_tol = smoke ? 0.15 * 1.654 : 0.17;
  const double glen_tol = smoke ? 0.15 * 4.920 : 0.25;
  const bool ok = r.failures.empty() && within(r.coverage_opt.mean, 0.951, cov_tol) &&
                  within(r.length_opt.mean, 1.654, len_tol) && r.coverage_garwood.mean >= 0.97 &&
                  within(r.length_garwood.mean, 4.920, glen_tol);
  std::ostringstream d;
  d << (smoke ? "smoke, " : "") << spec.reps << " reps: OPT coverage " << fmt(r.coverage_opt.mean) << " (0.951 +/- "
    << cov_tol << "), OPT length " << fmt(r.length_opt.mean) << " (1.654 +/- " << fmt(len_tol, 3)
    << "), Garwood coverage " << fmt(r.coverage_garwood.mean) << " (>= 0.97), Garwood length "
    << fmt(r.length_garwood.mean) << " (4.920 +/- " << fmt(glen_tol, 3) << "), failed reps " << r.failures.size();
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome study_lognormal() {
  ScenarioSpec spec;
  spec.name = "setting-iii";
  spec.prior = LognormalPrior{0.0, 1.0};
  spec.n = 1000;
  spec.beta = 0.05;
  spec.reps = 50;
  spec.kappa_rule.kind = KappaRule::Kind::kNeighborhood;
  spec.kappa_rule.eta = EtaSpec::parse("cv");
  spec.base_seed = 20240303;
  const StudyResult r = run_coverage_study(spec);
  const bool ok =
      r.failures.empty() && within(r.coverage_opt.mean, 0.947, 0.025) && within(r.length_opt.mean, 3.073, 0.35);
  std::ostringstream d;
  d << "50 reps, cv-selected kappa (mean " << fmt(r.kappa_hat.mean, 3) << "): OPT coverage "
    << fmt(r.coverage_opt.mean) << " (0.947 +/- 0.025), OPT length " << fmt(r.length_opt.mean)
    << " (3.073 +/- 0.35), failed reps " << r.failures.size();
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome rate_slope() {
  const std::vector<std::int64_t> ns{128, 256, 512, 1024, 2048};
  const RateResult r = rate_experiment(kSettingOne, 2.0, ns, 30, 20240505);
  bool decreasing = true;
  for (std::size_t i = 1; i < r.mean_tv.size(); ++i) decreasing = decreasing && r.mean_tv[i] < r.mean_tv[i - 1];
  const bool ok = r.slope >= -0.40 && r.slope <= -0.15 && decreasing;
  std::ostringstream d;
  d << "slope " << fmt(r.slope) << " (in [-0.40, -0.15]); mean TV by n:";
  for (std::size_t i = 0; i < ns.size(); ++i) d << ' ' << ns[i] << '=' << fmt(r.mean_tv[i]);
  d << (decreasing ? " (strictly decreasing)" : " (NOT strictly decreasing)");
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome self_consistency() {
  const std::vector<GammaMixtureModel> models{
      GammaMixtureModel(2.0, MixingMeasure{{2.0, 4.0}, {0.5, 0.5}, 0.0}),
      GammaMixtureModel(0.5, MixingMeasure{{0.3}, {1.0}, 0.0}),
      GammaMixtureModel(1.0, MixingMeasure{{0.1, 1.0, 5.0}, {0.3, 0.4, 0.3}, 0.0}),
      GammaMixtureModel(3.5, MixingMeasure{{0.5, 2.0}, {0.6, 0.4}, 0.0}),
      GammaMixtureModel(1.5, MixingMeasure{{0.05, 0.8}, {0.2, 0.8}, 0.0}),
  };
  bool ok = true;
  std::ostringstream d;
  d << "beta 0.05, mc 2e5, |coverage - 0.95| <= 0.01:";
  for (std::size_t i = 0; i < models.size(); ++i) {
    Rng rng(20240707, i);
    const CoverageRule rule = build_rule(models[i], 0.05, 200000, rng);
    const double c = exact_coverage(rule, models[i]);
    ok = ok && within(c, 0.95, 0.01);
    d << ' ' << fmt(c);
  }
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome npmle_brute_force() {
  std::mt19937 gen(20240909);
  std::uniform_int_distribution<int> nx(3, 8), cx(0, 8);
  std::uniform_real_distribution<double> la(-2, 2), ka(0.5, 4);
  double worst_w = 0, worst_gap = -1e300;
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<std::int64_t> xs(nx(gen));
    for (auto& x : xs) x = cx(gen);
    std::vector<double> atoms(3);
    for (auto& a : atoms) a = std::exp(la(gen));
    std::sort(atoms.begin(), atoms.end());
    const double kappa = ka(gen);
    SolverConfig cfg;
    cfg.atoms = atoms;
    const CountSample s(xs);
    const FitResult fit = fit_npmle(s, kappa, cfg);
    const auto& mix = fit.model.mixing();
    std::vector<double> w(3, 0.0);
    for (std::size_t k = 0; k < mix.atoms.size(); ++k) {
      for (int j = 0; j < 3; ++j) {
        if (mix.atoms[k] == atoms[j]) w[j] = mix.weights[k];
      }
    }
    const auto ref = oracle::npmle_weights(xs, kappa, atoms);
    for (int j = 0; j < 3; ++j) worst_w = std::max(worst_w, std::abs(w[j] - ref[j]));
    worst_gap = std::max(worst_gap, optimality_gap(fit.model, s, cfg));
  }
  const bool ok = worst_w <= 5e-3 && worst_gap <= 1e-8;
  return {ok ? Status::kPass : Status::kFail, "10 instances: max weight deviation " + fmt(worst_w, 5) +
                                                  " (<= 5e-3), max optimality gap " + format_double(worst_gap) +
                                                  " (<= 1e-8)"};
}

Outcome lp_oracle() {
  std::mt19937 gen(20241111);
  std::uniform_int_distribution<int> nx(2, 8), cx(0, 6), na(1, 3);
  std::uniform_real_distribution<double> la(-2, 2), ka(0.3, 4);
  double worst = 0, worst_dual = 0;
  int min_active = 1 << 30;
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<std::int64_t> xs(nx(gen));
    for (auto& x : xs) x = cx(gen);
    std::vector<double> atoms(na(gen));
    for (auto& a : atoms) a = std::exp(la(gen));
    std::sort(atoms.begin(), atoms.end());
    const double kappa = ka(gen);
    const KsFit f = min_ks_fit(CountSample(xs), kappa, atoms);
    worst = std::max(worst, std::abs(f.delta - oracle::ks_delta(xs, kappa, atoms)));
    worst_dual = std::max(worst_dual, f.dual_residual);
    min_active = std::min(min_active, f.active_constraints);
  }
  const bool ok = worst <= 2e-3 && min_active >= 1 && worst_dual <= 1e-8;
  return {ok ? Status::kPass : Status::kFail, "10 instances: max |delta - oracle| " + fmt(worst, 6) +
                                                  " (<= 2e-3), min active constraints " + std::to_string(min_active) +
                                                  ", max dual residual " + format_double(worst_dual)};
}

Outcome kappa_direction() {
  const double eta = dkw_eta(1000, 0.75);
  int below = 0, above = 0;
  const int reps = 50;
  std::vector<double> hats;
  for (int rep = 0; rep < reps; ++rep) {
    const CountSample s = draw(kSettingOne, 1000, 20241313, rep);
    const double k = estimate_kappa(s, eta, KappaConfig{});
    hats.push_back(k);
    below += k <= 2.0;
    above += k >= 0.5;
  }
  std::sort(hats.begin(), hats.end());
  const bool ok = below >= 45 && above >= 45;
  std::ostringstream d;
  d << "eta " << fmt(eta, 6) << ", 50 reps: kappa_hat <= 2 in " << below << ", >= 0.5 in " << above
    << " (need 45 each); quartiles " << fmt(hats[12], 2) << ' ' << fmt(hats[25], 2) << ' ' << fmt(hats[37], 2);
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome hellinger_direction() {
  const std::vector<std::int64_t> ns{500, 2000, 8000};
  const Prior prior = kSettingOne;
  const PmfEvaluator truth = [&](std::int64_t x) { return prior_marginal_pmf(prior, x); };
  std::vector<double> medians;
  for (auto n : ns) {
    std::vector<double> h;
    for (int rep = 0; rep < 20; ++rep) {
      const CountSample s = draw(prior, n, 20241515 + static_cast<std::uint64_t>(n), rep);
      const FitResult fit = fit_npmle(s, 2.0);
      const GammaMixtureModel& m = fit.model;
      h.push_back(hellinger_sq([&](std::int64_t x) { return m.marginal_pmf(x); }, truth));
    }
    std::sort(h.begin(), h.end());
    medians.push_back(0.5 * (h[9] + h[10]));
  }
  const bool ok = medians[0] > medians[1] && medians[1] > medians[2];
  std::ostringstream d;
  d << "median H^2 over 20 reps:";
  for (std::size_t i = 0; i < ns.size(); ++i) d << " n=" << ns[i] << ' ' << format_double(medians[i]);
  return {ok ? Status::kPass : Status::kFail, d.str()};
}

Outcome property_suites() {
#ifdef GSNPMLE_UNIT_TESTS_PATH
  const std::string cmd = std::string("\"") + GSNPMLE_UNIT_TESTS_PATH + "\" --minimal > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return {rc == 0 ? Status::kPass : Status::kFail,
          std::string("unit and property suites ") + (rc == 0 ? "passed" : "FAILED (run unit_tests for details)")};
#else
  return {Status::kSkip, "unit test binary not configured"};
#endif
}

Outcome nhl() {
  const char* path = std::getenv("GSNPMLE_NHL_DATA");
  if (path == nullptr || *path == '\0') return {Status::kSkip, "set GSNPMLE_NHL_DATA to a CSV with columns x, z"};
  const char* cols = std::getenv("GSNPMLE_NHL_COLUMNS");
  std::string past = "x", future = "z";
  if (cols != nullptr) {
    std::string c(cols);
    const auto comma = c.find(',');
    if (comma != std::string::npos) past = c.substr(0, comma), future = c.substr(comma + 1);
  }
  const CountSample train(read_counts(path, past));
  const std::vector<std::int64_t> z = read_counts(path, future);
  if (z.size() != train.size()) return {Status::kFail, "column lengths differ"};
  Rng folds(0, stream_for(0, StreamPurpose::kFolds));
  const KappaEstimate est = estimate_kappa(train, EtaSpec::parse("cv"), KappaConfig{}, folds);
  SolverConfig cfg;
  cfg.allow_infinity_atom = false;
  const FitResult fit = fit_npmle(train, est.kappa_hat, cfg);
  const double rmse = prediction_rmse(train, z, fit.model);
  Rng thr(0, stream_for(0, StreamPurpose::kThreshold));
  const CoverageRule rule = build_rule(fit.model, 0.05, 200000, thr, train.max_count());
  double opt = 0, gar = 0;
  for (auto x : train.counts()) {
    opt += rule.set(x).total_length();
    const auto [lo, hi] = garwood_interval(x, 0.05);
    gar += hi - lo;
  }
  opt /= static_cast<double>(train.size());
  gar /= static_cast<double>(train.size());
  const bool ok = within(rmse, 6.048, 0.05) && opt < gar;
  return {ok ? Status::kPass : Status::kFail, "n " + std::to_string(train.size()) + ", kappa_hat " +
                                                  fmt(est.kappa_hat, 2) + ": RMSE " + fmt(rmse) +
                                                  " (6.048 +/- 0.05), mean length OPT " + fmt(opt, 3) +
                                                  " vs Garwood " + fmt(gar, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  bool smoke = false;
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--smoke") {
      smoke = true;
    } else {
      try {
        wanted.insert(std::stoi(a));
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [--smoke] [criterion ...]\n";
        return 1;
      }
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"coverage study, gamma mixture prior", [&] { return study_gamma_mixture(smoke); }},
      {"coverage study, lognormal prior, neighborhood kappa", study_lognormal},
      {"TV rate slope", rate_slope},
      {"self-consistency coverage", self_consistency},
      {"NPMLE brute-force equivalence", npmle_brute_force},
      {"KS LP oracle equivalence", lp_oracle},
      {"kappa-hat direction", kappa_direction},
      {"Hellinger direction", hellinger_direction},
      {"property suites", property_suites},
      {"NHL prediction and lengths", nhl},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    failures += o.status == Status::kFail;
    std::cout << "criterion " << id << " " << tag << " [" << criteria[i].first << "] " << o.detail << " ("
              << fmt(secs, 1) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
