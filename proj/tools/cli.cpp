#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gsnpmle/coverage.hpp"
#include "gsnpmle/errors.hpp"
#include "gsnpmle/format.hpp"
#include "gsnpmle/io.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/shape_select.hpp"
#include "gsnpmle/simlab.hpp"

namespace gsnpmle::cli {
namespace {

// Raised for flag values that parse but fail validation.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(path + ": cannot open for writing");
  return f;
}

std::string default_diagnostics_path(const std::string& model_path) {
  std::filesystem::path p(model_path);
  std::string stem = p.extension() == ".json" ? p.stem().string() : p.filename().string();
  return (p.parent_path() / (stem + ".diagnostics.json")).string();
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw UsageError(what + ": not a number: '" + text + "'");
  }
  return v;
}

// "lo:hi:step" or a comma list.
std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError(what + ": expected lo:hi:step");
    double lo = parse_number(parts[0], what), hi = parse_number(parts[1], what), step = parse_number(parts[2], what);
    if (!(step > 0.0) || hi < lo) throw UsageError(what + ": need step > 0 and hi >= lo");
    long count = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 100000) throw UsageError(what + ": too many grid points");
    for (long i = 0; i < count; ++i) out.push_back(lo + step * static_cast<double>(i));
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_number(p, what));
  }
  if (out.empty()) throw UsageError(what + ": empty grid");
  return out;
}

int cmd_fit(const std::string& counts_path, const std::optional<std::string>& column, double kappa,
            const SolverConfig& config, const std::string& out_path, std::string diag_path, std::ostream& out,
            std::ostream& err) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw UsageError("--kappa must be positive");
  config.validate();
  CountSample sample(read_counts(counts_path, column));
  if (sample.empty()) throw InputError(counts_path + ": no counts");
  if (diag_path.empty()) diag_path = default_diagnostics_path(out_path);

  std::optional<FitResult> fit_opt;
  try {
    fit_opt.emplace(fit_npmle(sample, kappa, config));
  } catch (const NonConvergenceError& e) {
    write_text_file(diag_path, dump_json(diagnostics_to_json(e.diagnostics(), {e.what()})));
    err << "error: " << e.what() << "\n";
    return kNonConvergence;
  }
  const FitResult& fit = *fit_opt;
  std::vector<std::string> warnings;
  const double m_inf = fit.model.mass_at_infinity();
  if (fit.model.degenerate_at_infinity()) {
    warnings.push_back("all counts are zero: the whole mixing mass sits at infinity (prior is a point mass at 0)");
  } else if (m_inf > 0.0) {
    warnings.push_back("mixing measure has mass " + format_double(m_inf) +
                       " at infinity; refit with --no-infinity-atom before building coverage sets");
  }
  if (!fit.diagnostics.converged) {
    warnings.push_back("gradient gap " + format_double(fit.diagnostics.final_gradient_gap) +
                       " is above --tol but within the accepted slack");
  }
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  write_text_file(out_path, dump_json(model_to_json(fit.model)));
  write_text_file(diag_path, dump_json(diagnostics_to_json(fit.diagnostics, warnings)));
  out << "fit: n=" << sample.size() << " support=" << fit.diagnostics.support_size
      << " gap=" << format_double(fit.diagnostics.final_gradient_gap) << " -> " << out_path << "\n";
  return kOk;
}

void write_density_csv(const GammaMixtureModel& model, std::int64_t x_max, std::ostream& f) {
  f << "x,theta,posterior_density\n";
  for (std::int64_t x = 0; x <= x_max; ++x) {
    for (double theta : level_set_grid(model, x)) {
      f << x << ',' << format_double(theta) << ',' << format_double(std::exp(model.posterior_log_density(theta, x)))
        << '\n';
    }
  }
}

int cmd_coverage(const std::string& model_path, double beta, std::int64_t mc_draws, std::uint64_t seed,
                 const std::string& out_path, const std::string& density_path, const std::string& csv_path,
                 std::ostream& out) {
  if (!(beta > 0.0 && beta < 1.0)) throw UsageError("--beta must lie in (0, 1)");
  if (mc_draws < 1) throw UsageError("--mc-draws must be positive");
  GammaMixtureModel model = model_from_json(read_json_file(model_path));
  if (model.mass_at_infinity() > 0.0) {
    throw PreconditionError(
        "model has mass " + format_double(model.mass_at_infinity()) +
        " at infinity, so the prior has an atom at theta = 0 and no density level sets exist; refit with "
        "--no-infinity-atom or explicit --grid-max");
  }
  Rng rng(seed, 0);
  CoverageRule rule = build_rule(model, beta, mc_draws, rng);
  write_text_file(out_path, dump_json(rule_to_json(rule)));
  if (!csv_path.empty()) {
    auto f = open_out(csv_path);
    write_rule_csv(rule, f);
  }
  if (!density_path.empty()) {
    auto f = open_out(density_path);
    write_density_csv(model, rule.x_max(), f);
  }
  out << "coverage: threshold=" << format_double(rule.threshold) << " x_max=" << rule.x_max() << " -> " << out_path
      << "\n";
  return kOk;
}

int cmd_kappa(const std::string& counts_path, const std::optional<std::string>& column, const std::string& eta_text,
              const KappaConfig& config, std::uint64_t seed, const std::string& out_path,
              const std::string& profile_path, std::ostream& out) {
  EtaSpec eta;
  try {
    eta = EtaSpec::parse(eta_text);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--eta: ") + e.what());
  }
  config.validate();
  CountSample sample(read_counts(counts_path, column));
  if (sample.size() < 2) throw InputError(counts_path + ": need at least two counts");
  Rng rng(seed, stream_for(0, StreamPurpose::kFolds));
  KappaEstimate est = estimate_kappa(sample, eta, config, rng);
  write_text_file(out_path, dump_json(kappa_to_json(est)));
  if (!profile_path.empty()) {
    auto f = open_out(profile_path);
    f << "kappa,raw_delta,delta\n";
    for (std::size_t i = 0; i < est.profile.kappas.size(); ++i) {
      f << format_double(est.profile.kappas[i]) << ',' << format_double(est.profile.raw_delta[i]) << ','
        << format_double(est.profile.delta[i]) << '\n';
    }
  }
  out << "kappa: kappa_hat=" << format_double(est.kappa_hat) << " eta=" << format_double(est.eta)
      << (est.fallback ? " (no grid value within eta; largest used)" : "") << " -> " << out_path << "\n";
  return kOk;
}

int cmd_predict(const std::string& model_path, const std::string& counts_path, const std::optional<std::string>& column,
                const std::string& out_path, std::ostream& out) {
  GammaMixtureModel model = model_from_json(read_json_file(model_path));
  std::vector<std::int64_t> counts = read_counts(counts_path, column);
  std::ostringstream buf;
  buf << "index,x,posterior_mean\n";
  std::vector<std::optional<double>> cache;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto x = static_cast<std::size_t>(counts[i]);
    if (x >= cache.size()) cache.resize(x + 1);
    if (!cache[x]) cache[x] = model.posterior_mean(counts[i]);
    buf << i << ',' << counts[i] << ',' << format_double(*cache[x]) << '\n';
  }
  write_text_file(out_path, buf.str());
  out << "predict: " << counts.size() << " rows -> " << out_path << "\n";
  return kOk;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  ScenarioSpec spec = scenario_from_json(read_json_file(spec_path));
  std::filesystem::create_directories(out_dir);
  StudyResult result = run_coverage_study(spec);
  const std::filesystem::path dir(out_dir);
  {
    auto f = open_out((dir / "replications.csv").string());
    write_replications_csv(result, f);
  }
  {
    auto f = open_out((dir / "aggregate.csv").string());
    write_aggregate_csv(result, f);
  }
  {
    auto f = open_out((dir / "failures.csv").string());
    write_failures_csv(result, f);
  }
  for (const auto& fl : result.failures) err << "warning: replication " << fl.rep_id << " failed: " << fl.error << "\n";
  out << "simulate: " << result.replications.size() << " ok, " << result.failures.size() << " failed -> " << out_dir
      << "\n";
  if (result.replications.empty()) {
    err << "error: every replication failed\n";
    return kNonConvergence;
  }
  return kOk;
}

int cmd_rates(const std::string& spec_path, const std::string& out_path, std::ostream& out) {
  RatesSpec spec = rates_spec_from_json(read_json_file(spec_path));
  RateResult r = rate_experiment(spec.prior, spec.kappa, spec.n_list, spec.reps, spec.base_seed);
  auto f = open_out(out_path);
  write_rates_csv(r, f);
  out << "rates: slope=" << format_double(r.slope) << " -> " << out_path << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gamma-smoothed NPMLE for Poisson means"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand help for all subcommands");

  // fit
  std::string fit_counts, fit_out, fit_diag;
  std::optional<std::string> fit_column;
  double fit_kappa = 0.0;
  SolverConfig fit_cfg;
  std::optional<double> grid_min, grid_max, lower, upper;
  bool no_inf = false;
  std::string method = "cnm";
  auto* fit = app.add_subcommand("fit", "Fit the smooth NPMLE at a fixed shape");
  fit->add_option("counts", fit_counts, "Counts file")->required();
  fit->add_option("--kappa", fit_kappa, "Gamma shape")->required();
  fit->add_option("--grid-size", fit_cfg.grid_size, "Number of rate atoms");
  fit->add_option("--grid-min", grid_min, "Smallest rate atom");
  fit->add_option("--grid-max", grid_max, "Largest rate atom");
  fit->add_option("--lower", lower, "Support lower bound L (with --upper)");
  fit->add_option("--upper", upper, "Support upper bound U (with --lower)");
  fit->add_option("--tol", fit_cfg.tol_gradient, "Gradient-gap tolerance");
  fit->add_option("--max-iters", fit_cfg.max_iters, "Iteration cap");
  fit->add_option("--method", method, "cnm or em")->check(CLI::IsMember({"cnm", "em"}));
  fit->add_flag("--no-infinity-atom", no_inf, "Never place mass at lambda = infinity");
  fit->add_option("--column", fit_column, "CSV column holding the counts");
  fit->add_option("--out", fit_out, "Model JSON")->required();
  fit->add_option("--diagnostics", fit_diag, "Diagnostics JSON (default: <out>.diagnostics.json)");

  // coverage
  std::string cov_model, cov_out, cov_density, cov_csv;
  double cov_beta = 0.05;
  std::int64_t cov_draws = 200000;
  std::uint64_t cov_seed = 0;
  auto* cov = app.add_subcommand("coverage", "Build the marginal coverage rule of a fitted model");
  cov->add_option("model", cov_model, "Model JSON")->required();
  cov->add_option("--beta", cov_beta, "Miscoverage level in (0, 1)");
  cov->add_option("--mc-draws", cov_draws, "Monte Carlo draws for the threshold");
  cov->add_option("--seed", cov_seed, "RNG seed");
  cov->add_option("--out", cov_out, "Rule JSON")->required();
  cov->add_option("--emit-density", cov_density, "Posterior density CSV on the level-set grids");
  cov->add_option("--emit-csv", cov_csv, "Interval table CSV");

  // kappa
  std::string k_counts, k_out, k_profile, k_eta = "cv", k_grid, k_cv_grid;
  std::optional<std::string> k_column;
  std::uint64_t k_seed = 0;
  KappaConfig k_cfg;
  auto* kap = app.add_subcommand("kappa", "Estimate the minimal Gamma shape");
  kap->add_option("counts", k_counts, "Counts file")->required();
  kap->add_option("--eta", k_eta, "KS radius: a value, dkw:C or cv");
  kap->add_option("--kappa-grid", k_grid, "lo:hi:step or a comma list");
  kap->add_option("--atom-grid-size", k_cfg.atom_grid_size, "Rate atoms per LP");
  kap->add_option("--cv-folds", k_cfg.cv_folds, "Folds for --eta cv");
  kap->add_option("--cv-eta-grid", k_cv_grid, "Candidate radii for --eta cv");
  kap->add_option("--seed", k_seed, "RNG seed (fold assignment)");
  kap->add_option("--column", k_column, "CSV column holding the counts");
  kap->add_option("--out", k_out, "Result JSON")->required();
  kap->add_option("--profile-csv", k_profile, "Profile CSV (kappa, raw_delta, delta)");

  // predict
  std::string p_model, p_counts, p_out;
  std::optional<std::string> p_column;
  auto* pred = app.add_subcommand("predict", "Posterior means for a counts file");
  pred->add_option("model", p_model, "Model JSON")->required();
  pred->add_option("counts", p_counts, "Counts file")->required();
  pred->add_option("--column", p_column, "CSV column holding the counts");
  pred->add_option("--out", p_out, "Predictions CSV")->required();

  // simulate
  std::string s_spec, s_out;
  auto* sim = app.add_subcommand("simulate", "Run a coverage study");
  sim->add_option("spec", s_spec, "Scenario JSON")->required();
  sim->add_option("--out", s_out, "Output directory")->required();

  // rates
  std::string r_spec, r_out;
  auto* rates = app.add_subcommand("rates", "Run the TV rate experiment");
  rates->add_option("spec", r_spec, "Rates JSON")->required();
  rates->add_option("--out", r_out, "Rates CSV")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("gsnpmle");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (fit->parsed()) {
      fit_cfg.grid_min = grid_min;
      fit_cfg.grid_max = grid_max;
      if (lower.has_value() != upper.has_value()) throw UsageError("--lower and --upper go together");
      if (lower) fit_cfg.support_bounds = std::make_pair(*lower, *upper);
      if (no_inf) fit_cfg.allow_infinity_atom = false;
      fit_cfg.method = method == "em" ? SolverMethod::kEm : SolverMethod::kConstrainedNewton;
      return cmd_fit(fit_counts, fit_column, fit_kappa, fit_cfg, fit_out, fit_diag, out, err);
    }
    if (cov->parsed()) return cmd_coverage(cov_model, cov_beta, cov_draws, cov_seed, cov_out, cov_density, cov_csv, out);
    if (kap->parsed()) {
      if (!k_grid.empty()) k_cfg.kappa_grid = parse_grid(k_grid, "--kappa-grid");
      if (!k_cv_grid.empty()) k_cfg.cv_eta_grid = parse_grid(k_cv_grid, "--cv-eta-grid");
      return cmd_kappa(k_counts, k_column, k_eta, k_cfg, k_seed, k_out, k_profile, out);
    }
    if (pred->parsed()) return cmd_predict(p_model, p_counts, p_column, p_out, out);
    if (sim->parsed()) return cmd_simulate(s_spec, s_out, out, err);
    if (rates->parsed()) return cmd_rates(r_spec, r_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kInputError;
  } catch (const PreconditionError& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kPrecondition;
  } catch (const NonConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace gsnpmle::cli
