#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gsnpmle/coverage.hpp"
#include "gsnpmle/errors.hpp"
#include "gsnpmle/io.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/shape_select.hpp"
#include "gsnpmle/simlab.hpp"
#include "gsnpmle/special_functions.hpp"

namespace py = pybind11;
using namespace gsnpmle;

namespace {

py::dict diagnostics_dict(const FitDiagnostics& d) {
  py::dict out;
  out["iterations"] = d.iterations;
  out["final_gradient_gap"] = d.final_gradient_gap;
  out["loglik_trace_tail"] = d.loglik_trace_tail;
  out["support_size"] = d.support_size;
  out["converged"] = d.converged;
  out["infinity_atom_enabled"] = d.infinity_atom_enabled;
  return out;
}

std::vector<std::vector<std::pair<double, double>>> rule_sets(const CoverageRule& rule) {
  std::vector<std::vector<std::pair<double, double>>> out;
  for (const auto& s : rule.sets) {
    auto& row = out.emplace_back();
    for (const auto& iv : s.intervals()) row.emplace_back(iv.lo, iv.hi);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gamma-smoothed NPMLE for Poisson means";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);
  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ArithmeticError);

  m.def("log_gamma", &log_gamma);
  m.def("reg_lower_gamma", &reg_lower_gamma, py::arg("s"), py::arg("x"));
  m.def("reg_upper_gamma", &reg_upper_gamma, py::arg("s"), py::arg("x"));
  m.def("gamma_quantile", &gamma_quantile, py::arg("p"), py::arg("shape"));
  m.def("chi_square_quantile", &chi_square_quantile, py::arg("p"), py::arg("df"));

  py::class_<GammaMixtureModel>(m, "GammaMixtureModel")
      .def(py::init([](double kappa, std::vector<double> atoms, std::vector<double> weights, double m_inf) {
             return GammaMixtureModel(kappa, MixingMeasure{std::move(atoms), std::move(weights), m_inf});
           }),
           py::arg("kappa"), py::arg("atoms"), py::arg("weights"), py::arg("mass_at_infinity") = 0.0)
      .def_property_readonly("kappa", &GammaMixtureModel::kappa)
      .def_property_readonly("atoms", [](const GammaMixtureModel& g) { return g.mixing().atoms; })
      .def_property_readonly("weights", [](const GammaMixtureModel& g) { return g.mixing().weights; })
      .def_property_readonly("mass_at_infinity", &GammaMixtureModel::mass_at_infinity)
      .def_property_readonly("n_fit", &GammaMixtureModel::n_fit)
      .def_property_readonly("loglik", &GammaMixtureModel::loglik)
      .def("marginal_pmf", &GammaMixtureModel::marginal_pmf, py::arg("x"))
      .def("prior_density", &GammaMixtureModel::prior_density, py::arg("theta"))
      .def("posterior_log_density", &GammaMixtureModel::posterior_log_density, py::arg("theta"), py::arg("x"))
      .def("posterior_mean", &GammaMixtureModel::posterior_mean, py::arg("x"))
      .def("to_json", [](const GammaMixtureModel& g) { return dump_json(model_to_json(g)); })
      .def_static("from_json", [](const std::string& s) {
        Json j;
        try {
          j = Json::parse(s);
        } catch (const Json::parse_error& e) {
          throw InputError(e.what());
        }
        return model_from_json(j);
      });

  m.def(
      "fit_npmle",
      [](std::vector<std::int64_t> counts, double kappa, int grid_size, std::optional<double> grid_min,
         std::optional<double> grid_max, double tol, std::optional<bool> allow_infinity_atom, std::string method) {
        SolverConfig cfg;
        cfg.grid_size = grid_size;
        cfg.grid_min = grid_min;
        cfg.grid_max = grid_max;
        cfg.tol_gradient = tol;
        cfg.allow_infinity_atom = allow_infinity_atom;
        if (method == "em") {
          cfg.method = SolverMethod::kEm;
        } else if (method != "cnm") {
          throw DomainError("method must be 'cnm' or 'em'");
        }
        CountSample sample(std::move(counts));
        std::optional<FitResult> fit;
        {
          py::gil_scoped_release release;
          fit.emplace(fit_npmle(sample, kappa, cfg));
        }
        return py::make_tuple(fit->model, diagnostics_dict(fit->diagnostics));
      },
      py::arg("counts"), py::arg("kappa"), py::arg("grid_size") = 300, py::arg("grid_min") = py::none(),
      py::arg("grid_max") = py::none(), py::arg("tol") = 1e-8, py::arg("allow_infinity_atom") = py::none(),
      py::arg("method") = "cnm",
      "Fit the smooth NPMLE at shape kappa; returns (model, diagnostics).");

  m.def(
      "optimality_gap",
      [](const GammaMixtureModel& model, std::vector<std::int64_t> counts) {
        return optimality_gap(model, CountSample(std::move(counts)));
      },
      py::arg("model"), py::arg("counts"));

  py::class_<CoverageRule>(m, "CoverageRule")
      .def_readonly("threshold", &CoverageRule::threshold)
      .def_readonly("beta", &CoverageRule::beta)
      .def_readonly("mc_draws", &CoverageRule::mc_draws)
      .def_property_readonly("x_max", &CoverageRule::x_max)
      .def_property_readonly("sets", &rule_sets)
      .def(
          "set",
          [](const CoverageRule& r, std::int64_t x) {
            std::vector<std::pair<double, double>> out;
            for (const auto& iv : r.set(x).intervals()) out.emplace_back(iv.lo, iv.hi);
            return out;
          },
          py::arg("x"))
      .def("length", [](const CoverageRule& r, std::int64_t x) { return r.set(x).total_length(); }, py::arg("x"))
      .def("to_json", [](const CoverageRule& r) { return dump_json(rule_to_json(r)); });

  m.def(
      "build_rule",
      [](const GammaMixtureModel& model, double beta, std::int64_t mc_draws, std::uint64_t seed) {
        py::gil_scoped_release release;
        Rng rng(seed, 0);
        return build_rule(model, beta, mc_draws, rng);
      },
      py::arg("model"), py::arg("beta"), py::arg("mc_draws") = 200000, py::arg("seed") = 0);
  m.def("contains", &contains, py::arg("model"), py::arg("k"), py::arg("x"), py::arg("theta"));
  m.def("exact_coverage", &exact_coverage, py::arg("rule"), py::arg("truth"));
  m.def("garwood_interval", &garwood_interval, py::arg("x"), py::arg("beta"));

  m.def("dkw_eta", &dkw_eta, py::arg("n"), py::arg("c"));
  m.def(
      "estimate_kappa",
      [](std::vector<std::int64_t> counts, const std::string& eta, std::optional<std::vector<double>> kappa_grid,
         std::uint64_t seed) {
        KappaConfig cfg;
        if (kappa_grid) cfg.kappa_grid = *kappa_grid;
        EtaSpec spec = EtaSpec::parse(eta);
        CountSample sample(std::move(counts));
        std::optional<KappaEstimate> est;
        {
          py::gil_scoped_release release;
          Rng rng(seed, stream_for(0, StreamPurpose::kFolds));
          est.emplace(estimate_kappa(sample, spec, cfg, rng));
        }
        py::dict out;
        out["kappa_hat"] = est->kappa_hat;
        out["eta"] = est->eta;
        out["eta_rule"] = to_string(est->rule);
        out["fallback"] = est->fallback;
        out["kappas"] = est->profile.kappas;
        out["delta"] = est->profile.delta;
        out["raw_delta"] = est->profile.raw_delta;
        return out;
      },
      py::arg("counts"), py::arg("eta") = "cv", py::arg("kappa_grid") = py::none(), py::arg("seed") = 0,
      "eta is a number, 'dkw:C' or 'cv'.");

  m.def(
      "run_coverage_study",
      [](const std::string& spec_json) {
        Json j;
        try {
          j = Json::parse(spec_json);
        } catch (const Json::parse_error& e) {
          throw InputError(e.what());
        }
        ScenarioSpec spec = scenario_from_json(j);
        std::optional<StudyResult> res;
        {
          py::gil_scoped_release release;
          res.emplace(run_coverage_study(spec));
        }
        py::list reps;
        for (const auto& r : res->replications) {
          py::dict d;
          d["rep_id"] = r.rep_id;
          d["coverage_opt"] = r.coverage_opt;
          d["length_opt"] = r.length_opt;
          d["coverage_garwood"] = r.coverage_garwood;
          d["length_garwood"] = r.length_garwood;
          d["kappa_hat"] = r.kappa_hat;
          reps.append(d);
        }
        py::list fails;
        for (const auto& f : res->failures) fails.append(py::make_tuple(f.rep_id, f.error));
        py::dict out;
        out["replications"] = reps;
        out["failures"] = fails;
        out["coverage_opt"] = res->coverage_opt.mean;
        out["length_opt"] = res->length_opt.mean;
        out["coverage_garwood"] = res->coverage_garwood.mean;
        out["length_garwood"] = res->length_garwood.mean;
        return out;
      },
      py::arg("spec_json"), "Run a coverage study from a scenario JSON string.");
}
