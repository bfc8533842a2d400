#include "gsnpmle/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gsnpmle/errors.hpp"

namespace gsnpmle {
namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) { throw InputError(field + ": " + what); }

const Json& field(const Json& j, const std::string& name, const std::string& prefix = "") {
  if (!j.is_object()) fail(prefix.empty() ? "document" : prefix, "expected an object");
  const auto it = j.find(name);
  if (it == j.end()) fail(prefix + name, "missing");
  return *it;
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) fail(name, "expected a number");
  return j.get<double>();
}

std::int64_t integer(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) fail(name, "expected an integer");
  return j.get<std::int64_t>();
}

std::vector<double> numbers(const Json& j, const std::string& name) {
  if (!j.is_array()) fail(name, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, name));
  return out;
}

Prior prior_from_json(const Json& j) {
  const std::string type = field(j, "type", "prior.").is_string() ? field(j, "type", "prior.").get<std::string>() : "";
  Prior prior;
  if (type == "gamma_mixture" || type == "ig_mixture") {
    const Json& comps = field(j, "components", "prior.");
    if (!comps.is_array() || comps.empty()) fail("prior.components", "expected a nonempty array");
    if (type == "gamma_mixture") {
      GammaMixturePrior p;
      for (const auto& c : comps) {
        p.components.push_back({number(field(c, "weight", "prior.components."), "prior.components.weight"),
                                number(field(c, "shape", "prior.components."), "prior.components.shape"),
                                number(field(c, "rate", "prior.components."), "prior.components.rate")});
      }
      prior = p;
    } else {
      IgMixturePrior p;
      for (const auto& c : comps) {
        p.components.push_back({number(field(c, "weight", "prior.components."), "prior.components.weight"),
                                number(field(c, "mu", "prior.components."), "prior.components.mu"),
                                number(field(c, "lam", "prior.components."), "prior.components.lam")});
      }
      prior = p;
    }
  } else if (type == "lognormal") {
    prior = LognormalPrior{number(field(j, "mu", "prior."), "prior.mu"), number(field(j, "sigma", "prior."), "prior.sigma")};
  } else {
    fail("prior.type", "expected gamma_mixture, lognormal or ig_mixture");
  }
  try {
    validate_prior(prior);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  return prior;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::int64_t parse_count(const std::string& text, std::size_t line_no) {
  std::int64_t v = 0;
  std::size_t used = 0;
  bool ok = !text.empty() && (std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '+');
  if (ok) {
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok || used != text.size() || v < 0) {
    throw InputError("line " + std::to_string(line_no) + ": expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

Json model_to_json(const GammaMixtureModel& model) {
  Json j;
  j["kappa"] = model.kappa();
  j["atoms"] = model.mixing().atoms;
  j["weights"] = model.mixing().weights;
  j["mass_at_infinity"] = model.mass_at_infinity();
  j["loglik"] = model.loglik() ? Json(*model.loglik()) : Json(nullptr);
  j["n_fit"] = model.n_fit();
  return j;
}

GammaMixtureModel model_from_json(const Json& j) {
  static const std::vector<std::string> kFields{"kappa", "atoms", "weights", "mass_at_infinity", "loglik", "n_fit"};
  if (!j.is_object()) fail("model", "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(kFields.begin(), kFields.end(), k) == kFields.end()) fail(k, "unknown model field");
  }
  MixingMeasure mix;
  const double kappa = number(field(j, "kappa"), "kappa");
  mix.atoms = numbers(field(j, "atoms"), "atoms");
  mix.weights = numbers(field(j, "weights"), "weights");
  mix.mass_at_infinity = number(field(j, "mass_at_infinity"), "mass_at_infinity");
  const Json& ll = field(j, "loglik");
  std::optional<double> loglik;
  if (!ll.is_null()) loglik = number(ll, "loglik");
  const std::int64_t n_fit = integer(field(j, "n_fit"), "n_fit");
  if (n_fit < 0) fail("n_fit", "must be nonnegative");
  if (mix.atoms.size() != mix.weights.size()) fail("weights", "length differs from atoms");
  try {
    return GammaMixtureModel(kappa, std::move(mix), n_fit, loglik);
  } catch (const DomainError& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

Json rule_to_json(const CoverageRule& rule) {
  Json j;
  j["beta"] = rule.beta;
  j["threshold"] = rule.threshold;
  j["mc_draws"] = rule.mc_draws;
  Json sets = Json::object();
  for (std::int64_t x = 0; x <= rule.x_max(); ++x) {
    Json arr = Json::array();
    for (const auto& iv : rule.set(x).intervals()) arr.push_back(Json::array({iv.lo, iv.hi}));
    sets[std::to_string(x)] = arr;
  }
  j["sets"] = sets;
  return j;
}

CoverageRule rule_from_json(const Json& j) {
  CoverageRule rule;
  rule.beta = number(field(j, "beta"), "beta");
  rule.threshold = number(field(j, "threshold"), "threshold");
  rule.mc_draws = integer(field(j, "mc_draws"), "mc_draws");
  const Json& sets = field(j, "sets");
  if (!sets.is_object()) fail("sets", "expected an object keyed by count");
  std::int64_t x_max = -1;
  std::vector<std::pair<std::int64_t, IntervalUnion>> parsed;
  for (const auto& [key, val] : sets.items()) {
    std::int64_t x;
    try {
      x = parse_count(key, 0);
    } catch (const InputError&) {
      fail("sets", "key '" + key + "' is not a nonnegative integer");
    }
    if (!val.is_array()) fail("sets." + key, "expected an array of [lo, hi] pairs");
    std::vector<Interval> ivs;
    for (const auto& p : val) {
      if (!p.is_array() || p.size() != 2) fail("sets." + key, "expected [lo, hi] pairs");
      ivs.push_back({number(p[0], "sets." + key), number(p[1], "sets." + key)});
    }
    try {
      parsed.emplace_back(x, IntervalUnion(std::move(ivs)));
    } catch (const DomainError& e) {
      fail("sets." + key, e.what());
    }
    x_max = std::max(x_max, x);
  }
  rule.sets.resize(static_cast<std::size_t>(x_max + 1));
  for (auto& [x, u] : parsed) rule.sets[static_cast<std::size_t>(x)] = std::move(u);
  return rule;
}

Json diagnostics_to_json(const FitDiagnostics& d, const std::vector<std::string>& warnings) {
  Json j;
  j["iterations"] = d.iterations;
  j["final_gradient_gap"] = d.final_gradient_gap;
  j["loglik_trace_tail"] = d.loglik_trace_tail;
  j["support_size"] = d.support_size;
  j["converged"] = d.converged;
  j["infinity_atom_enabled"] = d.infinity_atom_enabled;
  j["support_exceeds_distinct_bound"] = d.support_exceeds_distinct_bound;
  j["warnings"] = warnings;
  return j;
}

Json kappa_to_json(const KappaEstimate& est) {
  Json j;
  j["kappa_hat"] = est.kappa_hat;
  j["eta"] = est.eta;
  j["eta_rule"] = to_string(est.rule);
  j["fallback"] = est.fallback;
  j["monotonicity_violations"] = est.profile.monotonicity_violations;
  Json prof = Json::array();
  for (std::size_t i = 0; i < est.profile.kappas.size(); ++i) {
    prof.push_back(Json::array({est.profile.kappas[i], est.profile.delta[i]}));
  }
  j["profile"] = prof;
  return j;
}

ScenarioSpec scenario_from_json(const Json& j) {
  ScenarioSpec s;
  if (!j.is_object()) fail("scenario", "expected an object");
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("name", "expected a string");
    s.name = j["name"].get<std::string>();
  }
  s.prior = prior_from_json(field(j, "prior"));
  s.n = integer(field(j, "n"), "n");
  s.beta = number(field(j, "beta"), "beta");
  s.reps = static_cast<int>(integer(field(j, "reps"), "reps"));
  s.base_seed = static_cast<std::uint64_t>(integer(field(j, "base_seed"), "base_seed"));
  if (j.contains("mc_draws")) s.mc_draws = integer(j["mc_draws"], "mc_draws");
  if (j.contains("metrics")) {
    if (!j["metrics"].is_boolean()) fail("metrics", "expected true or false");
    s.metrics = j["metrics"].get<bool>();
  }
  const Json& kr = field(j, "kappa_rule");
  const Json& kind = field(kr, "type", "kappa_rule.");
  if (kind == "fixed") {
    s.kappa_rule.kind = KappaRule::Kind::kFixed;
    s.kappa_rule.kappa = number(field(kr, "kappa", "kappa_rule."), "kappa_rule.kappa");
  } else if (kind == "neighborhood") {
    s.kappa_rule.kind = KappaRule::Kind::kNeighborhood;
    const Json& eta = field(kr, "eta", "kappa_rule.");
    try {
      s.kappa_rule.eta = EtaSpec::parse(eta.is_string() ? eta.get<std::string>() : eta.dump());
    } catch (const DomainError& e) {
      fail("kappa_rule.eta", e.what());
    }
    auto& cfg = s.kappa_rule.config;
    if (kr.contains("kappa_grid")) cfg.kappa_grid = numbers(kr["kappa_grid"], "kappa_rule.kappa_grid");
    if (kr.contains("atom_grid_size")) cfg.atom_grid_size = static_cast<int>(integer(kr["atom_grid_size"], "kappa_rule.atom_grid_size"));
    if (kr.contains("cv_folds")) cfg.cv_folds = static_cast<int>(integer(kr["cv_folds"], "kappa_rule.cv_folds"));
    if (kr.contains("cv_eta_grid")) cfg.cv_eta_grid = numbers(kr["cv_eta_grid"], "kappa_rule.cv_eta_grid");
  } else {
    fail("kappa_rule.type", "expected fixed or neighborhood");
  }
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  return s;
}

RatesSpec rates_spec_from_json(const Json& j) {
  RatesSpec r;
  const Prior p = prior_from_json(field(j, "prior"));
  if (!std::holds_alternative<GammaMixturePrior>(p)) fail("prior.type", "the rate experiment needs a gamma_mixture prior");
  r.prior = std::get<GammaMixturePrior>(p);
  r.kappa = number(field(j, "kappa"), "kappa");
  if (!(r.kappa > 0.0)) fail("kappa", "must be positive");
  const Json& ns = field(j, "n_list");
  if (!ns.is_array() || ns.empty()) fail("n_list", "expected a nonempty array of integers");
  for (const auto& v : ns) {
    r.n_list.push_back(integer(v, "n_list"));
    if (r.n_list.back() < 2) fail("n_list", "sample sizes must be at least 2");
  }
  r.reps = static_cast<int>(integer(field(j, "reps"), "reps"));
  if (r.reps < 1) fail("reps", "must be positive");
  r.base_seed = static_cast<std::uint64_t>(integer(field(j, "base_seed"), "base_seed"));
  return r;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << text;
  if (!out) throw InputError(path + ": write failed");
}

std::vector<std::int64_t> parse_counts(std::istream& in, const std::optional<std::string>& column) {
  std::vector<std::int64_t> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> col_index;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!column) {
      out.push_back(parse_count(t, line_no));
      continue;
    }
    const auto fields = split_csv(t);
    if (!col_index) {
      const auto it = std::find(fields.begin(), fields.end(), *column);
      if (it == fields.end()) throw InputError("line " + std::to_string(line_no) + ": no column named '" + *column + "'");
      col_index = static_cast<std::size_t>(it - fields.begin());
      continue;
    }
    if (*col_index >= fields.size()) {
      throw InputError("line " + std::to_string(line_no) + ": missing column '" + *column + "'");
    }
    out.push_back(parse_count(fields[*col_index], line_no));
  }
  return out;
}

std::vector<std::int64_t> read_counts(const std::string& path, const std::optional<std::string>& column) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return parse_counts(in, column);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace gsnpmle
