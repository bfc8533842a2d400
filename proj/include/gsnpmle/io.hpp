#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsnpmle/coverage.hpp"
#include "gsnpmle/mixture.hpp"
#include "gsnpmle/npmle.hpp"
#include "gsnpmle/shape_select.hpp"
#include "gsnpmle/simlab.hpp"

namespace gsnpmle {

using Json = nlohmann::ordered_json;

// Models: {"kappa", "atoms", "weights", "mass_at_infinity", "loglik", "n_fit"}.
Json model_to_json(const GammaMixtureModel& model);
/// Validates the schema and model invariants; throws InputError.
GammaMixtureModel model_from_json(const Json& j);

// Rules: {"beta", "threshold", "mc_draws", "sets": {"<x>": [[lo, hi], ...]}}.
Json rule_to_json(const CoverageRule& rule);
CoverageRule rule_from_json(const Json& j);

Json diagnostics_to_json(const FitDiagnostics& d, const std::vector<std::string>& warnings = {});

// {"kappa_hat", "eta", "eta_rule", "profile": [[kappa, delta], ...]}.
Json kappa_to_json(const KappaEstimate& est);

/// Scenario file; errors name the offending field.
ScenarioSpec scenario_from_json(const Json& j);

struct RatesSpec {
  GammaMixturePrior prior;
  double kappa = 2.0;
  std::vector<std::int64_t> n_list;
  int reps = 30;
  std::uint64_t base_seed = 0;
};
RatesSpec rates_spec_from_json(const Json& j);

/// Canonical text form: two-space indent plus a trailing newline.
std::string dump_json(const Json& j);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// One nonnegative integer per line (blank lines skipped), or, with a column
/// name, a headered CSV from which that column is read. Errors carry the line
/// number.
std::vector<std::int64_t> parse_counts(std::istream& in, const std::optional<std::string>& column = std::nullopt);
std::vector<std::int64_t> read_counts(const std::string& path, const std::optional<std::string>& column = std::nullopt);

}  // namespace gsnpmle
