#include <doctest.h>

#include <sstream>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/io.hpp"

using namespace gsnpmle;

namespace {

std::vector<std::int64_t> parse(const std::string& text, std::optional<std::string> col = std::nullopt) {
  std::istringstream in(text);
  return parse_counts(in, col);
}

std::string error_of(const std::string& text, std::optional<std::string> col = std::nullopt) {
  try {
    parse(text, col);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("model json round trip is byte identical") {
  const CountSample sample(std::vector<std::int64_t>{0, 1, 1, 2, 3, 5, 8, 2, 1, 0, 4});
  FitResult fit = fit_npmle(sample, 1.5);
  const std::string a = dump_json(model_to_json(fit.model));
  const GammaMixtureModel back = model_from_json(Json::parse(a));
  CHECK(dump_json(model_to_json(back)) == a);
  CHECK(back.kappa() == fit.model.kappa());
  CHECK(back.n_fit() == 11);
  CHECK(back.loglik().has_value());

  const GammaMixtureModel analytic(2.0, MixingMeasure{{2.0, 4.0}, {0.5, 0.5}, 0.0});
  const std::string b = dump_json(model_to_json(analytic));
  CHECK(b.find("\"loglik\": null") != std::string::npos);
  CHECK(dump_json(model_to_json(model_from_json(Json::parse(b)))) == b);
}

TEST_CASE("model json rejects bad input") {
  Json j = model_to_json(GammaMixtureModel(2.0, MixingMeasure{{2.0, 4.0}, {0.5, 0.5}, 0.0}));
  Json extra = j;
  extra["colour"] = 1;
  CHECK_THROWS_AS(model_from_json(extra), InputError);
  Json bad = j;
  bad["weights"] = Json::array({0.5, 0.6});
  CHECK_THROWS_AS(model_from_json(bad), InputError);
  Json neg = j;
  neg["kappa"] = -1.0;
  CHECK_THROWS_AS(model_from_json(neg), InputError);
  Json missing = j;
  missing.erase("atoms");
  CHECK_THROWS_AS(model_from_json(missing), InputError);
}

TEST_CASE("rule json round trip is byte identical") {
  const GammaMixtureModel model(2.0, MixingMeasure{{2.0, 4.0}, {0.5, 0.5}, 0.0});
  Rng rng(3, 0);
  CoverageRule rule = build_rule(model, 0.1, 20000, rng);
  const std::string a = dump_json(rule_to_json(rule));
  CoverageRule back = rule_from_json(Json::parse(a));
  CHECK(back.x_max() == rule.x_max());
  for (std::int64_t x = 0; x <= rule.x_max(); ++x) CHECK(back.set(x).intervals() == rule.set(x).intervals());
  CHECK(dump_json(rule_to_json(back)) == a);
}

TEST_CASE("counts parsing") {
  CHECK(parse("3\n0\n\n12\n") == std::vector<std::int64_t>{3, 0, 12});
  CHECK(parse("").empty());
  CHECK(parse("  7 \r\n") == std::vector<std::int64_t>{7});
  CHECK(parse("name,goals\na,3\nb,0\n", "goals") == std::vector<std::int64_t>{3, 0});
  CHECK(parse("", "goals").empty());

  CHECK(error_of("1\n2\n-3\n").find("line 3") != std::string::npos);
  CHECK(error_of("1\nx\n").find("line 2") != std::string::npos);
  CHECK(error_of("1.5\n").find("line 1") != std::string::npos);
  CHECK(error_of("name,goals\na,3\nb,\n", "goals").find("line 3") != std::string::npos);
  CHECK(!error_of("name,goals\na,3\n", "assists").empty());
  CHECK_THROWS_AS(read_counts("/nonexistent/counts.txt"), InputError);
}

TEST_CASE("scenario errors name the field") {
  auto err = [](const std::string& text) {
    try {
      scenario_from_json(Json::parse(text));
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string prior = R"("prior": {"type": "gamma_mixture", "components": [{"weight": 1, "shape": 2, "rate": 2}]})";
  const std::string ok = "{" + prior + R"(, "n": 50, "beta": 0.05, "reps": 2, "kappa_rule": {"type": "fixed", "kappa": 2}, "base_seed": 1})";
  CHECK(err(ok).empty());
  CHECK(err("{" + prior + R"(, "n": 0, "beta": 0.05, "reps": 2, "kappa_rule": {"type": "fixed", "kappa": 2}, "base_seed": 1})")
            .find("n") == 0);
  CHECK(err("{" + prior + R"(, "n": 50, "beta": 1.5, "reps": 2, "kappa_rule": {"type": "fixed", "kappa": 2}, "base_seed": 1})")
            .find("beta") == 0);
  CHECK(err("{" + prior + R"(, "n": 50, "beta": 0.05, "reps": 2, "kappa_rule": {"type": "wild"}, "base_seed": 1})")
            .find("kappa_rule") == 0);
  CHECK(err(R"({"prior": {"type": "lognormal", "mu": 0, "sigma": -1}, "n": 50, "beta": 0.05, "reps": 2, "kappa_rule": {"type": "fixed", "kappa": 2}, "base_seed": 1})")
            .find("prior") == 0);
}
