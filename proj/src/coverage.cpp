#include "gsnpmle/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/format.hpp"
#include "gsnpmle/parallel.hpp"
#include "gsnpmle/special_functions.hpp"

namespace gsnpmle {
namespace {

constexpr int kCdfPoints = 1024;
constexpr double kUpperTail = 1e-10;
constexpr double kRuleTail = 1e-8;
constexpr double kBisectRelTol = 1e-10;

void require_finite_support(const GammaMixtureModel& model, const char* who) {
  if (model.mass_at_infinity() > 0.0) {
    throw PreconditionError(std::string(who) +
                            ": model has mass at infinity; coverage sets require a finitely supported mixing measure");
  }
}

void require_beta(double beta, const char* who) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError(std::string(who) + ": beta must lie in (0, 1)");
}

// Bisection for the crossing of log_density - log_k between a and b, where
// `inside_at_a` tells which side a is on.
double refine_crossing(const PosteriorDensity& post, double log_k, double a, double b, bool inside_at_a) {
  for (int it = 0; it < 200 && (b - a) > kBisectRelTol * b; ++it) {
    const double mid = 0.5 * (a + b);
    const bool inside = post.log_density(mid) >= log_k;
    (inside == inside_at_a ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace

IntervalUnion::IntervalUnion(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& iv = intervals_[i];
    if (!(iv.lo >= 0.0 && iv.lo < iv.hi && std::isfinite(iv.hi))) {
      throw DomainError("IntervalUnion: each interval needs 0 <= lo < hi < inf");
    }
    if (i > 0 && !(iv.lo > intervals_[i - 1].hi)) throw DomainError("IntervalUnion: intervals must be sorted and disjoint");
  }
}

double IntervalUnion::total_length() const {
  double s = 0.0;
  for (const auto& iv : intervals_) s += iv.hi - iv.lo;
  return s;
}

bool IntervalUnion::contains(double theta) const {
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), theta,
                             [](double t, const Interval& iv) { return t < iv.lo; });
  if (it == intervals_.begin()) return false;
  --it;
  return theta <= it->hi;
}

bool IntervalUnion::subset_of(const IntervalUnion& other, double slack) const {
  for (const auto& iv : intervals_) {
    bool covered = false;
    for (const auto& ov : other.intervals_) {
      if (iv.lo >= ov.lo - slack && iv.hi <= ov.hi + slack) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

const IntervalUnion& CoverageRule::set(std::int64_t x) const {
  static const IntervalUnion kEmpty;
  if (x < 0 || x > x_max()) return kEmpty;
  return sets[static_cast<std::size_t>(x)];
}

std::string model_fingerprint(const GammaMixtureModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  mix(model.kappa());
  for (double a : model.mixing().atoms) mix(a);
  for (double w : model.mixing().weights) mix(w);
  mix(model.mass_at_infinity());
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 15];
  return out;
}

double estimate_threshold(const GammaMixtureModel& model, double beta, std::int64_t mc_draws, Rng& rng) {
  require_finite_support(model, "estimate_threshold");
  require_beta(beta, "estimate_threshold");
  if (mc_draws < 1) throw DomainError("estimate_threshold: mc_draws must be positive");

  const auto atoms = model.support();
  const auto weights = model.support_weights();
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  std::unordered_map<std::int64_t, PosteriorDensity> posts;
  std::vector<double> log_dens(static_cast<std::size_t>(mc_draws));
  for (auto& ld : log_dens) {
    const double u = rng.uniform() * cumulative.back();
    auto j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    j = std::min(j, atoms.size() - 1);
    const double theta = sample_gamma(model.kappa(), atoms[j], rng);
    const std::int64_t x = sample_poisson(theta, rng);
    auto it = posts.find(x);
    if (it == posts.end()) it = posts.emplace(x, model.posterior(x)).first;
    ld = it->second.log_density(theta);
  }
  // Order statistic ceil(beta B), 1-based; the small shave keeps products like
  // 0.05 * 200000 from rounding up past an integer.
  auto rank = static_cast<std::int64_t>(std::ceil(beta * static_cast<double>(mc_draws) * (1.0 - 1e-12)));
  rank = std::clamp<std::int64_t>(rank, 1, mc_draws);
  auto nth = log_dens.begin() + (rank - 1);
  std::nth_element(log_dens.begin(), nth, log_dens.end());
  return std::exp(*nth);
}

std::vector<double> level_set_grid(const GammaMixtureModel& model, std::int64_t x) {
  if (model.degenerate_at_infinity()) throw PreconditionError("level_set_grid: model has no finite atoms");
  const double shape = static_cast<double>(x) + model.kappa();
  const double rate_lo = model.min_support_atom() + 1.0;
  const double rate_hi = model.max_support_atom() + 1.0;
  const double unit_top = gamma_upper_quantile(kUpperTail, shape);
  const double theta_hi = unit_top / rate_lo;

  std::vector<double> unit(kCdfPoints);
  for (int i = 1; i < kCdfPoints; ++i) unit[static_cast<std::size_t>(i - 1)] = gamma_quantile(double(i) / kCdfPoints, shape);
  unit.back() = unit_top;

  std::vector<double> grid;
  grid.reserve(2 * kCdfPoints);
  for (double u : unit) grid.push_back(u / rate_lo);
  if (rate_hi != rate_lo) {
    for (double u : unit) grid.push_back(u / rate_hi);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.erase(std::remove_if(grid.begin(), grid.end(), [&](double t) { return !(t > 0.0) || t > theta_hi; }),
             grid.end());
  if (grid.empty() || grid.back() != theta_hi) grid.push_back(theta_hi);
  return grid;
}

IntervalUnion level_set(const GammaMixtureModel& model, std::int64_t x, double k) {
  if (!(k > 0.0)) throw DomainError("level_set: threshold must be positive");
  const PosteriorDensity post = model.posterior(x);
  const std::vector<double> grid = level_set_grid(model, x);
  const double log_k = std::log(k);
  const double shape = post.shape();

  // State at theta -> 0+: the density diverges for shape < 1, is finite for
  // shape == 1 and vanishes otherwise.
  bool inside;
  if (shape < 1.0) {
    inside = true;
  } else if (shape == 1.0) {
    inside = post.log_density(std::numeric_limits<double>::min()) >= log_k;
  } else {
    inside = false;
  }

  std::vector<Interval> out;
  double prev = 0.0;
  double open_at = 0.0;
  for (double t : grid) {
    const bool now = post.log_density(t) >= log_k;
    if (now != inside) {
      const double c = refine_crossing(post, log_k, prev, t, inside);
      if (now) {
        open_at = c;
      } else if (c > open_at) {
        out.push_back({open_at, c});
      }
      inside = now;
    }
    prev = t;
  }
  if (inside && grid.back() > open_at) out.push_back({open_at, grid.back()});
  // Merge pieces that touch after refinement.
  std::vector<Interval> merged;
  for (const auto& iv : out) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  return IntervalUnion(std::move(merged));
}

CoverageRule rule_from_threshold(const GammaMixtureModel& model, double threshold, double beta, std::int64_t mc_draws,
                                 std::int64_t min_x_max) {
  require_finite_support(model, "build_rule");
  const std::int64_t x_max = std::max(model.tail_cutoff(kRuleTail), min_x_max);
  CoverageRule rule;
  rule.threshold = threshold;
  rule.beta = beta;
  rule.mc_draws = mc_draws;
  rule.model_ref = model_fingerprint(model);
  rule.sets.resize(static_cast<std::size_t>(x_max + 1));
  parallel_for(rule.sets.size(), [&](std::size_t x) {
    rule.sets[x] = threshold > 0.0 ? level_set(model, static_cast<std::int64_t>(x), threshold)
                                   : IntervalUnion({{0.0, level_set_grid(model, static_cast<std::int64_t>(x)).back()}});
  });
  return rule;
}

CoverageRule build_rule(const GammaMixtureModel& model, double beta, std::int64_t mc_draws, Rng& rng,
                        std::int64_t min_x_max) {
  const double k = estimate_threshold(model, beta, mc_draws, rng);
  return rule_from_threshold(model, k, beta, mc_draws, min_x_max);
}

bool contains(const GammaMixtureModel& model, double k, std::int64_t x, double theta) {
  if (k <= 0.0) return true;
  return model.posterior_log_density(theta, x) >= std::log(k);
}

double exact_coverage(const CoverageRule& rule, const GammaMixtureModel& truth) {
  require_finite_support(truth, "exact_coverage");
  const auto atoms = truth.support();
  const auto weights = truth.support_weights();
  double total = 0.0;
  for (std::int64_t x = 0; x <= rule.x_max(); ++x) {
    const auto& ivs = rule.set(x).intervals();
    if (ivs.empty()) continue;
    const double shape = static_cast<double>(x) + truth.kappa();
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      const double rate = atoms[j] + 1.0;
      double mass = 0.0;
      for (const auto& iv : ivs) {
        const double a = rate * iv.lo, b = rate * iv.hi;
        // Difference taken on whichever tail keeps precision.
        mass += a >= shape ? reg_upper_gamma(shape, a) - reg_upper_gamma(shape, b)
                           : reg_lower_gamma(shape, b) - reg_lower_gamma(shape, a);
      }
      total += weights[j] * std::exp(nb_log_kernel(truth.kappa(), atoms[j], x)) * mass;
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

std::pair<double, double> garwood_interval(std::int64_t x, double beta) {
  require_beta(beta, "garwood_interval");
  if (x < 0) throw DomainError("garwood_interval: negative count");
  const double xd = static_cast<double>(x);
  const double lo = x == 0 ? 0.0 : 0.5 * chi_square_quantile(beta / 2, 2 * xd);
  const double hi = 0.5 * chi_square_quantile(1 - beta / 2, 2 * xd + 2);
  return {lo, hi};
}

void write_rule_csv(const CoverageRule& rule, std::ostream& out) {
  out << "x,lo,hi,set_length\n";
  for (std::int64_t x = 0; x <= rule.x_max(); ++x) {
    const auto& s = rule.set(x);
    const std::string len = format_double(s.total_length());
    if (s.empty()) out << x << ",,," << len << '\n';
    for (const auto& iv : s.intervals()) {
      out << x << ',' << format_double(iv.lo) << ',' << format_double(iv.hi) << ',' << len << '\n';
    }
  }
}

}  // namespace gsnpmle
