#include "gsnpmle/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gsnpmle/errors.hpp"

namespace gsnpmle {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
constexpr int kMaxSeriesTerms = 100000;

// Godfrey's coefficients for g = 607/128.
constexpr double kLanczos[14] = {
    57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
    -0.491913816097620199,   .339946499848118887e-4,  .465236289270485756e-4,
    -.983744753048795646e-4, .158088703224912494e-3,  -.210264441724104883e-3,
    .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
    -.261908384015814087e-4, .368991826595316234e-5};

double lanczos_log_gamma(double x) {
  double y = x;
  double tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  for (double c : kLanczos) ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

// log of x^s e^{-x} / Gamma(s), the common prefactor of both expansions.
double log_prefactor(double s, double x) {
  return s * std::log(x) - x - log_gamma(s);
}

// P(s, x) by the power series, valid (fast) for x < s + 1.
double lower_series(double s, double x) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int n = 0; n < kMaxSeriesTerms; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(log_prefactor(s, x));
}

// Q(s, x) by the modified Lentz continued fraction, valid for x >= s + 1.
double upper_fraction(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor(s, x)) * h;
}

void check_gamma_args(double s, double x) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("incomplete gamma: shape must be positive");
  if (!(x >= 0.0) || std::isnan(x)) throw DomainError("incomplete gamma: x must be nonnegative");
}

// Derivative of P(s, y) in y: the Gamma(s, 1) density.
double gamma_density(double s, double y) {
  if (y <= 0.0) return s < 1.0 ? std::numeric_limits<double>::infinity() : (s == 1.0 ? 1.0 : 0.0);
  return std::exp((s - 1.0) * std::log(y) - y - log_gamma(s));
}

// Solves cdf(y) = target on [0, inf) where cdf is P or Q (upper = true),
// using Newton steps safeguarded by a shrinking bracket.
double invert_gamma(double target, double shape, bool upper) {
  auto residual = [&](double y) {
    return upper ? reg_upper_gamma(shape, y) - target : reg_lower_gamma(shape, y) - target;
  };
  // residual is increasing in y for P, decreasing for Q; normalize to increasing.
  const double sign = upper ? -1.0 : 1.0;

  double lo = 0.0;
  double hi = std::max(1.0, shape);
  while (sign * residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw DomainError("gamma quantile: bracket overflow");
  }

  // Wilson-Hilferty starting point, clipped to the bracket.
  const double p_lower = upper ? 1.0 - target : target;
  double y = hi * 0.5;
  if (p_lower > 0.0 && p_lower < 1.0) {
    const double z = normal_quantile(p_lower);
    const double t = 1.0 / (9.0 * shape);
    const double wh = shape * std::pow(1.0 - t + z * std::sqrt(t), 3.0);
    if (wh > lo && wh < hi) y = wh;
  }

  for (int it = 0; it < 400; ++it) {
    const double r = sign * residual(y);
    if (r == 0.0) return y;
    if (r < 0.0) lo = y; else hi = y;
    const double dens = gamma_density(shape, y);
    double next = (dens > 0.0 && std::isfinite(dens)) ? y - r / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= 1e-15 * std::max(1.0, y) || hi - lo <= 4 * kEps * hi) return next;
    y = next;
  }
  return y;
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || std::isnan(x)) throw DomainError("log_gamma: argument must be positive");
  if (std::isinf(x)) return x;
  // The Lanczos sum loses relative accuracy near the pole; shift by one.
  if (x < 0.5) return lanczos_log_gamma(x + 1.0) - std::log(x);
  return lanczos_log_gamma(x);
}

double log_factorial(double x) {
  if (x < 0.0) throw DomainError("log_factorial: negative argument");
  if (x < 2.0) return 0.0;
  return log_gamma(x + 1.0);
}

double reg_lower_gamma(double s, double x) {
  check_gamma_args(s, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return std::min(1.0, lower_series(s, x));
  return std::clamp(1.0 - upper_fraction(s, x), 0.0, 1.0);
}

double reg_upper_gamma(double s, double x) {
  check_gamma_args(s, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < s + 1.0) return std::clamp(1.0 - lower_series(s, x), 0.0, 1.0);
  return std::min(1.0, upper_fraction(s, x));
}

double gamma_quantile(double p, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("gamma_quantile: shape must be positive");
  if (!(p >= 0.0) || p >= 1.0) throw DomainError("gamma_quantile: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;
  if (p > 0.5) return invert_gamma(1.0 - p, shape, true);
  return invert_gamma(p, shape, false);
}

double gamma_upper_quantile(double q, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("gamma_upper_quantile: shape must be positive");
  if (!(q > 0.0) || q > 1.0) throw DomainError("gamma_upper_quantile: q must lie in (0, 1]");
  if (q == 1.0) return 0.0;
  if (q < 0.5) return invert_gamma(q, shape, true);
  return invert_gamma(1.0 - q, shape, false);
}

double chi_square_quantile(double p, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) throw DomainError("chi_square_quantile: df must be positive");
  if (p >= 1.0) throw DomainError("chi_square_quantile: p = 1 has an infinite quantile");
  return 2.0 * gamma_quantile(p, 0.5 * df);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // One Halley step brings the rational approximation to full precision.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

double log_sum_exp(const double* first, const double* last) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const double* it = first; it != last; ++it) mx = std::max(mx, *it);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (const double* it = first; it != last; ++it) sum += std::exp(*it - mx);
  return mx + std::log(sum);
}

}  // namespace gsnpmle
