#pragma once

// Special functions used throughout the library. All routines are
// self-contained (no libm lgamma) so results do not depend on the platform's
// math library beyond exp/log.

namespace gsnpmle {

/// ln Gamma(x) for x > 0 (Lanczos, g = 607/128, 14 terms).
double log_gamma(double x);

/// ln(x!) for integer-valued x >= 0.
double log_factorial(double x);

/// Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s).
double reg_lower_gamma(double s, double x);

/// Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x), computed
/// directly so that tiny upper tails keep full relative precision.
double reg_upper_gamma(double s, double x);

/// Quantile of the unit-rate Gamma(shape) law: returns y with P(shape, y) = p.
/// p in [0, 1); p = 1 throws DomainError.
double gamma_quantile(double p, double shape);

/// Upper quantile: returns y with Q(shape, y) = q, q in (0, 1].
double gamma_upper_quantile(double q, double shape);

/// Chi-square quantile: q with P(df/2, q/2) = p.
double chi_square_quantile(double p, double df);

/// Standard normal cdf and its complement.
double normal_cdf(double z);

/// Standard normal quantile (Acklam rational start plus Halley refinement).
double normal_quantile(double p);

/// log(sum(exp(v))) over a contiguous range; returns -inf for an empty range or
/// when every term is -inf.
double log_sum_exp(const double* first, const double* last);

}  // namespace gsnpmle
