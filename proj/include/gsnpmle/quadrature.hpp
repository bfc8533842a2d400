#pragma once

#include <functional>
#include <span>

namespace gsnpmle {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature on [a, b]: the panel with
/// the largest error estimate is bisected until the summed estimate drops
/// below abs_tol or the panel budget runs out. Endpoints are never evaluated,
/// so integrable endpoint singularities are tolerated.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                           int max_panels = 4000);

/// Same rule over consecutive panels [b0, b1], [b1, b2], ... given as sorted
/// breakpoints. The tolerance applies to the total.
QuadratureResult integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breakpoints,
                                     double abs_tol, int max_panels = 4000);

}  // namespace gsnpmle
