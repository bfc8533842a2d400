#include "gsnpmle/quadrature.hpp"

#include <cmath>
#include <queue>
#include <vector>

#include "gsnpmle/errors.hpp"

namespace gsnpmle {
namespace {

// QUADPACK qk15 nodes and weights.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel kronrod15(const std::function<double(double)>& f, double a, double b, int& evals) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    resk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  evals += 15;
  return {a, b, resk * half, std::abs((resk - resg) * half)};
}

}  // namespace

QuadratureResult integrate_piecewise(const std::function<double(double)>& f, std::span<const double> breakpoints,
                                     double abs_tol, int max_panels) {
  if (breakpoints.size() < 2) throw DomainError("integrate: need at least two breakpoints");
  QuadratureResult out;
  std::priority_queue<Panel> queue;
  double total = 0.0;
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] >= breakpoints[i])) throw DomainError("integrate: breakpoints must be sorted");
    if (breakpoints[i + 1] == breakpoints[i]) continue;
    Panel p = kronrod15(f, breakpoints[i], breakpoints[i + 1], out.evaluations);
    total += p.value;
    total_error += p.error;
    queue.push(p);
  }
  int panels = static_cast<int>(queue.size());
  while (total_error > abs_tol && panels < max_panels && !queue.empty()) {
    const Panel worst = queue.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // panel below floating-point resolution
    queue.pop();
    const Panel left = kronrod15(f, worst.a, mid, out.evaluations);
    const Panel right = kronrod15(f, mid, worst.b, out.evaluations);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of the incremental updates.
  total = 0.0;
  total_error = 0.0;
  while (!queue.empty()) {
    total += queue.top().value;
    total_error += queue.top().error;
    queue.pop();
  }
  out.value = total;
  out.error = total_error;
  return out;
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                           int max_panels) {
  const double bp[2] = {a, b};
  return integrate_piecewise(f, bp, abs_tol, max_panels);
}

}  // namespace gsnpmle
