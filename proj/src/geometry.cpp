#include "bbmtraps/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "bbmtraps/errors.hpp"

namespace bbmtraps {

double unit_ball_volume(int d) {
  if (d < 1) throw InvalidArgument("dimension must be positive");
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double unit_sphere_area(int d) { return d * unit_ball_volume(d); }

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double diff = x[i] - y[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double sphere_fraction_in_ball(int d, double rho, double b, double r) {
  if (rho <= 0.0) return b < r ? 1.0 : 0.0;
  if (d == 1) {
    double inside = 0.0;
    if (std::abs(rho - b) < r) inside += 0.5;
    if (std::abs(-rho - b) < r) inside += 0.5;
    return inside;
  }
  if (b == 0.0) return rho < r ? 1.0 : 0.0;
  // Points rho*u with u.e > t lie inside the ball.
  double t = (rho * rho + b * b - r * r) / (2.0 * rho * b);
  if (t <= -1.0) return 1.0;
  if (t >= 1.0) return 0.0;
  if (d == 2) return std::acos(t) / std::numbers::pi;
  if (d == 3) return 0.5 * (1.0 - t);
  double half = 0.5 * boost::math::ibeta(0.5 * (d - 1), 0.5, 1.0 - t * t);
  return t >= 0.0 ? half : 1.0 - half;
}

double radial_ball_integral(int d, double b, double r, const std::function<double(double)>& shell_weight,
                            std::span<const double> breakpoints, double tol) {
  if (r <= 0.0) return 0.0;
  const double top = b + r;
  std::vector<double> cuts{0.0, std::abs(r - b), b, top};
  for (double p : breakpoints)
    if (p > 0.0 && p < top) cuts.push_back(p);
  std::sort(cuts.begin(), cuts.end());
  // Cuts a few ulps apart would hand the integrator an interval it cannot resolve.
  const double merge = 1e-12 * top;
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [merge](double x, double y) { return y - x <= merge; }), cuts.end());
  cuts.back() = top;

  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  const double sd = unit_sphere_area(d);
  const double rel = std::max(tol / (sd * std::max(1.0, top)), 1e-15);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i];
    double hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    double probe = 0.5 * (lo + hi);
    if (sphere_fraction_in_ball(d, probe, b, r) == 0.0) continue;
    auto integrand = [&](double rho) { return shell_weight(rho) * sphere_fraction_in_ball(d, rho, b, r); };
    // centred so the integrator's endpoint guards are not lost to the offset
    const double mid = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    auto centred = [&](double u) { return integrand(mid + u); };
    double err = 0.0;
    double l1 = 0.0;
    total += integrator.integrate(centred, -h, h, rel, &err, &l1);
  }
  return sd * total;
}

}  // namespace bbmtraps
