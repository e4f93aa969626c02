#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bbmtraps {

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);
/// Surface measure of the unit sphere in R^d (d * unit_ball_volume(d)).
double unit_sphere_area(int d);

double norm(std::span<const double> x);
double distance(std::span<const double> x, std::span<const double> y);

/// Fraction of the sphere |y| = rho lying inside the open ball B(b e, r).
double sphere_fraction_in_ball(int d, double rho, double b, double r);

/// Integral of a radially symmetric function over B(b e, r):
///   s_d * int_0^{b+r} shell_weight(rho) * fraction(rho) d rho,
/// where shell_weight(rho) = h(rho) rho^{d-1}. Shells are centred at the
/// origin, so an integrable singularity of h at 0 never reaches the
/// quadrature. `breakpoints` lists radii where shell_weight has kinks.
double radial_ball_integral(int d, double b, double r, const std::function<double(double)>& shell_weight,
                            std::span<const double> breakpoints, double tol);

}  // namespace bbmtraps
