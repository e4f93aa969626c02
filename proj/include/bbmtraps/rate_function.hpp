#pragma once

#include <vector>

namespace bbmtraps {

/// Parameters of the variational rate problem.
struct RateProblem {
  double l = 1.0;      ///< radial trap intensity constant
  double beta = 1.0;   ///< branching rate
  double m = 1.0;      ///< mean offspring minus one
  double alpha = 1.0;  ///< skeleton rate factor 1 - f'(q)
  int d = 1;

  void validate() const;
  double max_speed() const;   ///< sqrt(2 beta), upper bound of c
  double free_speed() const;  ///< sqrt(2 beta m), spread of freely branching BBM
};

struct RateResult {
  double value = 0.0;     ///< I
  double eta_star = 0.0;  ///< fraction of time with branching suppressed
  double c_star = 0.0;    ///< drift speed of the surviving line
  int grid_size = 0;          ///< eta nodes scanned
  int refinement_sweeps = 0;
  double certified_gap = 0.0;  ///< best improvement found on a stencil around the minimizer
};

/// g_d(r, b) = integral over B(0, r) of |x + b e|^{1-d} dx, absolute error <= tol.
double g_d(int d, double r, double b, double tol = 1e-10);

/// beta alpha eta + c^2/(2 eta) + l g_d(sqrt(2 beta m)(1 - eta), c).
/// eta = 0 is a symbolic case: c = 0 contributes 0, c > 0 gives +inf.
double objective(const RateProblem& problem, double eta, double c, double tol = 1e-10);

/// Profile minimization: for each eta the best c comes from a node scan plus
/// golden section; the eta profile is scanned and refined the same way.
/// Ties resolve toward smaller eta, then smaller c.
RateResult minimize_variational(const RateProblem& problem, double tol = 1e-9);

enum class CriticalMethod {
  kAuto,       ///< closed form in d = 1, bisection otherwise
  kBisection,  ///< bisection on the departure of eta* from 0, any d
};

/// Critical intensity at which eta* leaves 0. The `l` field of `problem` is ignored.
double critical_intensity(const RateProblem& problem, double tol = 1e-9,
                          CriticalMethod method = CriticalMethod::kAuto);

/// Annealed decay exponent beta alpha for a uniform field.
double uniform_rate(double beta, double alpha);

struct AvoidanceBound {
  double rate = 0.0;       ///< beta eps (sqrt(m^2 + m) - m)
  double optimal_k = 0.0;  ///< m + sqrt(m^2 + m)
};

/// Exponent of the upper bound on the probability of avoiding a single trap
/// placed at distance sqrt(2 beta m)(1 - eps) t.
AvoidanceBound avoidance_bound(double beta, double m, double epsilon);

struct PhasePoint {
  double l;
  RateResult result;
};

/// Sweep l over `ls`, solving the variational problem at each point.
std::vector<PhasePoint> phase_diagram(RateProblem problem, const std::vector<double>& ls, double tol = 1e-9);

}  // namespace bbmtraps
