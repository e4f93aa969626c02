#include "bbmtraps/rate_function.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "bbmtraps/errors.hpp"
#include "bbmtraps/geometry.hpp"

namespace bbmtraps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGridSize = 64;
constexpr int kGeometricLevels = 40;
constexpr double kGolden = 0.6180339887498949;

struct Candidate {
  double value = kInf;
  double eta = 0.0;
  double c = 0.0;
};

// Strictly better, or equal and earlier in (eta, c) order.
bool better(const Candidate& x, const Candidate& y) {
  if (x.value != y.value) return x.value < y.value;
  if (x.eta != y.eta) return x.eta < y.eta;
  return x.c < y.c;
}

// Minimizes f on [lo, hi]: golden-section in the interior plus both ends.
template <class F>
std::pair<double, double> golden_section(F&& f, double lo, double hi) {
  double best_x = lo;
  double best_f = f(lo);
  auto consider = [&](double x, double fx) {
    if (fx < best_f || (fx == best_f && x < best_x)) {
      best_x = x;
      best_f = fx;
    }
  };
  if (hi > lo) {
    consider(hi, f(hi));
    double a = lo;
    double b = hi;
    double x1 = b - kGolden * (b - a);
    double x2 = a + kGolden * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kGolden * (b - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kGolden * (b - a);
        f2 = f(x2);
      }
    }
    consider(x1, f1);
    consider(x2, f2);
  }
  return {best_x, best_f};
}

// Uniform nodes on [0, top] plus geometric ones toward 0 and, if asked, toward top.
std::vector<double> nodes(double top, bool both_ends) {
  std::vector<double> x;
  for (int i = 0; i < kGridSize; ++i) x.push_back(top * static_cast<double>(i) / (kGridSize - 1));
  for (int k = 1; k <= kGeometricLevels; ++k) {
    const double h = top * std::ldexp(1.0, -k);
    x.push_back(h);
    if (both_ends) x.push_back(top - h);
  }
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  return x;
}

}  // namespace

void RateProblem::validate() const {
  if (d < 1) throw DomainError("rate problem: dimension must be positive");
  if (!(l > 0.0)) throw DomainError("rate problem: l must be positive");
  if (!(beta > 0.0)) throw DomainError("rate problem: beta must be positive");
  if (!(m > 0.0)) throw DomainError("rate problem: m must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("rate problem: alpha must lie in (0, 1]");
}

double RateProblem::max_speed() const { return std::sqrt(2.0 * beta); }
double RateProblem::free_speed() const { return std::sqrt(2.0 * beta * m); }

double g_d(int d, double r, double b, double tol) {
  if (d < 1) throw DomainError("g_d: dimension must be positive");
  if (r < 0.0 || b < 0.0) throw DomainError("g_d: r and b must be non-negative");
  if (!(tol > 0.0)) throw DomainError("g_d: tol must be positive");
  if (r == 0.0) return 0.0;
  if (d == 1) return 2.0 * r;
  if (b == 0.0) return unit_sphere_area(d) * r;
  // Far field: the ball average of |x + b e|^{1-d} is b^{1-d} (1 + O(r^2/b^2)).
  // Quadrature nodes would collapse onto [b - r, b + r] here.
  if (r <= 1e-4 * b) return unit_ball_volume(d) * std::pow(r, d) * std::pow(b, 1.0 - d);
  // Shells centred at the singular point -b e carry weight rho^{1-d} rho^{d-1} = 1.
  auto unit = [](double) { return 1.0; };
  return radial_ball_integral(d, b, r, unit, {}, tol);
}

double objective(const RateProblem& p, double eta, double c, double tol) {
  if (eta < 0.0 || eta > 1.0) throw DomainError("objective: eta outside [0, 1]");
  if (c < 0.0 || c > p.max_speed() * (1.0 + 1e-12)) throw DomainError("objective: c outside [0, sqrt(2 beta)]");
  double drift = 0.0;
  if (eta == 0.0) {
    if (c > 0.0) return kInf;
  } else {
    drift = c * c / (2.0 * eta);
  }
  const double radius = p.free_speed() * (1.0 - eta);
  return p.beta * p.alpha * eta + drift + p.l * g_d(p.d, radius, c, tol);
}

RateResult minimize_variational(const RateProblem& p, double tol) {
  p.validate();
  if (!(tol > 0.0)) throw DomainError("minimize_variational: tol must be positive");
  const double cmax = p.max_speed();
  const double gd_tol = std::min(1e-12, tol * 1e-3);
  auto f = [&](double eta, double c) { return objective(p, eta, std::clamp(c, 0.0, cmax), gd_tol); };

  // In d >= 2 the minimum can sit very close to eta = 1 with a small drift,
  // so both axes get geometric nodes toward their ends.
  const std::vector<double> eta_nodes = nodes(1.0, true);
  const std::vector<double> c_nodes = nodes(cmax, false);

  // Minimum over c for fixed eta: scan, then golden section between the
  // neighbours of the best node.
  auto profile = [&](double eta) {
    Candidate best{f(eta, 0.0), eta, 0.0};
    if (eta == 0.0) return best;
    std::size_t at = 0;
    for (std::size_t k = 1; k < c_nodes.size(); ++k) {
      Candidate cand{f(eta, c_nodes[k]), eta, c_nodes[k]};
      if (better(cand, best)) {
        best = cand;
        at = k;
      }
    }
    auto [c, v] = golden_section([&](double x) { return f(eta, x); }, c_nodes[at == 0 ? 0 : at - 1],
                                 c_nodes[std::min(at + 1, c_nodes.size() - 1)]);
    Candidate cand{v, eta, c};
    if (better(cand, best)) best = cand;
    return best;
  };

  Candidate scanned;
  std::size_t at = 0;
  for (std::size_t k = 0; k < eta_nodes.size(); ++k) {
    Candidate cand = profile(eta_nodes[k]);
    if (better(cand, scanned)) {
      scanned = cand;
      at = k;
    }
  }
  Candidate cur = scanned;
  const double lo = eta_nodes[at == 0 ? 0 : at - 1];
  const double hi = eta_nodes[std::min(at + 1, eta_nodes.size() - 1)];
  auto [eta, v] = golden_section([&](double e) { return profile(e).value; }, lo, hi);
  Candidate refined = profile(eta);
  if (better(refined, cur)) cur = refined;
  if (!std::isfinite(cur.value)) throw ConvergenceError("minimize_variational: objective is not finite at the minimum");

  // Local audit: no point of a small stencil around the minimizer does better.
  double gap = 0.0;
  for (double h : {1e-3, 1e-5}) {
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        const double e = std::clamp(cur.eta + a * h, 0.0, 1.0);
        const double c = std::clamp(cur.c + b * h * cmax, 0.0, cmax);
        gap = std::max(gap, cur.value - f(e, c));
      }
  }
  if (gap > tol) {
    std::ostringstream msg;
    msg << "minimize_variational: stencil around the minimizer improves the value by " << gap;
    throw ConvergenceError(msg.str());
  }

  RateResult out;
  out.value = cur.value;
  out.eta_star = cur.eta;
  out.c_star = cur.c;
  out.grid_size = static_cast<int>(eta_nodes.size());
  out.refinement_sweeps = 1;
  out.certified_gap = gap;
  return out;
}

double critical_intensity(const RateProblem& problem, double tol, CriticalMethod method) {
  RateProblem p = problem;
  p.l = 1.0;
  p.validate();
  if (!(tol > 0.0)) throw DomainError("critical_intensity: tol must be positive");
  if (method == CriticalMethod::kAuto && p.d == 1)
    return 0.5 * p.alpha * std::sqrt(p.beta / (2.0 * p.m));

  const double threshold = 10.0 * tol;
  auto departed = [&](double l) {
    p.l = l;
    return minimize_variational(p, tol).eta_star > threshold;
  };
  // Linear crossover of the eta = 0 corner; the true departure is not far from it.
  double hi = p.beta * p.alpha / (unit_sphere_area(p.d) * p.free_speed());
  double lo = 0.0;
  int expansions = 0;
  while (!departed(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 60) throw ConvergenceError("critical_intensity: eta* never leaves 0");
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    (departed(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double uniform_rate(double beta, double alpha) {
  if (!(beta > 0.0)) throw DomainError("uniform_rate: beta must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("uniform_rate: alpha must lie in (0, 1]");
  return beta * alpha;
}

AvoidanceBound avoidance_bound(double beta, double m, double epsilon) {
  if (!(beta > 0.0) || !(m > 0.0)) throw DomainError("avoidance_bound: beta and m must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("avoidance_bound: epsilon must lie in (0, 1]");
  const double root = std::sqrt(m * m + m);
  // sqrt(m^2 + m) - m written without cancellation.
  return {beta * epsilon * m / (root + m), m + root};
}

std::vector<PhasePoint> phase_diagram(RateProblem problem, const std::vector<double>& ls, double tol) {
  std::vector<PhasePoint> out;
  out.reserve(ls.size());
  for (double l : ls) {
    problem.l = l;
    out.push_back({l, minimize_variational(problem, tol)});
  }
  return out;
}

}  // namespace bbmtraps
