#include "bbmtraps/branching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bbmtraps/errors.hpp"

namespace bbmtraps {

namespace {

constexpr double kSumTolerance = 1e-12;

double binomial_coefficient(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

OffspringLaw::OffspringLaw(const std::map<int, double>& probs, LawCheck check) {
  if (probs.empty()) throw InvalidArgument("offspring law has no entries");
  if (probs.begin()->first < 0) throw InvalidArgument("offspring counts must be non-negative");
  probs_.assign(static_cast<std::size_t>(probs.rbegin()->first) + 1, 0.0);
  for (auto [k, p] : probs) probs_[static_cast<std::size_t>(k)] = p;
  validate(check);
}

OffspringLaw::OffspringLaw(std::vector<double> probs, LawCheck check) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("offspring law has no entries");
  validate(check);
}

OffspringLaw OffspringLaw::dyadic() { return OffspringLaw(std::vector<double>{0.0, 0.0, 1.0}); }

void OffspringLaw::validate(LawCheck check) {
  double sum = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k) {
    double p = probs_[k];
    if (!std::isfinite(p) || p < 0.0) {
      std::ostringstream msg;
      msg << "offspring probability p_" << k << " = " << p << " is not a probability";
      throw InvalidArgument(msg.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "offspring probabilities sum to " << sum << ", not 1";
    throw InvalidArgument(msg.str());
  }
  if (check == LawCheck::kStrict && probs_.size() > 1 && probs_[1] != 0.0)
    throw InvalidArgument("offspring law must have p_1 = 0");

  while (probs_.size() > 1 && probs_.back() == 0.0) probs_.pop_back();

  mean_ = 0.0;
  for (std::size_t k = 0; k < probs_.size(); ++k) mean_ += static_cast<double>(k) * probs_[k];
  cumulative_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

double OffspringLaw::prob(int k) const {
  if (k < 0 || k >= static_cast<int>(probs_.size())) return 0.0;
  return probs_[static_cast<std::size_t>(k)];
}

double OffspringLaw::pgf(double s) const {
  double acc = 0.0;
  for (auto it = probs_.rbegin(); it != probs_.rend(); ++it) acc = acc * s + *it;
  return acc;
}

double OffspringLaw::pgf_derivative(double s) const {
  double acc = 0.0;
  for (std::size_t k = probs_.size() - 1; k >= 1; --k) acc = acc * s + static_cast<double>(k) * probs_[k];
  return acc;
}

int OffspringLaw::sample(RngStream& rng) const {
  double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return static_cast<int>(it - cumulative_.begin());
}

std::map<int, double> OffspringLaw::to_map() const {
  std::map<int, double> out;
  for (std::size_t k = 0; k < probs_.size(); ++k)
    if (probs_[k] > 0.0) out[static_cast<int>(k)] = probs_[k];
  return out;
}

void BranchingParams::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) throw InvalidArgument("branching rate beta must be >= 0");
}

double extinction_probability(const OffspringLaw& law, double tol) {
  if (!(tol > 0.0)) throw DomainError("extinction_probability: tol must be positive");
  if (law.prob(0) == 0.0) return 0.0;
  if (!law.supercritical()) return 1.0;

  // g(s) = f(s) - s is convex with g(0) = p_0 > 0 and g'(1) = mu - 1 > 0, so it
  // is negative at the point where f'(s) = 1 and the smallest root lies left of it.
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (law.pgf_derivative(mid) < 1.0 ? lo : hi) = mid;
  }
  const double bracket_top = lo;

  lo = 0.0;
  hi = bracket_top;
  for (int i = 0; i < 2000; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (law.pgf(mid) - mid > 0.0 ? lo : hi) = mid;
    if (hi - lo <= tol * 1e-3) break;
  }
  double q = 0.5 * (lo + hi);
  if (std::abs(law.pgf(q) - q) > tol) throw ConvergenceError("extinction_probability: fixed point residual above tol");
  return q;
}

double extinction_by_time(const OffspringLaw& law, double beta, double horizon) {
  if (horizon < 0.0) throw DomainError("extinction_by_time: negative horizon");
  if (law.prob(0) == 0.0) return 0.0;
  if (beta == 0.0 || horizon == 0.0) return 0.0;
  auto rhs = [&](double u) { return beta * (law.pgf(u) - u); };
  const auto steps = static_cast<long>(std::ceil(beta * horizon / 1e-3));
  const double h = horizon / static_cast<double>(steps);
  double u = 0.0;
  for (long i = 0; i < steps; ++i) {
    double k1 = rhs(u);
    double k2 = rhs(u + 0.5 * h * k1);
    double k3 = rhs(u + 0.5 * h * k2);
    double k4 = rhs(u + h * k3);
    u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return std::clamp(u, 0.0, 1.0);
}

SkeletonParams skeleton_decomposition(const BranchingParams& params) {
  params.validate();
  const OffspringLaw& law = params.law;
  if (!law.supercritical()) {
    std::ostringstream msg;
    msg << "skeleton decomposition needs mean offspring > 1, got " << law.mean();
    throw SubcriticalError(msg.str());
  }
  SkeletonParams out;
  const double q = extinction_probability(law);
  out.q = q;
  out.alpha = 1.0 - law.pgf_derivative(q);
  out.effective_rate = params.beta * out.alpha;
  out.rho = (law.pgf_derivative(1.0) - law.pgf_derivative(q)) * q / (1.0 - q);

  const int kmax = law.max_offspring();
  // Skeleton children: f*(s) = [f(q + (1-q)s) - q] / (1-q).
  std::vector<double> skel(static_cast<std::size_t>(kmax) + 1, 0.0);
  // Joint law of (skeleton, doomed) children of a skeleton particle:
  // p_{s+d} C(s+d, s) (1-q)^s q^d / (1-q), s >= 1.
  double cumulative = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    double pk = law.prob(k);
    if (pk == 0.0) continue;
    for (int s = 1; s <= k; ++s) {
      double w = pk * binomial_coefficient(k, s) * std::pow(1.0 - q, s) * std::pow(q, k - s) / (1.0 - q);
      if (w == 0.0) continue;
      skel[static_cast<std::size_t>(s)] += w;
      cumulative += w;
      out.joint.push_back({{s, k - s}, cumulative});
    }
  }
  double total = std::accumulate(skel.begin(), skel.end(), 0.0);
  for (auto& p : skel) p /= total;
  for (auto& j : out.joint) j.cumulative /= cumulative;
  out.skeleton_law = OffspringLaw(std::move(skel), LawCheck::kDerived);

  // Doomed subtrees: f(qs)/q, i.e. p_k q^{k-1}.
  if (q > 0.0) {
    std::vector<double> doomed(static_cast<std::size_t>(kmax) + 1, 0.0);
    for (int k = 0; k <= kmax; ++k) doomed[static_cast<std::size_t>(k)] = law.prob(k) * std::pow(q, k - 1);
    double dsum = std::accumulate(doomed.begin(), doomed.end(), 0.0);
    for (auto& p : doomed) p /= dsum;
    out.doomed_law = OffspringLaw(std::move(doomed), LawCheck::kDerived);
  } else {
    out.doomed_law = OffspringLaw(std::vector<double>{1.0}, LawCheck::kDerived);
  }
  return out;
}

SkeletonBranch SkeletonParams::sample_branch(RngStream& rng) const {
  double u = rng.uniform();
  for (const auto& j : joint)
    if (u <= j.cumulative) return j.counts;
  return joint.back().counts;
}

double yule_tail(double beta, double t, long k) {
  if (beta <= 0.0 || t < 0.0 || k < 0) throw DomainError("yule_tail: need beta > 0, t >= 0, k >= 0");
  if (k == 0) return 1.0;
  return std::pow(-std::expm1(-beta * t), static_cast<double>(k));
}

double subcritical_survival_bound(double beta, double m, double t) {
  if (m >= 0.0) throw DomainError("subcritical_survival_bound: requires m < 0");
  if (beta <= 0.0 || t < 0.0) throw DomainError("subcritical_survival_bound: need beta > 0, t >= 0");
  return std::exp(beta * m * t);
}

double poisson_tail_exponent(double z) {
  if (!(z > 0.0 && z < 1.0)) throw DomainError("poisson_tail_exponent: z must lie in (0, 1)");
  return 1.0 - (1.0 + std::log(z)) / z;
}

double poisson_tail_bound(double lambda, double x) {
  if (!(lambda > 0.0)) throw DomainError("poisson_tail_bound: lambda must be positive");
  if (!(x > lambda)) throw DomainError("poisson_tail_bound: requires x > lambda");
  return std::exp(-lambda * poisson_tail_exponent(lambda / x));
}

long sample_population(const BranchingParams& params, double t, RngStream& rng, long max_population) {
  params.validate();
  if (t < 0.0) throw DomainError("sample_population: negative time");
  long n = 1;
  if (params.beta == 0.0) return n;
  double now = 0.0;
  while (n > 0) {
    now += rng.exponential(params.beta * static_cast<double>(n));
    if (now > t) break;
    n += params.law.sample(rng) - 1;
    if (n > max_population) throw CapacityError("sample_population: population cap exceeded");
  }
  return n;
}

bool extinct_within_generations(const OffspringLaw& law, int generations, RngStream& rng, long population_cap) {
  long n = 1;
  for (int g = 0; g < generations; ++g) {
    if (n == 0) return true;
    if (n > population_cap) return false;
    long next = 0;
    for (long i = 0; i < n; ++i) next += law.sample(rng);
    n = next;
  }
  return n == 0;
}

}  // namespace bbmtraps
