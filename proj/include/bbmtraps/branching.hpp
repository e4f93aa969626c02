#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "bbmtraps/rng.hpp"

namespace bbmtraps {

/// Which construction invariants an offspring law must satisfy. User-facing
/// laws forbid a single child (p_1 = 0); laws derived internally by the
/// skeleton decomposition legitimately carry mass at 1.
enum class LawCheck { kStrict, kDerived };

/// Finite-support offspring distribution (p_k) with its generating function.
class OffspringLaw {
 public:
  explicit OffspringLaw(const std::map<int, double>& probs, LawCheck check = LawCheck::kStrict);
  explicit OffspringLaw(std::vector<double> probs, LawCheck check = LawCheck::kStrict);

  /// Strictly dyadic branching, p_2 = 1.
  static OffspringLaw dyadic();

  std::span<const double> probs() const { return probs_; }
  double prob(int k) const;
  int max_offspring() const { return static_cast<int>(probs_.size()) - 1; }

  /// f(s) = sum_k p_k s^k
  double pgf(double s) const;
  /// f'(s)
  double pgf_derivative(double s) const;

  /// mu = f'(1)
  double mean() const { return mean_; }
  /// m = mu - 1, the net growth per branching event.
  double net_growth() const { return mean_ - 1.0; }
  bool supercritical() const { return mean_ > 1.0; }

  int sample(RngStream& rng) const;

  std::map<int, double> to_map() const;

 private:
  void validate(LawCheck check);

  std::vector<double> probs_;
  std::vector<double> cumulative_;
  double mean_ = 0.0;
};

struct BranchingParams {
  OffspringLaw law = OffspringLaw::dyadic();
  double beta = 1.0;  ///< branching rate; 0 means a single Brownian particle

  void validate() const;
};

/// Joint outcome of one branching event of a skeleton particle.
struct SkeletonBranch {
  int skeleton = 1;
  int doomed = 0;
};

/// Skeleton/doomed decomposition of a supercritical law. Skeleton particles
/// have infinite lines of descent; doomed subtrees are subcritical.
struct SkeletonParams {
  double q = 0.0;               ///< extinction probability
  double alpha = 1.0;           ///< 1 - f'(q)
  double effective_rate = 0.0;  ///< beta * alpha
  double rho = 0.0;             ///< expected doomed offspring per skeleton branch event
  OffspringLaw skeleton_law = OffspringLaw::dyadic();
  OffspringLaw doomed_law = OffspringLaw::dyadic();

  /// Draw (skeleton children, doomed children) at a skeleton branch event.
  /// At least one child is always a skeleton particle.
  SkeletonBranch sample_branch(RngStream& rng) const;

  struct JointOutcome {
    SkeletonBranch counts;
    double cumulative;
  };
  std::vector<JointOutcome> joint;
};

/// Smallest fixed point of f on [0, 1]. Returns 1 for mu <= 1 and 0 for p_0 = 0.
double extinction_probability(const OffspringLaw& law, double tol = 1e-14);

/// P(line of descent of one particle is extinct by time horizon), from
/// u' = beta (f(u) - u), u(0) = 0.
double extinction_by_time(const OffspringLaw& law, double beta, double horizon);

/// Throws SubcriticalError when mu <= 1.
SkeletonParams skeleton_decomposition(const BranchingParams& params);

/// P(N(t) > k) = (1 - e^{-beta t})^k for strictly dyadic branching.
double yule_tail(double beta, double t, long k);

/// e^{beta m t}; upper bound on P(|Z(t)| > 0) for a subcritical process.
double subcritical_survival_bound(double beta, double m, double t);

/// Chernoff bound e^{-lambda k(lambda/x)} on P(Y >= x), Y ~ Poisson(lambda),
/// with k(z) = 1 - (1 + log z)/z.
double poisson_tail_bound(double lambda, double x);
double poisson_tail_exponent(double z);

/// One draw of |Z(t)| for the continuous-time Galton-Watson process.
/// Throws CapacityError when the population exceeds max_population.
long sample_population(const BranchingParams& params, double t, RngStream& rng,
                       long max_population = 10'000'000);

/// Generation-by-generation Galton-Watson run. Returns true when the process
/// died out within `generations`; populations above `population_cap` are
/// declared surviving.
bool extinct_within_generations(const OffspringLaw& law, int generations, RngStream& rng,
                                long population_cap = 2000);

}  // namespace bbmtraps
