#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbmtraps/simulator.hpp"
#include "bbmtraps/trap_field.hpp"

namespace bbmtraps {

enum class Conditioning {
  kNone,      ///< every non-truncated replicate is accepted
  kSurvival,  ///< accept replicates with T > t and the non-extinction proxy
};

/// Radius of the ball probed for traps: eps t or eps t^{1/d}.
enum class BallRule { kEpsT, kEpsTRoot };

struct MCConfig {
  long replicates = 1000;
  std::uint64_t seed = 0;
  SimulationConfig simulation;
  TrapFieldSpec field;
  Conditioning conditioning = Conditioning::kSurvival;
  int jobs = 1;
  /// Non-extinction proxy: survive to horizon + lookahead. Negative selects
  /// the default 20 / (beta alpha).
  double lookahead = -1.0;
  double max_truncated_fraction = 0.01;
  double acceptance_floor = 1e-4;

  void validate() const;
  double resolved_lookahead() const;
};

struct EstimateResult {
  std::string statistic;
  double t = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  long n_total = 0;
  long n_accepted = 0;
  long n_truncated = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct Statistic {
  enum class Kind { kSurvival, kPopulation, kRange, kTrapPresence };
  Kind kind = Kind::kSurvival;
  double t = 1.0;
  double s_fraction = 0.5;  ///< population probe time is s_fraction * t
  double epsilon = 1.0;     ///< range and trap-presence ball scale
  BallRule rule = BallRule::kEpsT;

  static Statistic survival(double t) { return {Kind::kSurvival, t}; }
  static Statistic population(double t, double s_fraction) { return {Kind::kPopulation, t, s_fraction}; }
  static Statistic range(double t, double epsilon) { return {Kind::kRange, t, 0.5, epsilon}; }
  static Statistic trap_presence(double t, double epsilon, BallRule rule) {
    return {Kind::kTrapPresence, t, 0.5, epsilon, rule};
  }
};

/// Everything produced for one replicate, kept for coupled comparisons.
struct ReplicateOutcome {
  ParticleTree tree;
  std::optional<TrapField> field;
  std::optional<double> trap_time;
  bool non_extinct = true;
};

/// Replicate i of the experiment: tree, field and trapping time drawn from
/// named substreams of (seed, i). `probe_radius` widens the field window.
ReplicateOutcome run_replicate(const MCConfig& cfg, long index, double probe_radius = 0.0);

/// One pass over the replicates evaluating every statistic on the same
/// (tree, field) pairs. Population statistics expand to several rows.
std::vector<EstimateResult> evaluate_statistics(const MCConfig& cfg, const std::vector<Statistic>& stats);

EstimateResult estimate_annealed_survival(const MCConfig& cfg, double t);

struct PopulationEstimate {
  EstimateResult single;                ///< P(|Z(s t)| = 1 | accepted)
  std::optional<EstimateResult> skeleton_single;  ///< TwoType: P(|Z1| = 1)
  std::optional<EstimateResult> doomed_small;     ///< TwoType: P(|Z2| <= log t)
  std::map<long, long> total_histogram;
  std::map<std::pair<long, long>, long> joint_histogram;  ///< TwoType (skeleton, doomed)
};

PopulationEstimate estimate_conditional_population(const MCConfig& cfg, double t, double s_fraction);

/// Frequency of {range radius at t <= eps t} among accepted replicates.
EstimateResult estimate_conditional_range(const MCConfig& cfg, double t, double epsilon);

/// Frequency that the probe ball around the origin meets the trap set K.
EstimateResult estimate_trap_presence_given_survival(const MCConfig& cfg, double t, double epsilon, BallRule rule);

/// Per-replicate survival indicators on a time grid from one shared run.
/// Rows are replicates; truncated replicates are dropped.
std::vector<std::vector<bool>> survival_indicators(const MCConfig& cfg, std::span<const double> times);

/// Runs fn(i) for i in [0, n) on `jobs` threads. Callers write results by index.
void parallel_for(long n, int jobs, const std::function<void(long)>& fn);

}  // namespace bbmtraps
