#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bbmtraps/branching.hpp"
#include "bbmtraps/rng.hpp"
#include "bbmtraps/trap_field.hpp"

namespace bbmtraps {

enum class SimulationMode { kPlain, kTwoType };

enum class Label : std::uint8_t { kUnlabeled, kSkeleton, kDoomed };

/// How doomed_alive_along_line picks its skeletal line.
enum class LineSelection {
  kUniform,     ///< uniform over skeleton particles alive at s
  kFirstChild,  ///< from the root, always follow the first skeleton child
};

struct SimulationConfig {
  BranchingParams params;
  int d = 1;
  double horizon = 1.0;
  double dt = 0.01;
  long max_particles = 1'000'000;
  SimulationMode mode = SimulationMode::kPlain;
  /// Genealogy-only runs skip Brownian paths; positions stay at the origin.
  bool track_paths = true;

  void validate() const;

  /// min(0.01, a^2 / (8 d)): per-step displacement well below the trap radius.
  static double default_dt(double a, int d);
};

struct Particle {
  int id = 0;
  int parent = -1;
  double birth = 0.0;
  /// Branch (or death) time; +inf when the particle is alive at the horizon.
  double end = 0.0;
  /// Number of children; -1 when alive at the horizon.
  int offspring = -1;
  int first_child = -1;
  Label label = Label::kUnlabeled;
  std::uint64_t key = 0;  ///< genealogical stream key, independent of the horizon
  std::size_t first_sample = 0;
  std::size_t sample_count = 0;

  bool alive_at(double s) const { return birth <= s && s < end; }
};

struct PopulationCount {
  long total = 0;
  long skeleton = 0;
  long doomed = 0;
};

/// Event log of one simulated BBM. Children of a particle occupy the id range
/// [first_child, first_child + offspring); skeleton children precede doomed ones.
struct ParticleTree {
  int d = 1;
  double horizon = 0.0;
  SimulationMode mode = SimulationMode::kPlain;
  bool truncated = false;
  /// Building stopped early at a trap hit (simulate_with_traps); particles
  /// still queued at that point have no samples and end == birth.
  bool stopped = false;
  std::vector<Particle> particles;
  std::vector<double> times;   ///< sample times, per particle in order
  std::vector<double> coords;  ///< d coordinates per sample

  std::span<const double> position(std::size_t sample) const {
    return {coords.data() + sample * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
};

/// Exact exponential clocks and offspring counts; Brownian increments on the
/// dt grid with branch times inserted as extra sample points. Each particle
/// draws from its own stream keyed by its genealogical position, so a longer
/// horizon only extends a tree. Truncation at max_particles sets `truncated`.
ParticleTree simulate(const SimulationConfig& config, RngStream& rng);

struct TrappedTree {
  ParticleTree tree;
  std::optional<double> trap_time;
};

/// simulate() with trapping checked as each path is generated, revealing the
/// field only where the paths go. Uses the same bridge variates as
/// first_trapping_time, so a tree that is not stopped gives exactly the same
/// tree and trap time as simulate() followed by first_trapping_time() on
/// field.current(). Once a hit at time <= stop_at is found the build stops:
/// tree.stopped is set and trap_time is only an upper bound.
TrappedTree simulate_with_traps(const SimulationConfig& config, RngStream& tree_rng, GrowingTrapField& field,
                                RngStream& bridge_rng,
                                double stop_at = -std::numeric_limits<double>::infinity());

PopulationCount population_at(const ParticleTree& tree, double s);

/// Largest |position| among samples up to time s.
double range_radius(const ParticleTree& tree, double s);

/// Earliest trapping time of the tree's range, or nullopt. One variate is
/// drawn from rng; per-segment bridge variates are derived from it by
/// genealogical key and step, so a superset field can only hit earlier.
std::optional<double> first_trapping_time(const ParticleTree& tree, const TrapField& field, RngStream& rng);

/// Doomed particles alive at s whose most recent skeleton ancestor lies on
/// one chosen skeletal line. TwoType trees only.
long doomed_alive_along_line(const ParticleTree& tree, double s, RngStream& rng,
                             LineSelection selection = LineSelection::kUniform);

/// Same statistic for a single fixed line sampled directly: skeleton events
/// at rate beta along the line, doomed subtrees run as population processes.
long sample_doomed_along_line(const SkeletonParams& skeleton, double beta, double t, RngStream& rng);

/// id,parent,birth,death,offspring,label
void write_tree_csv(const ParticleTree& tree, std::ostream& out);
/// particle_id,time,x0,...
void write_trajectories_csv(const ParticleTree& tree, std::ostream& out);

const char* to_string(Label label);

}  // namespace bbmtraps
