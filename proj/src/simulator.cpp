#include "bbmtraps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "bbmtraps/errors.hpp"
#include "bbmtraps/geometry.hpp"

namespace bbmtraps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPathTag = 0x70617468;  // "path"

void append_path(ParticleTree& tree, Particle& p, std::span<const double> start, double stop, double dt,
                 bool track_paths) {
  const auto d = static_cast<std::size_t>(tree.d);
  p.first_sample = tree.times.size();
  tree.times.push_back(p.birth);
  tree.coords.insert(tree.coords.end(), start.begin(), start.end());
  if (!track_paths) {
    if (stop > p.birth) {
      tree.times.push_back(stop);
      tree.coords.insert(tree.coords.end(), start.begin(), start.end());
    }
    p.sample_count = tree.times.size() - p.first_sample;
    return;
  }
  RngStream path(combine_keys(p.key, kPathTag));
  auto k = static_cast<long>(std::floor(p.birth / dt)) + 1;
  while (static_cast<double>(k) * dt <= p.birth) ++k;
  double now = p.birth;
  auto step_to = [&](double next) {
    const double sd = std::sqrt(next - now);
    const std::size_t prev = tree.coords.size() - d;
    for (std::size_t i = 0; i < d; ++i) tree.coords.push_back(tree.coords[prev + i] + sd * path.normal());
    tree.times.push_back(next);
    now = next;
  };
  for (;; ++k) {
    double grid = static_cast<double>(k) * dt;
    if (grid >= stop) break;
    step_to(grid);
  }
  if (stop > now) step_to(stop);
  p.sample_count = tree.times.size() - p.first_sample;
}

}  // namespace

void SimulationConfig::validate() const {
  params.validate();
  if (d < 1) throw InvalidArgument("simulation dimension must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("simulation dt must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("simulation horizon must be >= 0");
  if (max_particles < 1) throw InvalidArgument("max_particles must be >= 1");
}

double SimulationConfig::default_dt(double a, int d) { return std::min(0.01, a * a / (8.0 * d)); }

namespace {

// Builds the tree in FIFO order. after_path(tree, particle) runs once each
// particle's path is in place; returning false stops the build.
template <class AfterPath>
ParticleTree build_tree(const SimulationConfig& config, RngStream& rng, AfterPath&& after_path) {
  config.validate();
  std::optional<SkeletonParams> skeleton;
  if (config.mode == SimulationMode::kTwoType) skeleton = skeleton_decomposition(config.params);

  ParticleTree tree;
  tree.d = config.d;
  tree.horizon = config.horizon;
  tree.mode = config.mode;
  const auto d = static_cast<std::size_t>(config.d);
  const double beta = config.params.beta;

  Particle root;
  root.key = rng();
  root.label = config.mode == SimulationMode::kTwoType ? Label::kSkeleton : Label::kUnlabeled;
  tree.particles.push_back(root);
  const std::vector<double> origin(d, 0.0);

  std::vector<double> start(d);
  for (std::size_t idx = 0; idx < tree.particles.size(); ++idx) {
    Particle p = tree.particles[idx];
    p.id = static_cast<int>(idx);
    if (p.parent < 0) {
      std::copy(origin.begin(), origin.end(), start.begin());
    } else {
      const Particle& parent = tree.particles[static_cast<std::size_t>(p.parent)];
      auto pos = tree.position(parent.first_sample + parent.sample_count - 1);
      std::copy(pos.begin(), pos.end(), start.begin());
    }

    RngStream life(p.key);
    const double branch_time = p.birth + life.exponential(beta);
    const bool branches = branch_time < config.horizon;
    const double stop = branches ? branch_time : config.horizon;
    append_path(tree, p, start, stop, config.dt, config.track_paths);

    if (!after_path(tree, p)) {
      p.end = branches ? branch_time : kInf;
      tree.particles[idx] = p;
      tree.stopped = true;
      for (std::size_t rest = idx + 1; rest < tree.particles.size(); ++rest) {
        Particle& q = tree.particles[rest];
        q.id = static_cast<int>(rest);
        q.end = q.birth;
        q.first_sample = tree.times.size();
        q.sample_count = 0;
      }
      return tree;
    }

    if (!branches) {
      p.end = kInf;
      p.offspring = -1;
      tree.particles[idx] = p;
      continue;
    }
    p.end = branch_time;
    int skeleton_children = 0;
    int children = 0;
    switch (p.label) {
      case Label::kSkeleton: {
        SkeletonBranch b = skeleton->sample_branch(life);
        skeleton_children = b.skeleton;
        children = b.skeleton + b.doomed;
        break;
      }
      case Label::kDoomed:
        children = skeleton->doomed_law.sample(life);
        break;
      case Label::kUnlabeled:
        children = config.params.law.sample(life);
        break;
    }
    p.offspring = children;
    if (static_cast<long>(tree.particles.size()) + children > config.max_particles) {
      tree.truncated = true;
      tree.particles[idx] = p;
      continue;
    }
    p.first_child = static_cast<int>(tree.particles.size());
    tree.particles[idx] = p;
    for (int c = 0; c < children; ++c) {
      Particle child;
      child.parent = p.id;
      child.birth = branch_time;
      child.key = combine_keys(p.key, static_cast<std::uint64_t>(c) + 1);
      if (p.label == Label::kUnlabeled)
        child.label = Label::kUnlabeled;
      else
        child.label = (p.label == Label::kSkeleton && c < skeleton_children) ? Label::kSkeleton : Label::kDoomed;
      tree.particles.push_back(child);
    }
  }
  return tree;
}

// Earliest hit of one particle's path if it beats `best`. ensure(r) is called
// before the field is consulted anywhere within distance r of the origin.
template <class Ensure>
double particle_hit(const ParticleTree& tree, const Particle& p, const TrapField& field, std::uint64_t bridge_key,
                    double best, Ensure&& ensure) {
  if (p.birth >= best || p.sample_count == 0) return best;
  const double a = field.trap_radius();
  auto inside = [&](std::span<const double> x) {
    ensure(norm(x) + a);
    field.require_covered(x, a);
    bool hit = false;
    field.for_each_near(x, a, [&](std::span<const double> c) { hit = hit || distance(c, x) <= a; });
    return hit;
  };

  const std::size_t first = p.first_sample;
  if (p.sample_count == 1) return inside(tree.position(first)) ? std::min(best, tree.times[first]) : best;

  const auto d = static_cast<std::size_t>(tree.d);
  std::vector<double> mid(d);
  const std::uint64_t particle_key = combine_keys(bridge_key, p.key);
  for (std::size_t j = 0; j + 1 < p.sample_count; ++j) {
    const double t0 = tree.times[first + j];
    const double t1 = tree.times[first + j + 1];
    if (t0 >= best) break;
    auto x0 = tree.position(first + j);
    auto x1 = tree.position(first + j + 1);
    for (std::size_t k = 0; k < d; ++k) mid[k] = 0.5 * (x0[k] + x1[k]);
    ensure(norm(mid) + distance(x0, x1) + a + 6.0 * std::sqrt(t1 - t0));
    SegmentRisk risk = segment_hit_risk(field, x0, x1, t1 - t0);
    bool hit = risk.certain;
    if (!hit && risk.probability > 0.0) hit = to_unit_interval(combine_keys(particle_key, j)) < risk.probability;
    if (hit) return std::min(best, inside(x0) ? t0 : 0.5 * (t0 + t1));
  }
  return best;
}

}  // namespace

ParticleTree simulate(const SimulationConfig& config, RngStream& rng) {
  return build_tree(config, rng, [](const ParticleTree&, const Particle&) { return true; });
}

TrappedTree simulate_with_traps(const SimulationConfig& config, RngStream& tree_rng, GrowingTrapField& field,
                                RngStream& bridge_rng, double stop_at) {
  if (field.current().dimension() != config.d) throw InvalidArgument("simulate_with_traps: dimension mismatch");
  const std::uint64_t bridge_key = bridge_rng();
  double best = kInf;
  auto ensure = [&](double radius) { field.cover(radius * (1.0 + 1e-12)); };
  TrappedTree out;
  out.tree = build_tree(config, tree_rng, [&](const ParticleTree& tree, const Particle& p) {
    best = particle_hit(tree, p, field.current(), bridge_key, best, ensure);
    return !(best <= stop_at);
  });
  if (best < kInf) out.trap_time = best;
  return out;
}

PopulationCount population_at(const ParticleTree& tree, double s) {
  if (s < 0.0 || s > tree.horizon) throw DomainError("population_at: time outside [0, horizon]");
  PopulationCount out;
  for (const auto& p : tree.particles) {
    if (!p.alive_at(s)) continue;
    ++out.total;
    if (p.label == Label::kSkeleton) ++out.skeleton;
    if (p.label == Label::kDoomed) ++out.doomed;
  }
  return out;
}

double range_radius(const ParticleTree& tree, double s) {
  if (s < 0.0 || s > tree.horizon) throw DomainError("range_radius: time outside [0, horizon]");
  double best = 0.0;
  for (std::size_t i = 0; i < tree.times.size(); ++i)
    if (tree.times[i] <= s) best = std::max(best, norm(tree.position(i)));
  return best;
}

std::optional<double> first_trapping_time(const ParticleTree& tree, const TrapField& field, RngStream& rng) {
  if (field.dimension() != tree.d) throw InvalidArgument("first_trapping_time: dimension mismatch");
  const std::uint64_t bridge_key = rng();
  double best = kInf;
  for (const auto& p : tree.particles) best = particle_hit(tree, p, field, bridge_key, best, [](double) {});
  if (best == kInf) return std::nullopt;
  return best;
}

long doomed_alive_along_line(const ParticleTree& tree, double s, RngStream& rng, LineSelection selection) {
  if (tree.mode != SimulationMode::kTwoType) throw InvalidArgument("doomed_alive_along_line needs a TwoType tree");
  if (s < 0.0 || s > tree.horizon) throw DomainError("doomed_alive_along_line: time outside [0, horizon]");
  const auto& ps = tree.particles;

  int chosen = -1;
  if (selection == LineSelection::kUniform) {
    std::vector<int> alive;
    for (const auto& p : ps)
      if (p.label == Label::kSkeleton && p.alive_at(s)) alive.push_back(p.id);
    if (alive.empty()) return 0;
    auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(alive.size()));
    chosen = alive[std::min(pick, alive.size() - 1)];
  } else {
    int cur = 0;
    while (!ps[static_cast<std::size_t>(cur)].alive_at(s)) {
      const auto& p = ps[static_cast<std::size_t>(cur)];
      if (p.first_child < 0) return 0;  // truncated tree
      cur = p.first_child;
    }
    chosen = cur;
  }

  std::unordered_set<int> line;
  for (int cur = chosen; cur >= 0; cur = ps[static_cast<std::size_t>(cur)].parent) line.insert(cur);

  long count = 0;
  for (const auto& p : ps) {
    if (p.label != Label::kDoomed || !p.alive_at(s)) continue;
    int anc = p.parent;
    while (anc >= 0 && ps[static_cast<std::size_t>(anc)].label != Label::kSkeleton)
      anc = ps[static_cast<std::size_t>(anc)].parent;
    if (anc >= 0 && line.contains(anc)) ++count;
  }
  return count;
}

long sample_doomed_along_line(const SkeletonParams& skeleton, double beta, double t, RngStream& rng) {
  if (t < 0.0) throw DomainError("sample_doomed_along_line: negative time");
  const BranchingParams doomed{skeleton.doomed_law, beta};
  long count = 0;
  double now = rng.exponential(beta);
  while (now < t) {
    SkeletonBranch b = skeleton.sample_branch(rng);
    for (int i = 0; i < b.doomed; ++i) count += sample_population(doomed, t - now, rng);
    now += rng.exponential(beta);
  }
  return count;
}

void write_tree_csv(const ParticleTree& tree, std::ostream& out) {
  auto old = out.precision(17);
  out << "id,parent,birth,death,offspring,label\n";
  for (const auto& p : tree.particles) {
    const double death = std::isinf(p.end) ? tree.horizon : p.end;
    out << p.id << ',' << p.parent << ',' << p.birth << ',' << death << ',' << p.offspring << ','
        << to_string(p.label) << '\n';
  }
  out.precision(old);
}

void write_trajectories_csv(const ParticleTree& tree, std::ostream& out) {
  auto old = out.precision(17);
  out << "particle_id,time";
  for (int k = 0; k < tree.d; ++k) out << ",x" << k;
  out << '\n';
  for (const auto& p : tree.particles) {
    for (std::size_t j = 0; j < p.sample_count; ++j) {
      out << p.id << ',' << tree.times[p.first_sample + j];
      for (double x : tree.position(p.first_sample + j)) out << ',' << x;
      out << '\n';
    }
  }
  out.precision(old);
}

const char* to_string(Label label) {
  switch (label) {
    case Label::kSkeleton:
      return "skeleton";
    case Label::kDoomed:
      return "doomed";
    case Label::kUnlabeled:
      break;
  }
  return "unlabeled";
}

}  // namespace bbmtraps
