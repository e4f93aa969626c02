#include "bbmtraps/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "bbmtraps/errors.hpp"

namespace bbmtraps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPopulationSlots = 3;  // total, skeleton, doomed

struct Context {
  const MCConfig& cfg;
  bool extinction_possible = false;
  double extinct_by_lookahead = 0.0;  ///< P(one particle's line dies within the lookahead)

  explicit Context(const MCConfig& c) : cfg(c) {
    const auto& params = c.simulation.params;
    extinction_possible =
        c.simulation.mode == SimulationMode::kPlain && params.law.prob(0) > 0.0 && params.beta > 0.0;
    if (extinction_possible) extinct_by_lookahead = extinction_by_time(params.law, params.beta, c.resolved_lookahead());
  }
};

struct ReplicateRecord {
  bool truncated = false;
  bool non_extinct = true;
  double trap_time = kInf;
  std::vector<double> values;
};

double probe_radius_for(const Statistic& s, int d) {
  if (s.kind != Statistic::Kind::kTrapPresence) return 0.0;
  return s.rule == BallRule::kEpsT ? s.epsilon * s.t : s.epsilon * std::pow(s.t, 1.0 / d);
}

int slots_for(const Statistic& s) {
  switch (s.kind) {
    case Statistic::Kind::kSurvival:
      return 0;
    case Statistic::Kind::kPopulation:
      return kPopulationSlots;
    case Statistic::Kind::kRange:
    case Statistic::Kind::kTrapPresence:
      return 1;
  }
  return 0;
}

// A replicate whose trap time is found to be <= stop_at cannot be accepted at
// any statistic time, so its tree is abandoned at that point.
ReplicateOutcome run_with_context(const Context& ctx, long index, double probe_radius, double stop_at) {
  const MCConfig& cfg = ctx.cfg;
  const RngStream base(cfg.seed, {static_cast<std::uint64_t>(StreamTag::kReplicate), static_cast<std::uint64_t>(index)});
  ReplicateOutcome out;
  RngStream tree_rng = base.substream(StreamTag::kTree);
  RngStream bridge_rng = base.substream(StreamTag::kBridge);
  GrowingTrapField field(cfg.field, base.substream(StreamTag::kField), std::max(1.0, 4.0 * cfg.field.a));
  TrappedTree run = simulate_with_traps(cfg.simulation, tree_rng, field, bridge_rng, stop_at);
  out.tree = std::move(run.tree);
  out.trap_time = run.trap_time;
  if (out.tree.truncated || out.tree.stopped) {
    out.field = field.current();
    return out;
  }
  out.field = field.cover((probe_radius + cfg.field.a) * (1.0 + 1e-12));

  if (ctx.extinction_possible) {
    const long alive = population_at(out.tree, cfg.simulation.horizon).total;
    if (alive == 0) {
      out.non_extinct = false;
    } else {
      RngStream look = base.substream(StreamTag::kLookahead);
      const double all_die = std::pow(ctx.extinct_by_lookahead, static_cast<double>(alive));
      out.non_extinct = look.uniform() >= all_die;
    }
  }
  return out;
}

double stop_time(const MCConfig& cfg, const std::vector<double>& times) {
  if (cfg.conditioning == Conditioning::kNone || times.empty()) return -kInf;
  return *std::min_element(times.begin(), times.end());
}

void check_time(const MCConfig& cfg, double t) {
  if (t < 0.0 || t > cfg.simulation.horizon) {
    std::ostringstream msg;
    msg << "statistic time " << t << " outside [0, horizon " << cfg.simulation.horizon << "]";
    throw DomainError(msg.str());
  }
}

std::vector<ReplicateRecord> collect(const MCConfig& cfg, const std::vector<Statistic>& stats) {
  const Context ctx(cfg);
  double probe = 0.0;
  std::vector<double> times;
  for (const auto& s : stats) {
    probe = std::max(probe, probe_radius_for(s, cfg.field.d));
    times.push_back(s.t);
  }
  const double stop_at = stop_time(cfg, times);

  std::vector<ReplicateRecord> records(static_cast<std::size_t>(cfg.replicates));
  parallel_for(cfg.replicates, cfg.jobs, [&](long i) {
    ReplicateOutcome o = run_with_context(ctx, i, probe, stop_at);
    ReplicateRecord& r = records[static_cast<std::size_t>(i)];
    r.truncated = o.tree.truncated && !o.tree.stopped;
    if (r.truncated) return;
    r.non_extinct = o.non_extinct;
    r.trap_time = o.trap_time.value_or(kInf);
    if (o.tree.stopped) {
      // Rejected at every statistic time; the slots are never read.
      for (const auto& s : stats) r.values.resize(r.values.size() + static_cast<std::size_t>(slots_for(s)), 0.0);
      return;
    }
    const std::vector<double> origin(static_cast<std::size_t>(cfg.field.d), 0.0);
    for (const auto& s : stats) {
      switch (s.kind) {
        case Statistic::Kind::kSurvival:
          break;
        case Statistic::Kind::kPopulation: {
          PopulationCount pc = population_at(o.tree, s.s_fraction * s.t);
          r.values.push_back(static_cast<double>(pc.total));
          r.values.push_back(static_cast<double>(pc.skeleton));
          r.values.push_back(static_cast<double>(pc.doomed));
          break;
        }
        case Statistic::Kind::kRange:
          r.values.push_back(range_radius(o.tree, s.t));
          break;
        case Statistic::Kind::kTrapPresence: {
          const double radius = probe_radius_for(s, cfg.field.d);
          r.values.push_back(is_trap_free(*o.field, origin, radius, ClearingMode::kTrapSetFree) ? 0.0 : 1.0);
          break;
        }
      }
    }
  });

  long truncated = 0;
  for (const auto& r : records) truncated += r.truncated ? 1 : 0;
  if (static_cast<double>(truncated) > cfg.max_truncated_fraction * static_cast<double>(cfg.replicates)) {
    std::ostringstream msg;
    msg << truncated << " of " << cfg.replicates << " replicates hit max_particles = " << cfg.simulation.max_particles;
    throw TruncationError(msg.str());
  }
  return records;
}

bool accepted(const MCConfig& cfg, const ReplicateRecord& r, double t) {
  if (r.truncated) return false;
  if (cfg.conditioning == Conditioning::kNone) return true;
  return r.non_extinct && r.trap_time > t;
}

EstimateResult proportion(const MCConfig& cfg, std::string name, double t, long hits, long n, long n_total,
                          long n_truncated) {
  EstimateResult e;
  e.statistic = std::move(name);
  e.t = t;
  e.n_total = n_total;
  e.n_accepted = n;
  e.n_truncated = n_truncated;
  e.seed = cfg.seed;
  if (n > 0) {
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    e.estimate = p;
    e.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  }
  return e;
}

void check_acceptance(const MCConfig& cfg, EstimateResult& e) {
  if (e.n_accepted == 0) {
    std::ostringstream msg;
    msg << e.statistic << " at t = " << e.t << ": no replicate survived out of " << e.n_total;
    throw AcceptanceError(msg.str());
  }
  const double rate = static_cast<double>(e.n_accepted) / static_cast<double>(e.n_total);
  if (rate < cfg.acceptance_floor) {
    std::ostringstream msg;
    msg << "acceptance rate " << rate << " below floor " << cfg.acceptance_floor;
    e.warnings.push_back(msg.str());
  }
}

struct Reduced {
  std::vector<EstimateResult> rows;
  std::vector<PopulationEstimate> populations;
};

Reduced reduce(const MCConfig& cfg, const std::vector<Statistic>& stats, const std::vector<ReplicateRecord>& records) {
  long n_truncated = 0;
  for (const auto& r : records) n_truncated += r.truncated ? 1 : 0;
  const long n_total = cfg.replicates - n_truncated;
  const bool two_type = cfg.simulation.mode == SimulationMode::kTwoType;

  Reduced out;
  std::size_t slot = 0;
  for (const auto& s : stats) {
    switch (s.kind) {
      case Statistic::Kind::kSurvival: {
        long survivors = 0;
        for (const auto& r : records)
          if (!r.truncated && r.non_extinct && r.trap_time > s.t) ++survivors;
        EstimateResult e = proportion(cfg, "survival", s.t, survivors, n_total, n_total, n_truncated);
        e.n_accepted = survivors;
        const double rate = n_total > 0 ? static_cast<double>(survivors) / static_cast<double>(n_total) : 0.0;
        if (rate < cfg.acceptance_floor) {
          std::ostringstream msg;
          msg << "survival rate " << rate << " below floor " << cfg.acceptance_floor;
          e.warnings.push_back(msg.str());
        }
        out.rows.push_back(std::move(e));
        break;
      }
      case Statistic::Kind::kPopulation: {
        PopulationEstimate pe;
        long n = 0, single = 0, skel_single = 0, doomed_small = 0;
        const double log_t = s.t > 0.0 ? std::log(s.t) : -kInf;
        for (const auto& r : records) {
          if (!accepted(cfg, r, s.t)) continue;
          const auto total = static_cast<long>(r.values[slot]);
          const auto skel = static_cast<long>(r.values[slot + 1]);
          const auto doomed = static_cast<long>(r.values[slot + 2]);
          ++n;
          single += total == 1 ? 1 : 0;
          skel_single += skel == 1 ? 1 : 0;
          doomed_small += static_cast<double>(doomed) <= log_t ? 1 : 0;
          ++pe.total_histogram[total];
          if (two_type) ++pe.joint_histogram[{skel, doomed}];
        }
        pe.single = proportion(cfg, "population_single", s.t, single, n, n_total, n_truncated);
        check_acceptance(cfg, pe.single);
        out.rows.push_back(pe.single);
        if (two_type) {
          pe.skeleton_single = proportion(cfg, "skeleton_single", s.t, skel_single, n, n_total, n_truncated);
          pe.doomed_small = proportion(cfg, "doomed_le_log_t", s.t, doomed_small, n, n_total, n_truncated);
          pe.skeleton_single->warnings = pe.single.warnings;
          pe.doomed_small->warnings = pe.single.warnings;
          out.rows.push_back(*pe.skeleton_single);
          out.rows.push_back(*pe.doomed_small);
        }
        out.populations.push_back(std::move(pe));
        break;
      }
      case Statistic::Kind::kRange: {
        long n = 0, within = 0;
        for (const auto& r : records) {
          if (!accepted(cfg, r, s.t)) continue;
          ++n;
          within += r.values[slot] <= s.epsilon * s.t ? 1 : 0;
        }
        EstimateResult e = proportion(cfg, "range_within", s.t, within, n, n_total, n_truncated);
        check_acceptance(cfg, e);
        out.rows.push_back(std::move(e));
        break;
      }
      case Statistic::Kind::kTrapPresence: {
        long n = 0, present = 0;
        for (const auto& r : records) {
          if (!accepted(cfg, r, s.t)) continue;
          ++n;
          present += r.values[slot] > 0.5 ? 1 : 0;
        }
        EstimateResult e = proportion(cfg, "trap_presence", s.t, present, n, n_total, n_truncated);
        check_acceptance(cfg, e);
        out.rows.push_back(std::move(e));
        break;
      }
    }
    slot += static_cast<std::size_t>(slots_for(s));
  }
  return out;
}

Reduced run(const MCConfig& cfg, const std::vector<Statistic>& stats) {
  cfg.validate();
  for (const auto& s : stats) check_time(cfg, s.t);
  const auto start = std::chrono::steady_clock::now();
  auto records = collect(cfg, stats);
  Reduced out = reduce(cfg, stats, records);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& e : out.rows) e.wall_seconds = wall;
  for (auto& p : out.populations) p.single.wall_seconds = wall;
  return out;
}

}  // namespace

void MCConfig::validate() const {
  if (replicates < 1) throw InvalidArgument("replicates must be >= 1");
  if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
  simulation.validate();
  field.validate();
  if (field.d != simulation.d) throw InvalidArgument("trap field and simulation dimensions differ");
}

double MCConfig::resolved_lookahead() const {
  if (lookahead >= 0.0) return lookahead;
  const auto& params = simulation.params;
  if (params.beta == 0.0) return 0.0;
  double rate = params.beta;
  if (params.law.supercritical()) rate = skeleton_decomposition(params).effective_rate;
  return 20.0 / rate;
}

void parallel_for(long n, int jobs, const std::function<void(long)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  constexpr long kChunk = 16;
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const long begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const long end = std::min(n, begin + kChunk);
      try {
        for (long i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  const long threads = std::min<long>(jobs, n);
  for (long k = 0; k < threads; ++k) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

ReplicateOutcome run_replicate(const MCConfig& cfg, long index, double probe_radius) {
  cfg.validate();
  return run_with_context(Context(cfg), index, probe_radius, -kInf);
}

std::vector<EstimateResult> evaluate_statistics(const MCConfig& cfg, const std::vector<Statistic>& stats) {
  return run(cfg, stats).rows;
}

EstimateResult estimate_annealed_survival(const MCConfig& cfg, double t) {
  return run(cfg, {Statistic::survival(t)}).rows.front();
}

PopulationEstimate estimate_conditional_population(const MCConfig& cfg, double t, double s_fraction) {
  if (!(s_fraction >= 0.0 && s_fraction <= 1.0)) throw DomainError("s_fraction must lie in [0, 1]");
  return run(cfg, {Statistic::population(t, s_fraction)}).populations.front();
}

EstimateResult estimate_conditional_range(const MCConfig& cfg, double t, double epsilon) {
  return run(cfg, {Statistic::range(t, epsilon)}).rows.front();
}

EstimateResult estimate_trap_presence_given_survival(const MCConfig& cfg, double t, double epsilon, BallRule rule) {
  return run(cfg, {Statistic::trap_presence(t, epsilon, rule)}).rows.front();
}

std::vector<std::vector<bool>> survival_indicators(const MCConfig& cfg, std::span<const double> times) {
  cfg.validate();
  for (double t : times) check_time(cfg, t);
  const Context ctx(cfg);
  const std::vector<double> all(times.begin(), times.end());
  const double stop_at = times.empty() ? -kInf : *std::min_element(all.begin(), all.end());
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(cfg.replicates));
  parallel_for(cfg.replicates, cfg.jobs, [&](long i) {
    ReplicateOutcome o = run_with_context(ctx, i, 0.0, stop_at);
    auto& r = records[static_cast<std::size_t>(i)];
    r.truncated = o.tree.truncated && !o.tree.stopped;
    r.non_extinct = o.non_extinct;
    r.trap_time = o.trap_time.value_or(kInf);
  });
  std::vector<std::vector<bool>> out;
  for (const auto& r : records) {
    if (r.truncated) continue;
    std::vector<bool> row;
    for (double t : times) row.push_back(r.non_extinct && r.trap_time > t);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace bbmtraps
