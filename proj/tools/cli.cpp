#include "cli.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "bbmtraps/config.hpp"
#include "bbmtraps/errors.hpp"
#include "bbmtraps/estimators.hpp"
#include "bbmtraps/rate_function.hpp"
#include "bbmtraps/simulator.hpp"

namespace bbmtraps::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out_dir;
  bool strict = false;
  bool dump = false;
};

struct RateOptions {
  std::optional<int> d;
  std::optional<double> beta, m, alpha, l, epsilon;
  double tol = 1e-9;
  std::string sweep;
  bool bisection = false;
};

struct GdOptions {
  int d = 2;
  double r = 1.0;
  double b = 0.0;
  double tol = 1e-10;
};

class ExitError : public std::runtime_error {
 public:
  ExitError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ExitError(kConfig, "cannot create output directory " + p.string());
  return p;
}

std::optional<ExperimentConfig> maybe_config(const CommonOptions& common) {
  if (common.config_path.empty()) return std::nullopt;
  ExperimentConfig cfg = load_experiment_config(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

ExperimentConfig require_config(const CommonOptions& common) {
  auto cfg = maybe_config(common);
  if (!cfg) throw ExitError(kConfig, "--config is required for this subcommand");
  return *cfg;
}

RateProblem rate_problem(const RateOptions& opt, const std::optional<ExperimentConfig>& cfg) {
  RateProblem p;
  if (cfg) {
    p.beta = cfg->branching.beta;
    p.m = cfg->branching.law.net_growth();
    if (cfg->branching.law.supercritical()) p.alpha = skeleton_decomposition(cfg->branching).alpha;
    if (cfg->field) {
      p.d = cfg->field->d;
      if (auto* r = std::get_if<RadialIntensity>(&cfg->field->kind)) p.l = r->l;
    }
    if (cfg->rate) p.l = cfg->rate->l;
  }
  if (opt.d) p.d = *opt.d;
  if (opt.beta) p.beta = *opt.beta;
  if (opt.m) p.m = *opt.m;
  if (opt.alpha) p.alpha = *opt.alpha;
  if (opt.l) p.l = *opt.l;
  return p;
}

std::vector<double> parse_sweep(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ExitError(kConfig, "--sweep expects LO:HI:N");
    }
  }
  if (parts.size() != 3 || parts[2] < 2 || parts[0] <= 0 || parts[1] <= parts[0])
    throw ExitError(kConfig, "--sweep expects LO:HI:N with 0 < LO < HI and N >= 2");
  const auto n = static_cast<int>(parts[2]);
  std::vector<double> ls;
  for (int i = 0; i < n; ++i) ls.push_back(parts[0] + (parts[1] - parts[0]) * i / (n - 1));
  return ls;
}

int cmd_rate(const RateOptions& opt, const CommonOptions& common, std::ostream& out) {
  auto cfg = maybe_config(common);
  RateProblem p = rate_problem(opt, cfg);
  double epsilon = opt.epsilon.value_or(cfg && cfg->rate ? cfg->rate->epsilon : 0.5);

  if (!opt.sweep.empty()) {
    auto ls = parse_sweep(opt.sweep);
    p.l = ls.front();
    p.validate();
    std::ostringstream csv;
    csv << "l,I,eta_star,c_star\n";
    for (const auto& pt : phase_diagram(p, ls, opt.tol))
      csv << format_double(pt.l) << ',' << format_double(pt.result.value) << ',' << format_double(pt.result.eta_star)
          << ',' << format_double(pt.result.c_star) << '\n';
    if (common.out_dir.empty()) {
      out << csv.str();
    } else {
      std::ofstream f(prepare_out_dir(common.out_dir) / "phase_diagram.csv");
      f << csv.str();
    }
    return kOk;
  }

  RateResult r = minimize_variational(p, opt.tol);
  Json j;
  j["I"] = r.value;
  j["eta_star"] = r.eta_star;
  j["c_star"] = r.c_star;
  j["l_cr"] = critical_intensity(p, opt.tol);
  j["l_cr_method"] = p.d == 1 ? "closed_form" : "operational";
  j["uniform_rate"] = uniform_rate(p.beta, p.alpha);
  AvoidanceBound lb = avoidance_bound(p.beta, p.m, epsilon);
  j["avoidance_bound"] = lb.rate;
  j["optimal_k"] = lb.optimal_k;
  j["epsilon"] = epsilon;
  j["d"] = p.d;
  j["beta"] = p.beta;
  j["m"] = p.m;
  j["alpha"] = p.alpha;
  j["l"] = p.l;
  j["certified_gap"] = r.certified_gap;
  out << j.dump() << '\n';
  return kOk;
}

int cmd_lcr(const RateOptions& opt, const CommonOptions& common, std::ostream& out) {
  auto cfg = maybe_config(common);
  RateProblem p = rate_problem(opt, cfg);
  const auto method = opt.bisection ? CriticalMethod::kBisection : CriticalMethod::kAuto;
  Json j;
  j["l_cr"] = critical_intensity(p, opt.tol, method);
  j["d"] = p.d;
  j["beta"] = p.beta;
  j["m"] = p.m;
  j["alpha"] = p.alpha;
  j["method"] = opt.bisection || p.d != 1 ? "bisection" : "closed_form";
  // d >= 2 has no closed form; this is where the minimiser's eta* leaves zero
  j["l_cr_method"] = p.d == 1 ? "closed_form" : "operational";
  out << j.dump() << '\n';
  return kOk;
}

int cmd_gd(const GdOptions& opt, std::ostream& out) {
  Json j;
  j["d"] = opt.d;
  j["r"] = opt.r;
  j["b"] = opt.b;
  j["tol"] = opt.tol;
  j["g"] = g_d(opt.d, opt.r, opt.b, opt.tol);
  out << j.dump() << '\n';
  return kOk;
}

int cmd_simulate(const CommonOptions& common, std::ostream& out) {
  ExperimentConfig cfg = require_config(common);
  const std::string hash = cfg.hash();
  ParticleTree tree;
  std::optional<TrapField> field;
  std::optional<double> trap_time;
  if (cfg.field) {
    ReplicateOutcome o = run_replicate(cfg.mc_config(1), 0);
    tree = std::move(o.tree);
    field = std::move(o.field);
    trap_time = o.trap_time;
  } else {
    RngStream rng = RngStream(cfg.seed, {static_cast<std::uint64_t>(StreamTag::kReplicate), 0})
                        .substream(StreamTag::kTree);
    tree = simulate(cfg.simulation, rng);
  }

  const fs::path dir = prepare_out_dir(common.out_dir.empty() ? cfg.output_dir : common.out_dir);
  if (common.dump) {
    std::ofstream t(dir / "tree.csv");
    write_tree_csv(tree, t);
    std::ofstream p(dir / "trajectories.csv");
    write_trajectories_csv(tree, p);
    if (field) {
      std::ofstream f(dir / "traps.csv");
      field->write_csv(f);
    }
  }
  std::ofstream(dir / "resolved_config.json") << cfg.resolved().dump(2) << '\n';

  const PopulationCount pc = population_at(tree, tree.horizon);
  Json j;
  j["config_hash"] = hash;
  j["seed"] = cfg.seed;
  j["horizon"] = tree.horizon;
  j["particles"] = tree.particles.size();
  j["population"] = {{"total", pc.total}, {"skeleton", pc.skeleton}, {"doomed", pc.doomed}};
  j["range_radius"] = range_radius(tree, tree.horizon);
  j["truncated"] = tree.truncated;
  if (field) {
    j["traps_in_window"] = field->size();
    j["trap_time"] = trap_time ? Json(*trap_time) : Json(nullptr);
  }
  out << j.dump() << '\n';
  if (tree.truncated && common.strict) throw ExitError(kCapacity, "simulation hit max_particles");
  return kOk;
}

int cmd_estimate(const CommonOptions& common, std::ostream& out) {
  ExperimentConfig cfg = require_config(common);
  if (cfg.statistics.empty()) throw ExitError(kConfig, "estimation.statistics is empty");
  const std::string hash = cfg.hash();
  const MCConfig mc = cfg.mc_config(common.jobs);
  auto rows = evaluate_statistics(mc, cfg.statistics);

  const fs::path dir = prepare_out_dir(common.out_dir.empty() ? cfg.output_dir : common.out_dir);
  std::ofstream(dir / "resolved_config.json") << cfg.resolved().dump(2) << '\n';
  const fs::path csv_path = dir / "results.csv";
  const bool fresh = !fs::exists(csv_path);
  std::ofstream csv(csv_path, std::ios::app);
  if (fresh) csv << "config_hash,t,statistic,estimate,stderr,n_total,n_accepted,seed\n";
  Json records = Json::array();
  for (const auto& r : rows) {
    csv << hash << ',' << format_double(r.t) << ',' << r.statistic << ',' << format_double(r.estimate) << ','
        << format_double(r.std_error) << ',' << r.n_total << ',' << r.n_accepted << ',' << r.seed << '\n';
    Json j = to_json(r);
    j["config_hash"] = hash;
    if (r.statistic != "survival") j["finite_t_check"] = "directional";
    records.push_back(std::move(j));
  }
  out << records.dump() << '\n';
  if (common.strict)
    for (const auto& r : rows)
      if (r.n_truncated > 0) throw ExitError(kCapacity, "replicates hit max_particles");
  return kOk;
}

void write_error(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  err << j.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branching Brownian motion among Poissonian traps"};
  app.require_subcommand(1);
  CommonOptions common;
  RateOptions rate;
  GdOptions gd;

  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--config", common.config_path, "Experiment config (JSON)");
    sub->add_option("--seed", common.seed, "Override the 64-bit base seed");
    sub->add_option("--out", common.out_dir, "Output directory");
    sub->add_flag("--strict", common.strict, "Fail with exit 4 when the particle cap is hit");
    if (with_jobs)
      sub->add_option("--jobs", common.jobs, "Worker threads (fallback: $BBMTRAPS_JOBS)")->check(CLI::PositiveNumber);
  };
  auto add_rate = [&](CLI::App* sub) {
    sub->add_option("--d", rate.d, "Dimension")->check(CLI::PositiveNumber);
    sub->add_option("--beta", rate.beta, "Branching rate");
    sub->add_option("--m", rate.m, "Mean offspring minus one");
    sub->add_option("--alpha", rate.alpha, "Skeleton rate factor");
    sub->add_option("--tol", rate.tol, "Solver tolerance");
  };

  CLI::App* rate_cmd = app.add_subcommand("rate", "Variational rate, minimizers and closed-form rates");
  add_common(rate_cmd, false);
  add_rate(rate_cmd);
  rate_cmd->add_option("--l", rate.l, "Radial intensity constant");
  rate_cmd->add_option("--epsilon", rate.epsilon, "Epsilon for the single-trap bound");
  rate_cmd->add_option("--sweep", rate.sweep, "Phase diagram over l as LO:HI:N (CSV)");

  CLI::App* lcr_cmd = app.add_subcommand("lcr", "Critical radial intensity");
  add_common(lcr_cmd, false);
  add_rate(lcr_cmd);
  lcr_cmd->add_flag("--bisection", rate.bisection, "Force the bisection definition");

  CLI::App* gd_cmd = app.add_subcommand("gd", "Evaluate g_d(r, b)");
  gd_cmd->add_option("--d", gd.d, "Dimension")->check(CLI::PositiveNumber);
  gd_cmd->add_option("--r", gd.r, "Ball radius");
  gd_cmd->add_option("--b", gd.b, "Offset of the singular point");
  gd_cmd->add_option("--tol", gd.tol, "Absolute tolerance");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Simulate one tree and dump it");
  add_common(sim_cmd, false);
  sim_cmd->add_flag("--dump", common.dump, "Write tree.csv and trajectories.csv");

  CLI::App* est_cmd = app.add_subcommand("estimate", "Monte Carlo estimates of the configured statistics");
  add_common(est_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    write_error(err, kConfig, "usage", e.what());
    return kConfig;
  }

  try {
    // CLI11 does not validate environment values, so the fallback is read here.
    if (*est_cmd && est_cmd->count("--jobs") == 0) {
      if (const char* env = std::getenv("BBMTRAPS_JOBS"); env && *env) {
        std::size_t used = 0;
        int jobs = 0;
        try {
          jobs = std::stoi(env, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != std::strlen(env) || jobs < 1) throw ExitError(kConfig, "BBMTRAPS_JOBS must be a positive integer");
        common.jobs = jobs;
      }
    }
    if (*rate_cmd) return cmd_rate(rate, common, out);
    if (*lcr_cmd) return cmd_lcr(rate, common, out);
    if (*gd_cmd) return cmd_gd(gd, out);
    if (*sim_cmd) return cmd_simulate(common, out);
    if (*est_cmd) return cmd_estimate(common, out);
  } catch (const ExitError& e) {
    write_error(err, e.code(), "exit", e.what());
    return e.code();
  } catch (const ConvergenceError& e) {
    write_error(err, kConvergence, "convergence", e.what());
    return kConvergence;
  } catch (const CapacityError& e) {
    write_error(err, kCapacity, "capacity", e.what());
    return kCapacity;
  } catch (const TruncationError& e) {
    write_error(err, kCapacity, "truncation", e.what());
    return kCapacity;
  } catch (const AcceptanceError& e) {
    write_error(err, kAcceptance, "acceptance", e.what());
    return kAcceptance;
  } catch (const Error& e) {
    write_error(err, kConfig, "config", e.what());
    return kConfig;
  } catch (const Json::exception& e) {
    write_error(err, kConfig, "config", e.what());
    return kConfig;
  }
  return kConfig;
}

}  // namespace bbmtraps::cli
