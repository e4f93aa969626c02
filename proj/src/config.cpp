#include "bbmtraps/config.hpp"

#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>

#include "bbmtraps/errors.hpp"

namespace bbmtraps {

namespace {

void reject_unknown(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key \"" + it.key() + "\"");
  }
}

double number(const Json& j, std::string_view where, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing \"" + key + "\"");
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string(where) + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const Json& j, std::string_view where, const char* key, double fallback) {
  return j.contains(key) ? number(j, where, key) : fallback;
}

long integer_or(const Json& j, std::string_view where, const char* key, long fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string(where) + "." + key + ": expected an integer");
  return v.get<long>();
}

std::string string_or(const Json& j, std::string_view where, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(std::string(where) + "." + key + ": expected a string");
  return v.get<std::string>();
}

Statistic statistic_from_json(const Json& j) {
  constexpr std::string_view where = "estimation.statistics[]";
  reject_unknown(j, where, {"kind", "t", "s_fraction", "epsilon", "rule"});
  const std::string kind = string_or(j, where, "kind", "");
  Statistic s;
  s.t = number(j, where, "t");
  if (kind == "survival") {
    s.kind = Statistic::Kind::kSurvival;
  } else if (kind == "population") {
    s.kind = Statistic::Kind::kPopulation;
    s.s_fraction = number_or(j, where, "s_fraction", 0.5);
    if (!(s.s_fraction > 0.0 && s.s_fraction < 1.0)) throw ConfigError("population s_fraction must lie in (0, 1)");
  } else if (kind == "range") {
    s.kind = Statistic::Kind::kRange;
    s.epsilon = number(j, where, "epsilon");
  } else if (kind == "trap_presence") {
    s.kind = Statistic::Kind::kTrapPresence;
    s.epsilon = number(j, where, "epsilon");
    const std::string rule = string_or(j, where, "rule", "eps_t");
    if (rule == "eps_t")
      s.rule = BallRule::kEpsT;
    else if (rule == "eps_t_root")
      s.rule = BallRule::kEpsTRoot;
    else
      throw ConfigError("trap_presence rule must be \"eps_t\" or \"eps_t_root\"");
  } else {
    throw ConfigError("unknown statistic kind \"" + kind + "\"");
  }
  if (s.t < 0.0) throw ConfigError("statistic time must be >= 0");
  if (s.kind != Statistic::Kind::kSurvival && s.kind != Statistic::Kind::kPopulation && !(s.epsilon > 0.0))
    throw ConfigError("statistic epsilon must be positive");
  return s;
}

const char* kind_name(Statistic::Kind k) {
  switch (k) {
    case Statistic::Kind::kSurvival:
      return "survival";
    case Statistic::Kind::kPopulation:
      return "population";
    case Statistic::Kind::kRange:
      return "range";
    case Statistic::Kind::kTrapPresence:
      return "trap_presence";
  }
  return "survival";
}

}  // namespace

OffspringLaw offspring_law_from_json(const Json& j) {
  if (!j.is_object() || j.empty()) throw ConfigError("offspring: expected a non-empty object of count -> probability");
  std::map<int, double> probs;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t used = 0;
    int k = -1;
    try {
      k = std::stoi(it.key(), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it.key().size() || k < 0) throw ConfigError("offspring: key \"" + it.key() + "\" is not a count");
    if (!it.value().is_number()) throw ConfigError("offspring: probability for " + it.key() + " is not a number");
    probs[k] = it.value().get<double>();
  }
  try {
    return OffspringLaw(probs);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("offspring: ") + e.what());
  }
}

Json to_json(const OffspringLaw& law) {
  Json j = Json::object();
  for (auto [k, p] : law.to_map()) j[std::to_string(k)] = p;
  return j;
}

TrapFieldSpec trap_field_from_json(const Json& j) {
  constexpr std::string_view where = "trap_field";
  if (!j.is_object()) throw ConfigError("trap_field: expected an object");
  const std::string kind = string_or(j, where, "kind", "");
  try {
    if (kind == "uniform") {
      reject_unknown(j, where, {"d", "kind", "v", "a"});
      return TrapFieldSpec::uniform(static_cast<int>(integer_or(j, where, "d", 0)), number(j, where, "v"),
                                    number(j, where, "a"));
    }
    if (kind == "radial") {
      reject_unknown(j, where, {"d", "kind", "l", "x0", "a"});
      return TrapFieldSpec::radial(static_cast<int>(integer_or(j, where, "d", 0)), number(j, where, "l"),
                                   number(j, where, "a"), number_or(j, where, "x0", -1.0));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("trap_field: ") + e.what());
  }
  throw ConfigError("trap_field.kind must be \"uniform\" or \"radial\"");
}

Json to_json(const TrapFieldSpec& spec) {
  Json j;
  j["d"] = spec.d;
  j["a"] = spec.a;
  if (auto* u = std::get_if<UniformIntensity>(&spec.kind)) {
    j["kind"] = "uniform";
    j["v"] = u->v;
  } else {
    const auto& r = std::get<RadialIntensity>(spec.kind);
    j["kind"] = "radial";
    j["l"] = r.l;
    j["x0"] = r.x0;
  }
  return j;
}

Json to_json(const Statistic& s) {
  Json j;
  j["kind"] = kind_name(s.kind);
  j["t"] = s.t;
  if (s.kind == Statistic::Kind::kPopulation) j["s_fraction"] = s.s_fraction;
  if (s.kind == Statistic::Kind::kRange || s.kind == Statistic::Kind::kTrapPresence) j["epsilon"] = s.epsilon;
  if (s.kind == Statistic::Kind::kTrapPresence) j["rule"] = s.rule == BallRule::kEpsT ? "eps_t" : "eps_t_root";
  return j;
}

Json to_json(const EstimateResult& e) {
  Json j;
  j["statistic"] = e.statistic;
  j["t"] = e.t;
  j["estimate"] = e.estimate;
  j["stderr"] = e.std_error;
  j["n_total"] = e.n_total;
  j["n_accepted"] = e.n_accepted;
  j["n_truncated"] = e.n_truncated;
  j["seed"] = e.seed;
  j["wall_seconds"] = e.wall_seconds;
  j["warnings"] = e.warnings;
  return j;
}

Json ExperimentConfig::resolved() const {
  Json j;
  j["offspring"] = to_json(branching.law);
  j["beta"] = branching.beta;
  if (field) j["trap_field"] = to_json(*field);
  Json sim;
  sim["d"] = simulation.d;
  sim["t"] = simulation.horizon;
  sim["dt"] = simulation.dt;
  sim["mode"] = simulation.mode == SimulationMode::kTwoType ? "two_type" : "plain";
  sim["max_particles"] = simulation.max_particles;
  sim["track_paths"] = simulation.track_paths;
  j["simulation"] = sim;
  Json est;
  est["n"] = replicates;
  est["seed"] = seed;
  est["conditioning"] = conditioning == Conditioning::kNone ? "none" : "survival";
  if (lookahead >= 0.0) est["lookahead"] = lookahead;
  est["statistics"] = Json::array();
  for (const auto& s : statistics) est["statistics"].push_back(to_json(s));
  j["estimation"] = est;
  if (rate) j["rate"] = Json{{"l", rate->l}, {"epsilon", rate->epsilon}, {"tol", rate->tol}};
  j["output"] = Json{{"dir", output_dir}};
  return j;
}

std::string ExperimentConfig::hash() const {
  Json j = resolved();
  j.erase("output");
  return fnv1a_hex(j.dump());
}

MCConfig ExperimentConfig::mc_config(int jobs) const {
  if (!field) throw ConfigError("estimation needs a trap_field section");
  MCConfig mc;
  mc.replicates = replicates;
  mc.seed = seed;
  mc.simulation = simulation;
  mc.field = *field;
  mc.conditioning = conditioning;
  mc.jobs = jobs;
  mc.lookahead = lookahead;
  return mc;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  reject_unknown(j, "config", {"offspring", "beta", "trap_field", "simulation", "estimation", "rate", "output"});
  ExperimentConfig cfg;
  if (j.contains("offspring")) cfg.branching.law = offspring_law_from_json(j.at("offspring"));
  cfg.branching.beta = number_or(j, "config", "beta", 1.0);
  if (!(cfg.branching.beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (j.contains("trap_field")) cfg.field = trap_field_from_json(j.at("trap_field"));

  const Json sim = j.value("simulation", Json::object());
  reject_unknown(sim, "simulation", {"d", "t", "dt", "mode", "max_particles", "track_paths"});
  cfg.simulation.params = cfg.branching;
  cfg.simulation.d = static_cast<int>(integer_or(sim, "simulation", "d", cfg.field ? cfg.field->d : 1));
  if (cfg.field && cfg.field->d != cfg.simulation.d) throw ConfigError("simulation.d differs from trap_field.d");
  cfg.simulation.horizon = number_or(sim, "simulation", "t", 1.0);
  const double default_dt = SimulationConfig::default_dt(cfg.field ? cfg.field->a : 0.5, cfg.simulation.d);
  cfg.simulation.dt = number_or(sim, "simulation", "dt", default_dt);
  const std::string mode = string_or(sim, "simulation", "mode", "plain");
  if (mode == "plain")
    cfg.simulation.mode = SimulationMode::kPlain;
  else if (mode == "two_type")
    cfg.simulation.mode = SimulationMode::kTwoType;
  else
    throw ConfigError("simulation.mode must be \"plain\" or \"two_type\"");
  cfg.simulation.max_particles = integer_or(sim, "simulation", "max_particles", 1'000'000);
  if (sim.contains("track_paths")) {
    if (!sim.at("track_paths").is_boolean()) throw ConfigError("simulation.track_paths: expected a boolean");
    cfg.simulation.track_paths = sim.at("track_paths").get<bool>();
  }
  try {
    cfg.simulation.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("simulation: ") + e.what());
  }
  if (cfg.simulation.mode == SimulationMode::kTwoType && !cfg.branching.law.supercritical())
    throw ConfigError("simulation.mode two_type needs a supercritical offspring law");

  const Json est = j.value("estimation", Json::object());
  reject_unknown(est, "estimation", {"n", "seed", "conditioning", "lookahead", "statistics"});
  cfg.replicates = integer_or(est, "estimation", "n", 1000);
  if (cfg.replicates < 1) throw ConfigError("estimation.n must be >= 1");
  if (est.contains("seed")) {
    const Json& s = est.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("estimation.seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  const std::string cond = string_or(est, "estimation", "conditioning", "survival");
  if (cond == "survival")
    cfg.conditioning = Conditioning::kSurvival;
  else if (cond == "none")
    cfg.conditioning = Conditioning::kNone;
  else
    throw ConfigError("estimation.conditioning must be \"survival\" or \"none\"");
  cfg.lookahead = number_or(est, "estimation", "lookahead", -1.0);
  if (est.contains("statistics")) {
    if (!est.at("statistics").is_array()) throw ConfigError("estimation.statistics: expected an array");
    for (const auto& s : est.at("statistics")) {
      cfg.statistics.push_back(statistic_from_json(s));
      if (cfg.statistics.back().t > cfg.simulation.horizon)
        throw ConfigError("statistic time exceeds simulation.t");
    }
  }

  if (j.contains("rate")) {
    const Json& r = j.at("rate");
    reject_unknown(r, "rate", {"l", "epsilon", "tol"});
    RateSettings rs;
    rs.l = number_or(r, "rate", "l", rs.l);
    rs.epsilon = number_or(r, "rate", "epsilon", rs.epsilon);
    rs.tol = number_or(r, "rate", "tol", rs.tol);
    cfg.rate = rs;
  }
  if (j.contains("output")) {
    reject_unknown(j.at("output"), "output", {"dir"});
    cfg.output_dir = string_or(j.at("output"), "output", "dir", cfg.output_dir);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return experiment_config_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace bbmtraps
