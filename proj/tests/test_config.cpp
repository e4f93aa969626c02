#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bbmtraps/config.hpp"
#include "bbmtraps/errors.hpp"

using namespace bbmtraps;

namespace {

Json base() {
  return Json::parse(R"({
    "offspring": {"0": 0.25, "2": 0.75},
    "beta": 1.0,
    "trap_field": {"d": 2, "kind": "uniform", "v": 1.0, "a": 0.5},
    "simulation": {"d": 2, "t": 2.0},
    "estimation": {"n": 100, "seed": 7, "statistics": [{"kind": "survival", "t": 1.0},
                                                       {"kind": "population", "t": 2.0, "s_fraction": 0.5}]},
    "output": {"dir": "out"}
  })");
}

}  // namespace

// Published FNV-1a 64-bit test vectors.
TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(ExperimentConfig, ParsesAndResolvesDefaults) {
  const auto cfg = experiment_config_from_json(base());
  EXPECT_EQ(cfg.replicates, 100);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.simulation.d, 2);
  EXPECT_DOUBLE_EQ(cfg.simulation.dt, SimulationConfig::default_dt(0.5, 2));
  EXPECT_EQ(cfg.simulation.max_particles, 1'000'000);
  ASSERT_EQ(cfg.statistics.size(), 2u);
  EXPECT_EQ(cfg.statistics[1].kind, Statistic::Kind::kPopulation);
  EXPECT_EQ(cfg.output_dir, "out");
  const auto r = cfg.resolved();
  EXPECT_EQ(r["simulation"]["mode"], "plain");
  EXPECT_EQ(r["estimation"]["conditioning"], "survival");
}

TEST(ExperimentConfig, ResolvedRoundTrip) {
  const auto cfg = experiment_config_from_json(base());
  const auto again = experiment_config_from_json(cfg.resolved());
  EXPECT_EQ(cfg.resolved().dump(), again.resolved().dump());
  EXPECT_EQ(cfg.hash(), again.hash());
}

TEST(ExperimentConfig, HashIgnoresOutputButNotParameters) {
  auto j = base();
  const auto h = experiment_config_from_json(j).hash();
  EXPECT_EQ(h.size(), 16u);
  j["output"]["dir"] = "elsewhere";
  EXPECT_EQ(experiment_config_from_json(j).hash(), h);
  j["estimation"]["seed"] = 8;
  EXPECT_NE(experiment_config_from_json(j).hash(), h);
}

TEST(ExperimentConfig, RejectsUnknownKeys) {
  for (const char* path : {"/extra", "/simulation/extra", "/estimation/extra", "/trap_field/extra", "/output/extra"}) {
    auto j = base();
    j[Json::json_pointer(path)] = 1;
    EXPECT_THROW(experiment_config_from_json(j), ConfigError) << path;
  }
  auto j = base();
  j["estimation"]["statistics"][0]["bogus"] = 1;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
}

TEST(ExperimentConfig, RejectsBadValues) {
  auto expect_bad = [](auto edit) {
    auto j = base();
    edit(j);
    EXPECT_THROW(experiment_config_from_json(j), ConfigError) << j.dump();
  };
  expect_bad([](Json& j) { j["beta"] = -1.0; });
  expect_bad([](Json& j) { j["beta"] = "one"; });
  expect_bad([](Json& j) { j["offspring"] = Json{{"0", 0.5}, {"2", 0.4}}; });
  expect_bad([](Json& j) { j["offspring"] = Json{{"x", 1.0}}; });
  expect_bad([](Json& j) { j["simulation"]["d"] = 3; });
  expect_bad([](Json& j) { j["simulation"]["dt"] = 0.0; });
  expect_bad([](Json& j) { j["simulation"]["mode"] = "three_type"; });
  expect_bad([](Json& j) { j["estimation"]["n"] = 0; });
  expect_bad([](Json& j) { j["estimation"]["seed"] = -3; });
  expect_bad([](Json& j) { j["estimation"]["conditioning"] = "maybe"; });
  expect_bad([](Json& j) { j["estimation"]["statistics"][0]["t"] = 5.0; });
  expect_bad([](Json& j) { j["estimation"]["statistics"][0]["kind"] = "variance"; });
  expect_bad([](Json& j) { j["trap_field"]["kind"] = "lattice"; });
  expect_bad([](Json& j) { j["trap_field"]["a"] = -0.5; });
}

TEST(ExperimentConfig, TwoTypeNeedsSupercritical) {
  auto j = base();
  j["offspring"] = Json{{"0", 0.5}, {"2", 0.5}};
  j["simulation"]["mode"] = "two_type";
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
}

TEST(ExperimentConfig, RadialField) {
  auto j = base();
  j["trap_field"] = Json{{"d", 2}, {"kind", "radial"}, {"l", 0.5}, {"a", 0.5}, {"x0", 0.01}};
  const auto cfg = experiment_config_from_json(j);
  ASSERT_TRUE(cfg.field.has_value());
  EXPECT_FALSE(cfg.field->is_uniform());
  EXPECT_EQ(experiment_config_from_json(cfg.resolved()).hash(), cfg.hash());
}

TEST(ExperimentConfig, McConfigNeedsField) {
  auto j = base();
  j.erase("trap_field");
  const auto cfg = experiment_config_from_json(j);
  EXPECT_THROW(cfg.mc_config(1), ConfigError);
  const auto mc = experiment_config_from_json(base()).mc_config(3);
  EXPECT_EQ(mc.jobs, 3);
  EXPECT_EQ(mc.replicates, 100);
}

TEST(ExperimentConfig, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "bbmtraps_test_config.json";
  {
    std::ofstream out(path);
    out << base().dump(2);
  }
  EXPECT_EQ(load_experiment_config(path).hash(), experiment_config_from_json(base()).hash());
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_experiment_config(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_experiment_config(path), ConfigError);
}

TEST(JsonIo, OffspringLawRoundTrip) {
  const OffspringLaw law(std::map<int, double>{{0, 0.1}, {2, 0.2}, {3, 0.7}});
  const auto back = offspring_law_from_json(to_json(law));
  for (int k = 0; k <= 3; ++k) EXPECT_EQ(back.prob(k), law.prob(k));
}
