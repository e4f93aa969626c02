#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cli.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const fs::path kData = BBMTRAPS_TEST_DATA_DIR;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "bbmtraps");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = bbmtraps::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bbmtraps_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string dir() const { return dir_.string(); }
  fs::path dir_;
};

void expect_error_json(const Result& r, int code) {
  EXPECT_EQ(r.code, code) << r.err;
  const auto j = Json::parse(r.err);
  EXPECT_EQ(j.at("exit_code"), code);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.contains("message"));
}

}  // namespace

TEST_F(Cli, RateAboveCritical) {
  const auto r = call({"rate", "--d", "1", "--beta", "1", "--m", "1", "--alpha", "1", "--l", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_NEAR(j["I"].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(j["eta_star"].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(j["c_star"].get<double>(), 0.0, 1e-6);
  EXPECT_NEAR(j["l_cr"].get<double>(), 0.5 * std::sqrt(0.5), 1e-6);
  EXPECT_DOUBLE_EQ(j["uniform_rate"].get<double>(), 1.0);
  EXPECT_EQ(j["l_cr_method"], "closed_form");
}

TEST_F(Cli, RateBelowCritical) {
  const auto r = call({"rate", "--d", "1", "--beta", "1", "--m", "1", "--l", "0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out)["I"].get<double>(), 0.4 * std::numbers::sqrt2, 1e-6);
}

TEST_F(Cli, RateSweep) {
  const auto r = call({"rate", "--d", "1", "--beta", "1", "--m", "1", "--sweep", "0.1:0.5:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "l,I,eta_star,c_star");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);

  ASSERT_EQ(call({"rate", "--d", "1", "--sweep", "0.1:0.5:3", "--out", dir()}).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "phase_diagram.csv"));
  expect_error_json(call({"rate", "--sweep", "0.5:0.1:3"}), 2);
}

TEST_F(Cli, MalformedFlags) {
  expect_error_json(call({"rate", "--d", "x"}), 2);
  expect_error_json(call({"rate", "--nonsense"}), 2);
  expect_error_json(call({"frobnicate"}), 2);
  expect_error_json(call({}), 2);
  expect_error_json(call({"rate", "--d", "1", "--beta", "-1"}), 2);
}

TEST_F(Cli, Help) { EXPECT_EQ(call({"--help"}).code, 0); }

TEST_F(Cli, Gd) {
  auto g = [](std::vector<std::string> args) {
    args.insert(args.begin(), "gd");
    const auto r = call(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return Json::parse(r.out)["g"].get<double>();
  };
  EXPECT_EQ(g({"--d", "1", "--r", "1.5", "--b", "0.3"}), 3.0);
  EXPECT_NEAR(g({"--d", "2", "--r", "1", "--b", "0"}), 2.0 * std::numbers::pi, 1e-6);
  expect_error_json(call({"gd", "--d", "2", "--r", "-1"}), 2);
}

TEST_F(Cli, Lcr) {
  for (std::vector<std::string> extra : {std::vector<std::string>{}, std::vector<std::string>{"--bisection"}}) {
    std::vector<std::string> args{"lcr", "--d", "1", "--beta", "1", "--m", "1"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = call(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(Json::parse(r.out)["l_cr"].get<double>(), 0.3535534, 1e-6);
  }
}

TEST_F(Cli, ConfigErrors) {
  expect_error_json(call({"simulate"}), 2);
  expect_error_json(call({"estimate", "--config", (kData / "missing.json").string()}), 2);
  expect_error_json(call({"simulate", "--config", (kData / "unknown_key.json").string()}), 2);
}

// Golden summary: horizon 0 is a single particle at the origin.
TEST_F(Cli, SimulateHorizonZeroGolden) {
  const auto r = call({"simulate", "--config", (kData / "horizon_zero.json").string(), "--out", dir(), "--dump"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out), Json::parse(slurp(kData / "horizon_zero.summary.json")));
  EXPECT_EQ(slurp(dir_ / "tree.csv"), "id,parent,birth,death,offspring,label\n0,-1,0,0,-1,unlabeled\n");
  EXPECT_TRUE(fs::exists(dir_ / "trajectories.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "traps.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "resolved_config.json"));
}

// Mean population e at t = 1 over seeds, within 3 standard errors.
TEST_F(Cli, SimulateMeanPopulation) {
  const int runs = 4000;
  double s = 0.0, s2 = 0.0;
  for (int seed = 0; seed < runs; ++seed) {
    const auto r = call({"simulate", "--config", (kData / "yule_mean.json").string(), "--seed", std::to_string(seed),
                         "--out", dir()});
    ASSERT_EQ(r.code, 0) << r.err;
    const double n = Json::parse(r.out)["population"]["total"].get<double>();
    s += n;
    s2 += n * n;
  }
  const double mean = s / runs;
  const double se = std::sqrt((s2 / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, std::exp(1.0), 3.0 * se);
}

TEST_F(Cli, SimulateTwoTypeSkeletonSurvives) {
  for (int seed = 0; seed < 200; ++seed) {
    const auto r = call({"simulate", "--config", (kData / "two_type.json").string(), "--seed", std::to_string(seed),
                         "--out", dir()});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_GE(Json::parse(r.out)["population"]["skeleton"].get<long>(), 1);
  }
}

TEST_F(Cli, SimulateStrictCapacity) {
  const auto cfg = (kData / "capped.json").string();
  const auto loose = call({"simulate", "--config", cfg, "--out", dir()});
  ASSERT_EQ(loose.code, 0) << loose.err;
  EXPECT_TRUE(Json::parse(loose.out)["truncated"].get<bool>());
  expect_error_json(call({"simulate", "--config", cfg, "--out", dir(), "--strict"}), 4);
}

TEST_F(Cli, EstimateNoTrapsIsOne) {
  const auto r = call({"estimate", "--config", (kData / "no_traps.json").string(), "--out", dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = Json::parse(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["estimate"].get<double>(), 1.0);
  EXPECT_EQ(rows[0]["n_accepted"].get<long>(), 200);
}

// t = 0 survival is the clearing probability of B(0, a).
TEST_F(Cli, EstimateOriginClearing) {
  const auto r = call({"estimate", "--config", (kData / "origin_clearing.json").string(), "--out", dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = Json::parse(r.out);
  const double p = std::exp(-std::numbers::pi * 0.25);
  EXPECT_NEAR(rows[0]["estimate"].get<double>(), p, 3.0 * std::sqrt(p * (1 - p) / 4000));
  EXPECT_LT(rows[1]["estimate"].get<double>(), rows[0]["estimate"].get<double>());
}

TEST_F(Cli, EstimateResultsCsv) {
  const auto cfg = (kData / "origin_clearing.json").string();
  const auto r = call({"estimate", "--config", cfg, "--out", dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = Json::parse(r.out);
  std::istringstream in(slurp(dir_ / "results.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "config_hash,t,statistic,estimate,stderr,n_total,n_accepted,seed");
  std::vector<std::string> body;
  while (std::getline(in, line)) body.push_back(line);
  ASSERT_EQ(body.size(), 2u);
  const std::string hash = rows[0]["config_hash"];
  for (const auto& b : body) {
    EXPECT_EQ(b.rfind(hash + ",", 0), 0u) << b;
    EXPECT_EQ(b.substr(b.rfind(',') + 1), "9");
  }
  // Appending keeps the single header.
  ASSERT_EQ(call({"estimate", "--config", cfg, "--out", dir()}).code, 0);
  std::istringstream again(slurp(dir_ / "results.csv"));
  int lines = 0, headers = 0;
  while (std::getline(again, line)) {
    ++lines;
    headers += line.rfind("config_hash", 0) == 0 ? 1 : 0;
  }
  EXPECT_EQ(lines, 5);
  EXPECT_EQ(headers, 1);
}

// Re-running the emitted resolved config reproduces the results exactly.
TEST_F(Cli, ResolvedConfigReproduces) {
  const auto first = call({"estimate", "--config", (kData / "origin_clearing.json").string(), "--out", dir()});
  ASSERT_EQ(first.code, 0);
  const auto replay_dir = (dir_ / "replay").string();
  const auto second = call({"estimate", "--config", (dir_ / "resolved_config.json").string(), "--out", replay_dir});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(slurp(dir_ / "results.csv"), slurp(dir_ / "replay" / "results.csv"));
}

TEST_F(Cli, EstimateJobsDoNotChangeOutput) {
  const auto cfg = (kData / "origin_clearing.json").string();
  ASSERT_EQ(call({"estimate", "--config", cfg, "--out", (dir_ / "one").string(), "--jobs", "1"}).code, 0);
  ASSERT_EQ(call({"estimate", "--config", cfg, "--out", (dir_ / "eight").string(), "--jobs", "8"}).code, 0);
  EXPECT_EQ(slurp(dir_ / "one" / "results.csv"), slurp(dir_ / "eight" / "results.csv"));
}

TEST_F(Cli, JobsFromEnvironment) {
  ::setenv("BBMTRAPS_JOBS", "0", 1);
  expect_error_json(call({"estimate", "--config", (kData / "no_traps.json").string(), "--out", dir()}), 2);
  ::setenv("BBMTRAPS_JOBS", "3", 1);
  EXPECT_EQ(call({"estimate", "--config", (kData / "no_traps.json").string(), "--out", dir()}).code, 0);
  ::unsetenv("BBMTRAPS_JOBS");
}

TEST_F(Cli, EstimateLabelsConditionedRows) {
  const auto r = call({"estimate", "--config", (kData / "labels.json").string(), "--out", dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& row : Json::parse(r.out)) {
    if (row["statistic"] == "survival")
      EXPECT_FALSE(row.contains("finite_t_check"));
    else
      EXPECT_EQ(row["finite_t_check"], "directional") << row.dump();
  }
}

TEST_F(Cli, EstimateAcceptanceError) {
  expect_error_json(call({"estimate", "--config", (kData / "hopeless.json").string(), "--out", dir()}), 5);
}

TEST_F(Cli, EstimateCapacity) {
  // Every replicate truncates: TruncationError maps to exit 4.
  expect_error_json(call({"estimate", "--config", (kData / "capped.json").string(), "--out", dir()}), 4);
}

TEST_F(Cli, SeedOverride) {
  const auto cfg = (kData / "no_traps.json").string();
  const auto r = call({"estimate", "--config", cfg, "--out", dir(), "--seed", "77"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(Json::parse(r.out)[0]["seed"].get<std::uint64_t>(), 77u);
}
