#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tdinf/error.hpp"
#include "tdinf/harness.hpp"

using namespace tdinf;
namespace fs = std::filesystem;

namespace {

std::string csv_of(const ResultTable& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.horizon = 2000;
  c.trials = 12;
  c.n_sims = 500;
  c.base_seed = 3;
  c.checkpoints = CheckpointSpec{CheckpointSpec::Grid::Geometric, 100, 2};
  return c;
}

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / ("tdinf_test_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" TDINF_CLI_PATH "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Csv, EmptyTableIsHeaderOnly) {
  EXPECT_EQ(csv_of(ResultTable{}), "experiment,t,statistic,value,trials,seed\n");
}

TEST(Csv, NonFiniteAndPrecision) {
  ResultTable t;
  t.rows.push_back({"x", 1, "a", 0.1, 1, 2});
  t.rows.push_back({"x", 2, "a", std::numeric_limits<double>::infinity(), 1, 2});
  const std::string s = csv_of(t);
  EXPECT_NE(s.find("x,1,a,0.10000000000000001,1,2"), std::string::npos);
  EXPECT_NE(s.find("inf"), std::string::npos);
}

TEST(Json, RoundTripIsBitwise) {
  const ResultTable t = run_experiment(small(ExperimentKind::CovError));
  std::ostringstream out;
  write_json(t, out);
  const nlohmann::json j = nlohmann::json::parse(out.str());
  ASSERT_EQ(j.at("rows").size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = j.at("rows")[i];
    if (std::isfinite(t.rows[i].value)) EXPECT_EQ(r.at("value").get<double>(), t.rows[i].value);
    EXPECT_EQ(r.at("t").get<long>(), t.rows[i].t);
    EXPECT_EQ(r.at("statistic").get<std::string>(), t.rows[i].statistic);
  }
  EXPECT_EQ(j.at("header").at("config").at("trials").get<long>(), 12);
}

TEST(Config, Validation) {
  ExperimentConfig c;
  c.horizon = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = ExperimentConfig{};
  c.delta = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = ExperimentConfig{};
  c.trials = 0;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_THROW(parse_experiment_kind("nope"), DomainError);
  EXPECT_EQ(parse_experiment_kind("l2-quantile"), ExperimentKind::L2Quantile);
}

TEST(Grid, EveryCheckpointAppearsOncePerStatistic) {
  const ExperimentConfig c = small(ExperimentKind::L2Quantile);
  const ResultTable t = run_experiment(c);
  EXPECT_EQ(t.times("l2_quantile"), c.checkpoint_grid());
  ExperimentConfig cov = small(ExperimentKind::Coverage);
  cov.checkpoints.reset();
  EXPECT_EQ(cov.checkpoint_grid().front(), 100);
  EXPECT_EQ(cov.checkpoint_grid().size(), 20u);
}

TEST(Determinism, IndependentOfThreadCount) {
  for (ExperimentKind kind : {ExperimentKind::L2Quantile, ExperimentKind::BerryEsseen, ExperimentKind::CovError,
                              ExperimentKind::Coverage}) {
    ExperimentConfig c = small(kind);
    c.threads = 1;
    const std::string serial = csv_of(run_experiment(c));
    c.threads = 4;
    EXPECT_EQ(csv_of(run_experiment(c)), serial) << to_string(kind);
    EXPECT_EQ(csv_of(run_experiment(c)), serial) << to_string(kind);
  }
}

TEST(Divergence, MatchesClosedForm) {
  ExperimentConfig c;
  c.kind = ExperimentKind::Divergence;
  c.horizon = 50;
  c.checkpoints = CheckpointSpec{CheckpointSpec::Grid::Arithmetic, 10, 20};
  const ResultTable t = run_experiment(c);
  const double got = t.value(50, "delta_bar");
  const double closed = t.value(50, "delta_bar_closed_form");
  EXPECT_LE(std::abs(got - closed), 1e-8 * std::abs(closed));
  EXPECT_LT(t.value(10, "delta_bar_norm"), t.value(20, "delta_bar_norm"));
  EXPECT_LT(t.value(20, "delta_bar_norm"), t.value(50, "delta_bar_norm"));
}

TEST(GroundTruthKind, DumpsMoments) {
  ExperimentConfig c;
  c.kind = ExperimentKind::GroundTruth;
  const ResultTable t = run_experiment(c);
  EXPECT_NEAR(t.value(0, "mu[1]"), 0.25, 1e-12);
  EXPECT_GT(t.value(0, "theta_star[3]"), 0.0);
  EXPECT_THROW(t.value(0, "missing"), DomainError);
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = temp_dir();
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  const std::string args = "experiment l2-quantile --horizon 500 --trials 8 --nsims 200 --checkpoints-per-decade 2";
  ASSERT_EQ(run_cli(args + " --threads 1 --out " + a), 0);
  ASSERT_EQ(run_cli(args + " --threads 3 --out " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a).rfind("experiment,t,statistic,value,trials,seed\n", 0), 0u);

  EXPECT_EQ(run_cli("ground-truth --format json --out " + (dir / "g.json").string()), 0);
  const nlohmann::json g = nlohmann::json::parse(slurp(dir / "g.json"));
  EXPECT_TRUE(g.contains("header"));

  EXPECT_NE(run_cli("experiment bogus"), 0);
  EXPECT_NE(run_cli("run-td --dim 4"), 0);
  EXPECT_NE(run_cli("run-td --mdp-json /nonexistent.json"), 0);
  EXPECT_NE(run_cli(""), 0);
  fs::remove_all(dir);
}

TEST(Cli, EnvironmentOverride) {
  const fs::path dir = temp_dir();
  const std::string out = (dir / "r.csv").string();
  ASSERT_EQ(run_cli("run-td --out " + out, "TDINF_HORIZON=300 TDINF_CHECKPOINT_EVERY=100"), 0);
  const std::string s = slurp(out);
  EXPECT_NE(s.find("run-td,300,theta_bar[1]"), std::string::npos);
  EXPECT_EQ(s.find("run-td,400,"), std::string::npos);
  EXPECT_NE(run_cli("run-td", "TDINF_HORIZON=0"), 0);
  fs::remove_all(dir);
}

TEST(Cli, MdpJsonInput) {
  const fs::path dir = temp_dir();
  {
    std::ofstream f(dir / "m.json");
    f << mdp_to_json(build_divergence_mdp()).dump();
  }
  const std::string out = (dir / "gt.csv").string();
  ASSERT_EQ(run_cli("ground-truth --mdp-json " + (dir / "m.json").string() + " --out " + out), 0);
  const std::string s = slurp(out);
  const std::size_t at = s.find("A[1][1],");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(s.substr(at + 8)), 0.54475, 1e-12);
  fs::remove_all(dir);
}
