#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("latticectl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  Invocation run(const std::string& args, const std::string& out = "out") {
    const std::string cmd = std::string(LATTICECTL_BIN) + " " + args + " --out " + (dir_ / out).string() + " 2>&1";
    Invocation r;
    FILE* pipe = popen(cmd.c_str(), "r");
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  json report(const std::string& name, const std::string& out = "out") {
    std::ifstream in(dir_ / out / (name + ".json"));
    return json::parse(in);
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const char* kToda = "n=3\ntopology=periodic\npotential=toda\ncontrol_sites=1\nq=0.1,0,-0.1\np=0.2,-0.1,-0.1\n";

}  // namespace

TEST_F(Cli, SimulateFreeConservesEnergy) {
  const auto cfg = write("toda.cfg", std::string(kToda) + "T=10\n");
  const auto r = run("simulate --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = report("simulate");
  EXPECT_LT(j["conservation"]["max_energy_drift"].get<double>(), 1e-8);
  EXPECT_EQ(j["verdict"], "pass");
  EXPECT_EQ(j["config"]["potential"], "toda");
  const std::string csv = slurp(dir_ / "out" / "trajectory.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,q1,q2,q3,p1,p2,p3,u1");
}

TEST_F(Cli, SimulateUnitControlMomentum) {
  const auto cfg = write("toda.cfg", kToda);
  const auto ctl = write("u.txt", "# duration,u\n1,1\n");
  const auto r = run("simulate --config " + cfg.string() + " --control " + ctl.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(report("simulate")["conservation"]["momentum_change"].get<double>(), 1.0, 1e-9);
}

TEST_F(Cli, MissingPotentialIsUsageError) {
  const auto cfg = write("bad.cfg", "n=3\ntopology=periodic\n");
  const auto r = run("simulate --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad.cfg:3: missing required key 'potential'"), std::string::npos) << r.out;
}

TEST_F(Cli, UnknownSubcommandIsUsageError) { EXPECT_EQ(run("frobnicate").code, 2); }

TEST_F(Cli, NumericalFailureExitCode) {
  const auto cfg = write("blow.cfg", "n=3\npotential=toda\nq=-300,0,300\nT=1\n");
  EXPECT_EQ(run("simulate --config " + cfg.string()).code, 3);
}

TEST_F(Cli, RankTodaDefaultPoint) {
  const auto cfg = write("toda.cfg", "n=3\npotential=toda\n");
  ASSERT_EQ(run("rank --config " + cfg.string()).code, 0);
  const auto j = report("rank");
  EXPECT_EQ(j["report"]["rank"], 6);
  EXPECT_EQ(j["verdict"], "pass");
}

TEST_F(Cli, RankHarmonicReportsKalman) {
  const auto cfg = write("h.cfg", "n=3\npotential=harmonic\nexpect_rank=4\n");
  ASSERT_EQ(run("rank --config " + cfg.string()).code, 0);
  const auto j = report("rank");
  EXPECT_EQ(j["report"]["rank"], 4);
  EXPECT_EQ(j["kalman_rank"], 4);
}

TEST_F(Cli, GenericCheck) {
  EXPECT_EQ(run("generic-check --config " + write("t.cfg", "potential=toda\n").string()).code, 0);
  EXPECT_EQ(report("generic-check")["report"]["classification"], "generic");
  EXPECT_EQ(run("generic-check --config " + write("q.cfg", "potential=quartic\n").string()).code, 1);
  EXPECT_EQ(report("generic-check")["report"]["classification"], "even-shift");
}

TEST_F(Cli, CounterexamplePeriodicQuartic) {
  ASSERT_EQ(run("counterexample --case periodic-quartic").code, 0);
  const auto j = report("counterexample");
  EXPECT_LT(j["result"]["residual"].get<double>(), 1e-7);
  EXPECT_EQ(j["verdict"], "pass");
  EXPECT_TRUE(j.contains("config"));
}

TEST_F(Cli, CounterexampleNegativeControl) {
  ASSERT_EQ(run("counterexample --case toda-negative --horizon 1").code, 0);
  EXPECT_GT(report("counterexample")["result"]["residual"].get<double>(), 1e-3);
  EXPECT_EQ(run("counterexample --case nope").code, 2);
}

TEST_F(Cli, SteerGoalEqualsStart) {
  const auto cfg = write("s.cfg", kToda);
  ASSERT_EQ(run("steer --config " + cfg.string()).code, 0);
  const auto j = report("steer");
  EXPECT_TRUE(j["plan"]["steps"].empty());
  EXPECT_EQ(j["plan"]["achieved_distance"], 0.0);
}

TEST_F(Cli, SteerAdmissibleWritesControl) {
  const auto cfg = write("s.cfg", std::string(kToda) + "goal.q=0.1,0,-0.1\ngoal.p=0.2,-0.1,-0.1\nmode=admissible\n");
  ASSERT_EQ(run("steer --config " + cfg.string()).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "trajectory.csv"));
  EXPECT_EQ(report("steer")["plan"]["mode"], "admissible");
}

TEST_F(Cli, Recurrence) {
  const auto cfg = write("r.cfg", std::string(kToda) + "eps=0.05\ntmin=1\ntmax=500\n");
  ASSERT_EQ(run("recurrence --config " + cfg.string()).code, 0);
  const auto j = report("recurrence");
  EXPECT_TRUE(j["result"]["found"].get<bool>());
  EXPECT_LE(j["result"]["distance"].get<double>(), 0.05);
  const auto tight = write("t.cfg", std::string(kToda) + "eps=1e-12\ntmin=1\ntmax=2\n");
  EXPECT_EQ(run("recurrence --config " + tight.string()).code, 1);
  EXPECT_EQ(report("recurrence")["verdict"], "not-found");
}

TEST_F(Cli, Bounds) {
  const auto cfg = write("b.cfg", "potential=toda\nn=3\nc=7.38905609893065\nQ=0\nsamples=2000\n");
  ASSERT_EQ(run("bounds --config " + cfg.string() + " --samples-csv").code, 0);
  const auto j = report("bounds");
  EXPECT_NEAR(j["box"]["bond_bound"].get<double>(), 1.0, 1e-10);
  EXPECT_EQ(j["sampling"]["box_violations"], 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "samples.csv"));
}

TEST_F(Cli, ReproducibleOutputs) {
  const auto cfg = write("toda.cfg", std::string(kToda) + "T=3\nu=0.5\n");
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 9", "a").code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 9", "b").code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "trajectory.csv"), slurp(dir_ / "b" / "trajectory.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "simulate.json"), slurp(dir_ / "b" / "simulate.json"));
  ASSERT_EQ(run("counterexample --case open-harmonic --seed 4", "c").code, 0);
  ASSERT_EQ(run("counterexample --case open-harmonic --seed 4", "d").code, 0);
  EXPECT_EQ(slurp(dir_ / "c" / "counterexample.json"), slurp(dir_ / "d" / "counterexample.json"));
}
