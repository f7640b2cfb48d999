#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kgstep/harness/config.hpp"
#include "kgstep/harness/io.hpp"
#include "kgstep/harness/runner.hpp"

using namespace kgstep;
using namespace kgstep::harness;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kgstep_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.L = 20.0;
  c.n_cells = 400;
  c.dt = 0.02;
  c.T = 2.0;
  c.stride = 5;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KGSTEP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsMatchPaperSetup) {
  const RunConfig c;
  EXPECT_EQ(c.c, 1.0);
  EXPECT_EQ(c.L, 60.0);
  EXPECT_EQ(c.n_cells, 2400);
  EXPECT_NEAR(c.h(), 0.05, 1e-15);
  EXPECT_EQ(c.dt, 0.01);
  EXPECT_EQ(c.T, 15.0);
  EXPECT_EQ(c.n_steps(), 1500);
  EXPECT_EQ(c.beta, 0.25);
  EXPECT_EQ(c.gamma, 0.5);
  EXPECT_EQ(c.potential.a1, 0.0);
  EXPECT_EQ(c.stride, 10);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesNestedValues) {
  const auto c = parse_config(R"({
    "potential": {"kind": "step", "a2": 15},
    "dt": 0.02,
    "smoothing": {"kernel": "gaussian", "bandwidth": 0.3},
    "window": {"policy": "fixed", "t_lo": 6, "t_hi": 15}
  })");
  EXPECT_EQ(c.potential.a2, 15.0);
  EXPECT_EQ(c.dt, 0.02);
  EXPECT_EQ(c.smoothing.kernel, KernelKind::gaussian);
  EXPECT_EQ(c.window.policy, "fixed");
  EXPECT_EQ(c.n_cells, 2400);
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_config("{\n  \"dt\": 0.01,\n  \"n_cels\": 100\n}");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("n_cels"), std::string::npos);
  }
  try {
    parse_config("{\n  \"potential\": {\n    \"kind\": \"step\",\n    \"hieght\": 2\n  }\n}");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line().value_or(-1), 4);
    EXPECT_NE(std::string(e.what()).find("potential.hieght"), std::string::npos);
  }
}

TEST(Config, WrongTypeAndMalformedJson) {
  try {
    parse_config("{\n\n  \"T\": \"fifteen\"\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line().value_or(-1), 3);
  }
  try {
    parse_config("{\n  \"T\": 15,\n  \"dt\": \n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line().value_or(-1), 4);
  }
}

TEST(Config, ValidationRules) {
  auto bad = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](RunConfig& c) { c.n_cells = 2401; });
  bad([](RunConfig& c) { c.dt = 0.007; });
  bad([](RunConfig& c) { c.dt = -0.01; });
  bad([](RunConfig& c) { c.solver = "lu"; });
  bad([](RunConfig& c) { c.stride = 0; });
  bad([](RunConfig& c) { c.potential.a2 = -1.0; });
  bad([](RunConfig& c) { c.potential.kind = "ramp"; });
  bad([](RunConfig& c) { c.snapshot_times = {20.0}; });
  bad([](RunConfig& c) { c.window = {"fixed", 5.0, 5.0}; });
  bad([](RunConfig& c) { c.cg.rel_tolerance = 0.0; });
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = small_config();
  c.potential = {"barrier", 0.5, 0.0, -1.0, 2.0, 7.0, {}, {}};
  c.snapshot_times = {0.5, 1.0};
  c.smoothing = {KernelKind::moving_average, 0.4};
  c.seed_label = "rt";
  const auto back = parse_config(to_json(c).dump());
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Simulate, RowCountDeterminismAndManifest) {
  const auto dir = scratch("simulate");
  RunConfig c = small_config();
  c.snapshot_times = {0.0, 1.0};
  const auto r1 = simulate_to_dir(c, dir / "a");
  ASSERT_TRUE(r1.ok);
  const auto table = read_csv(dir / "a" / "observables.csv");
  EXPECT_EQ(table.names, (std::vector<std::string>{"t", "l2_sq", "mean", "variance", "sigma", "energy"}));
  EXPECT_EQ(table.columns[0].size(), static_cast<std::size_t>(1 + c.n_steps() / c.stride));
  EXPECT_TRUE(fs::exists(dir / "a" / "snapshot_t0.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "snapshot_t1.csv"));

  simulate_to_dir(c, dir / "b");
  EXPECT_EQ(slurp(dir / "a" / "observables.csv"), slurp(dir / "b" / "observables.csv"));
  EXPECT_EQ(slurp(dir / "a" / "snapshot_t1.csv"), slurp(dir / "b" / "snapshot_t1.csv"));

  const auto chk = verify_manifest(dir / "a" / "manifest.json");
  EXPECT_TRUE(chk.ok);
  EXPECT_EQ(chk.n_files, 3);

  // A manifest is itself a config; rerunning it reproduces the series.
  const auto again = load_config((dir / "a" / "manifest.json").string());
  simulate_to_dir(again, dir / "c");
  EXPECT_EQ(slurp(dir / "a" / "observables.csv"), slurp(dir / "c" / "observables.csv"));

  {
    std::ofstream tamper(dir / "a" / "observables.csv", std::ios::app);
    tamper << "1,2,3,4,5,6\n";
  }
  EXPECT_FALSE(verify_manifest(dir / "a" / "manifest.json").ok);
}

TEST(Simulate, CsvRoundTripsDoubles) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.65320238466816216}) {
    double back = 0.0;
    const auto s = fmt_double(v);
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
}

TEST(Simulate, SolverFailureIsFlaggedAsPartial) {
  const auto dir = scratch("partial");
  RunConfig c = small_config();
  c.cg.max_iterations = 1;
  c.cg.rel_tolerance = 1e-15;
  const auto r = simulate_to_dir(c, dir);
  EXPECT_FALSE(r.ok);
  const auto man = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(man["status"], "failed");
  EXPECT_EQ(man["partial"], true);
  EXPECT_TRUE(verify_manifest(dir / "manifest.json").ok);
}

TEST(Sweep, IsolatesFailuresAndIgnoresParallelism) {
  const auto dir = scratch("sweep");
  RunConfig c = small_config();
  const std::vector<double> a2s{150.0, -1.0, 15.0};
  const auto serial = run_sweep(c, a2s, dir / "serial", 1);
  const auto parallel = run_sweep(c, a2s, dir / "parallel", 3);
  ASSERT_EQ(serial.size(), 3u);
  EXPECT_TRUE(serial[0].ok);
  EXPECT_FALSE(serial[1].ok);
  EXPECT_TRUE(serial[2].ok);
  write_sweep_table(dir / "serial.csv", serial, 9.0);
  write_sweep_table(dir / "parallel.csv", parallel, 9.0);
  EXPECT_EQ(slurp(dir / "serial.csv"), slurp(dir / "parallel.csv"));
  EXPECT_NE(slurp(dir / "serial.csv").find("failed"), std::string::npos);
  EXPECT_EQ(slurp(dir / "serial" / "a2_150" / "observables.csv"), slurp(dir / "parallel" / "a2_150" / "observables.csv"));
  EXPECT_THROW(run_sweep(c, {}, dir, 1), ConfigError);
}

TEST(OracleCheck, RefusesStepPotential) {
  RunConfig c = small_config();
  try {
    run_oracle_check(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no oracle for step potential"), std::string::npos);
  }
}

TEST(OracleCheck, MasslessAndMassiveRunsPass) {
  RunConfig c = small_config();
  c.potential.kind = "constant";
  c.potential.a1 = 0.0;
  const auto free = run_oracle_check(c);
  EXPECT_EQ(free.oracle, "dalembert");
  EXPECT_TRUE(free.pass) << free.max_error;
  EXPECT_EQ(free.records.size(), 21u);  // 100 steps, stride 5
  c.potential.a1 = 9.0;
  const auto massive = run_oracle_check(c);
  EXPECT_EQ(massive.oracle, "fourier");
  EXPECT_TRUE(massive.pass) << massive.max_error;
}

TEST(Convergence, NeedsThreeLevelsAndConstantPotential) {
  RunConfig c = small_config();
  EXPECT_THROW(run_convergence(c, "dt", {0.04, 0.02, 0.01}), ConfigError);
  c.potential.kind = "constant";
  c.potential.a1 = 9.0;
  EXPECT_THROW(run_convergence(c, "dt", {0.04, 0.02}), ConfigError);
  EXPECT_THROW(run_convergence(c, "x", {0.04, 0.02, 0.01}), ConfigError);
  const auto r = run_convergence(c, "dt", {0.1, 0.05, 0.025});
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_GT(r.levels[0].error, r.levels[2].error);
  EXPECT_TRUE(std::isnan(r.levels[0].order));
}

TEST(Trend, ReanalysisOfCsvMatchesInMemory) {
  const auto dir = scratch("trend");
  RunConfig c = small_config();
  c.T = 12.0;  // sigma settles near t = 7, leaving a post-impact stretch to fit
  c.L = 30.0;
  c.n_cells = 600;
  c.stride = 2;
  c.potential.a2 = 150.0;
  const auto res = simulate_to_dir(c, dir);
  ASSERT_TRUE(res.ok);
  const auto t = read_csv(dir / "observables.csv");
  const auto again = analyze_trend(t.column("t"), t.column("mean"), t.column("sigma"), trend_options(c));
  const auto& s = res.output.series;
  const auto mem = analyze_trend(s.times(), s.means(), s.sigmas(), trend_options(c));
  EXPECT_EQ(again.mean_fit.slope, mem.mean_fit.slope);
  EXPECT_EQ(again.window.fit.lo, mem.window.fit.lo);
  EXPECT_NEAR(mem.mean_fit.slope, -1.0, 0.02);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string out = " --out " + (dir / "run").string();
  EXPECT_EQ(run_cli("simulate --L 20 --n-cells 400 --dt 0.02 --T 1" + out), 0);
  EXPECT_EQ(run_cli("verify-manifest " + (dir / "run" / "manifest.json").string()), 0);
  EXPECT_EQ(run_cli("simulate --n-cells 401" + out), 2);
  EXPECT_EQ(run_cli("simulate --no-such-flag"), 2);
  EXPECT_EQ(run_cli("oracle-check --L 20 --n-cells 400 --dt 0.02 --T 1" + out), 2);
  EXPECT_EQ(run_cli("oracle-check --potential constant --a1 9 --L 20 --n-cells 400 --dt 0.02 --T 1 --threshold 1e-9" + out), 4);
  EXPECT_EQ(run_cli("simulate --L 20 --n-cells 400 --dt 0.02 --T 1 --cg-max-iter 1 --cg-tol 1e-15" + out), 3);
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << "{\n  \"dt\": 0.01,\n  \"tee\": 3\n}\n";
  }
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string() + out), 2);
}
