#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "bpmtt/experiment.hpp"

namespace fs = std::filesystem;
using namespace bpmtt;

namespace {

const char* kSmallConfig = R"(scenario:
  num_steps: 20
  num_targets: 2
tracker:
  num_potential_targets: 4
  num_particles: 200
  num_birth_particles: 200
experiment:
  runs: 2
  seed: 7
)";

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("bpmtt_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int cli(const std::string& args) {
  const std::string cmd = std::string(BPMTT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.scenario.num_targets, 5u);
  EXPECT_EQ(c.scenario.birth_times, (std::vector<std::size_t>{5, 10, 15, 20, 25}));
  EXPECT_EQ(c.tracker.num_targets, 8u);
  EXPECT_EQ(c.tracker.num_particles, 3000u);
  EXPECT_EQ(c.ospa.cutoff, 200.0);
  EXPECT_EQ(c.ospa.order, 1.0);
  EXPECT_EQ(c.tracker.birth_region.lower, Eigen::Vector2d(-3000, -3000));
}

TEST(Config, ParsesUnitsAndSections) {
  const RunConfig c = parse_config(R"(scenario:
  detection_probability: 0.6
  range_variance_m2: 49
  birth_times_steps: [1, 2, 3, 4, 5]
tracker:
  bp_tolerance: 1.0e-8
  birth_region_lower_m: [-100, -200]
  birth_region_upper_m: [100, 200]
evaluation:
  ospa_order: 2
experiment:
  threads: 3
  output_dir: results
)");
  EXPECT_EQ(c.scenario.detection_probability, 0.6);
  EXPECT_EQ(c.scenario.range_variance, 49.0);
  EXPECT_EQ(c.scenario.birth_times, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(c.tracker.association.tolerance, 1e-8);
  EXPECT_EQ(c.tracker.birth_region.upper, Eigen::Vector2d(100, 200));
  EXPECT_EQ(c.ospa.order, 2.0);
  EXPECT_EQ(c.threads, 3u);
  EXPECT_EQ(c.output_dir, "results");
}

TEST(Config, TargetCountWithoutScheduleStaggersBirths) {
  const RunConfig c = parse_config("scenario:\n  num_targets: 3\n");
  EXPECT_EQ(c.scenario.birth_times, (std::vector<std::size_t>{5, 10, 15}));
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_config("scenario:\n  num_steps: 10\n  bogus_key: 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
  }
}

TEST(Config, UnknownSectionAndBadValues) {
  EXPECT_THROW(parse_config("nonsense:\n  a: 1\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  num_steps: ten\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  detection_probability: 2\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario:\n  clutter_mean: 0\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario: [1, 2\n"), ConfigError);
}

TEST(Results, AggregateMatchesRecomputation) {
  std::vector<ResultRow> rows;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t n = 1; n <= 3; ++n) rows.push_back({r, n, 10.0 * r + n, r, n, 0.0});
  const auto mospa = aggregate_mospa(rows);
  ASSERT_EQ(mospa.size(), 3u);
  for (const auto& m : mospa) {
    EXPECT_NEAR(m.mospa, (0 + 10 + 20 + 30) / 4.0 + m.n, 1e-12);
    EXPECT_NEAR(m.mean_card_est, 1.5, 1e-12);
    EXPECT_NEAR(m.mean_card_true, static_cast<double>(m.n), 1e-12);
  }
}

TEST(Csv, RoundTripPreservesRuns) {
  TempDir dir;
  ScenarioConfig sc;
  sc.num_steps = 30;
  std::vector<SimulatedRun> runs{simulate_run(sc, 0), simulate_run(sc, 1)};
  write_frames_csv((dir / "frames.csv").string(), runs);
  write_truth_csv((dir / "truth.csv").string(), runs);
  const auto back = read_runs_csv((dir / "frames.csv").string(), (dir / "truth.csv").string(), sc);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    ASSERT_EQ(back[r].frames.size(), 30u);
    for (std::size_t n = 0; n < 30; ++n) {
      for (std::size_t s = 0; s < 3; ++s) {
        ASSERT_EQ(back[r].frames[n][s].size(), runs[r].frames[n][s].size());
        for (std::size_t m = 0; m < back[r].frames[n][s].size(); ++m) {
          EXPECT_NEAR(back[r].frames[n][s][m].range, runs[r].frames[n][s][m].range, 1e-5);
          EXPECT_NEAR(back[r].frames[n][s][m].bearing, runs[r].frames[n][s][m].bearing, 1e-6);
        }
      }
      const auto& a = back[r].truth.steps[n];
      const auto& b = runs[r].truth.steps[n];
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_LT((a[i].state - b[i].state).norm(), 1e-5);
      }
    }
  }
}

TEST(Csv, SensorOutsideScenarioIsMismatch) {
  TempDir dir;
  write_file(dir / "frames.csv", "run,n,s,range_m,bearing_deg\n0,1,4,100,10\n");
  write_file(dir / "truth.csv", "run,n,target,p1,p2,v1,v2\n");
  ScenarioConfig sc;
  EXPECT_THROW(read_runs_csv((dir / "frames.csv").string(), (dir / "truth.csv").string(), sc), DataMismatch);
}

TEST(Csv, BadHeaderIsMismatch) {
  TempDir dir;
  write_file(dir / "frames.csv", "run,n,sensor,range,bearing\n");
  write_file(dir / "truth.csv", "run,n,target,p1,p2,v1,v2\n");
  EXPECT_THROW(read_runs_csv((dir / "frames.csv").string(), (dir / "truth.csv").string(), ScenarioConfig{}),
               DataMismatch);
}

TEST(Fit, RecoversPolynomials) {
  std::vector<double> x, lin, quad;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    lin.push_back(3.0 + 2.0 * i);
    quad.push_back(1.0 - i + 0.5 * i * i);
  }
  const auto a = polynomial_fit(x, lin, 1);
  EXPECT_NEAR(a.coefficients[0], 3.0, 1e-10);
  EXPECT_NEAR(a.coefficients[1], 2.0, 1e-10);
  EXPECT_NEAR(a.r_squared, 1.0, 1e-12);
  const auto b = polynomial_fit(x, quad, 2);
  EXPECT_NEAR(b.coefficients[2], 0.5, 1e-10);
  EXPECT_LT(b.sse, 1e-18);
  EXPECT_GT(polynomial_fit(x, quad, 1).sse, 1.0);
  EXPECT_THROW(polynomial_fit({1.0}, {2.0}, 1), std::invalid_argument);
}

TEST(Bench, AxisNamesAndDefaults) {
  EXPECT_EQ(parse_bench_axis("clutter"), BenchAxis::kClutter);
  EXPECT_THROW(parse_bench_axis("speed"), std::invalid_argument);
  EXPECT_EQ(default_bench_values(BenchAxis::kSensors).front(), 2.0);
  EXPECT_EQ(default_bench_values(BenchAxis::kSensors).back(), 20.0);
  EXPECT_EQ(default_bench_values(BenchAxis::kClutter).back(), 89.0);
}

TEST(Bench, ProducesOneRowPerValue) {
  RunConfig c = parse_config(kSmallConfig);
  const auto rows = run_benchmark(c, BenchAxis::kTargets, {1, 2}, 8);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.steps, 3u);
    EXPECT_GT(r.mean_ms, 0.0);
  }
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  RunConfig c = parse_config(kSmallConfig);
  c.threads = 1;
  const auto a = run_monte_carlo(c);
  c.threads = 2;
  const auto b = run_monte_carlo(c);
  ASSERT_EQ(a.size(), 40u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].run, b[i].run);
    EXPECT_EQ(a[i].n, b[i].n);
    EXPECT_EQ(a[i].ospa, b[i].ospa);
    EXPECT_EQ(a[i].card_est, b[i].card_est);
  }
}

TEST(Cli, SimulateIsByteReproducible) {
  TempDir dir;
  write_file(dir / "cfg.yaml", kSmallConfig);
  const std::string cfg = (dir / "cfg.yaml").string();
  ASSERT_EQ(cli("simulate --config " + cfg + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("simulate --config " + cfg + " --out " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "frames.csv"), slurp(dir / "b" / "frames.csv"));
  EXPECT_EQ(slurp(dir / "a" / "truth.csv"), slurp(dir / "b" / "truth.csv"));
  EXPECT_FALSE(slurp(dir / "a" / "frames.csv").empty());
}

TEST(Cli, TrackFromFilesMatchesInlineAndIsDeterministic) {
  TempDir dir;
  write_file(dir / "cfg.yaml", kSmallConfig);
  const std::string cfg = "--config " + (dir / "cfg.yaml").string();
  ASSERT_EQ(cli("simulate " + cfg + " --out " + dir.path().string()), 0);
  const std::string files =
      " --frames " + (dir / "frames.csv").string() + " --truth " + (dir / "truth.csv").string();
  ASSERT_EQ(cli("track " + cfg + files + " --no-timing --out " + (dir / "x").string()), 0);
  ASSERT_EQ(cli("track " + cfg + files + " --no-timing --out " + (dir / "y").string()), 0);
  ASSERT_EQ(cli("track " + cfg + " --no-timing --out " + (dir / "z").string()), 0);
  const std::string x = slurp(dir / "x" / "results.csv");
  EXPECT_EQ(x, slurp(dir / "y" / "results.csv"));
  EXPECT_EQ(slurp(dir / "x" / "mospa.csv"), slurp(dir / "y" / "mospa.csv"));
  EXPECT_NE(x.find("run,n,ospa,card_est,card_true,step_ms"), std::string::npos);
  // Rows for 2 runs x 20 steps plus the header.
  EXPECT_EQ(std::count(x.begin(), x.end(), '\n'), 41);
  // Files round-trip to 9 significant digits, so only the structure is compared.
  const std::string z = slurp(dir / "z" / "results.csv");
  EXPECT_EQ(std::count(x.begin(), x.end(), '\n'), std::count(z.begin(), z.end(), '\n'));
}

TEST(Cli, MalformedConfigExitsWithConfigCode) {
  TempDir dir;
  write_file(dir / "bad.yaml", "scenario:\n  warp_drive: 9\n");
  EXPECT_EQ(cli("simulate --config " + (dir / "bad.yaml").string() + " --out " + dir.path().string()), 2);
  EXPECT_EQ(cli("simulate --config " + (dir / "missing.yaml").string()), 2);
  EXPECT_EQ(cli("simulate --runs 0"), 2);
  EXPECT_EQ(cli("no-such-command"), 2);
}

TEST(Cli, SensorMismatchExitsWithDataCode) {
  TempDir dir;
  write_file(dir / "cfg.yaml", kSmallConfig);
  write_file(dir / "frames.csv", "run,n,s,range_m,bearing_deg\n0,1,7,100,10\n");
  write_file(dir / "truth.csv", "run,n,target,p1,p2,v1,v2\n");
  EXPECT_EQ(cli("track --config " + (dir / "cfg.yaml").string() + " --frames " + (dir / "frames.csv").string() +
                " --truth " + (dir / "truth.csv").string() + " --out " + dir.path().string()),
            3);
}

TEST(Cli, OracleFailureExitCode) {
  EXPECT_EQ(cli("oracle bernoulli --steps 10 --particles 200 --tolerance 0"), 4);
}

TEST(Cli, FramesCoverEveryStepAndSensorWithExpectedCount) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --seed 7 --out " + dir.path().string()), 0);
  std::ifstream in(dir / "frames.csv");
  std::string line;
  std::getline(in, line);
  std::set<std::pair<int, int>> pairs;
  double measurements = 0.0;
  while (std::getline(in, line)) {
    int run = 0, n = 0, s = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%d,%d", &run, &n, &s), 3);
    pairs.insert({n, s});
    if (line.back() != ',') measurements += 1.0;
  }
  EXPECT_EQ(pairs.size(), 150u * 3u);

  // Poisson clutter (mean 2) plus Bernoulli(0.8) detections of the alive targets.
  double mean = 0.0, var = 0.0;
  const std::size_t births[] = {5, 10, 15, 20, 25};
  for (std::size_t n = 1; n <= 150; ++n) {
    double alive = 0.0;
    for (std::size_t b : births) alive += n >= b ? 1.0 : 0.0;
    mean += 3.0 * (2.0 + 0.8 * alive);
    var += 3.0 * (2.0 + 0.16 * alive);
  }
  EXPECT_NEAR(measurements, mean, 3.0 * std::sqrt(var));
}
