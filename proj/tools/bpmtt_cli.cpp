#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "bpmtt/experiment.hpp"

namespace fs = std::filesystem;
using namespace bpmtt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitOracle = 4;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "YAML configuration file");
  cmd->add_option("--seed", o.seed, "Master seed (overrides the configuration)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--runs", o.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig config = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
  if (o.seed) config.seed = *o.seed;
  if (o.out) config.output_dir = *o.out;
  if (o.runs) config.runs = *o.runs;
  if (o.threads) config.threads = *o.threads;
  return config;
}

std::string output_path(const RunConfig& config, const std::string& name) {
  fs::create_directories(config.output_dir);
  return (fs::path(config.output_dir) / name).string();
}

int cmd_simulate(const CommonOptions& o) {
  const RunConfig config = resolve(o);
  const ScenarioConfig sc = scenario_for_run(config);
  std::vector<SimulatedRun> runs;
  for (std::size_t r = 0; r < config.runs; ++r) runs.push_back(simulate_run(sc, r));
  write_frames_csv(output_path(config, "frames.csv"), runs);
  write_truth_csv(output_path(config, "truth.csv"), runs);
  std::cout << "wrote " << runs.size() << " run(s) to " << config.output_dir << "\n";
  return 0;
}

int cmd_track(const CommonOptions& o, const std::string& frames, const std::string& truth, bool timing) {
  const RunConfig config = resolve(o);
  std::vector<ResultRow> rows;
  if (frames.empty()) {
    rows = run_monte_carlo(config);
  } else {
    if (truth.empty()) throw DataMismatch("--frames requires --truth");
    const auto runs = read_runs_csv(frames, truth, config.scenario);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      auto part = track_run(config, r, runs[r]);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  const auto mospa = aggregate_mospa(rows);
  write_results_csv(output_path(config, "results.csv"), rows, timing);
  write_mospa_csv(output_path(config, "mospa.csv"), mospa);

  double total = 0.0;
  for (const auto& m : mospa) total += m.mospa;
  std::printf("runs=%zu steps=%zu time-averaged MOSPA=%.3f m\n", rows.empty() ? 0 : rows.back().run + 1,
              mospa.size(), mospa.empty() ? 0.0 : total / static_cast<double>(mospa.size()));
  return 0;
}

int cmd_oracle_assoc(std::size_t instances, std::size_t max_k, std::size_t max_m, std::uint64_t seed) {
  const auto report = run_association_oracle(instances, max_k, max_m, 100, seed);
  std::printf("instances=%zu max_abs_error=%.3e median_abs_error=%.3e single_target_rel_error=%.3e unconverged=%zu\n",
              report.errors.size(), report.max_error, report.median_error, report.max_single_target_rel_error,
              report.unconverged);
  const bool ok = report.max_error <= 0.02 && report.median_error <= 1e-3 &&
                  report.max_single_target_rel_error <= 1e-12 && report.unconverged == 0;
  return ok ? 0 : kExitOracle;
}

int cmd_oracle_bernoulli(std::size_t steps, std::size_t particles, std::uint64_t seed, double tolerance) {
  const BernoulliScenario scenario;
  const auto zs = scripted_bernoulli_measurements(scenario, steps, steps / 5, (4 * steps) / 5, 0.0, seed);
  const auto track = track_bernoulli(scenario, zs, particles, particles, seed);
  const auto oracle = bernoulli_oracle(scenario, zs, &track.reliable);
  const auto& tracked = track.existence;
  double worst = 0.0;
  std::printf("n,oracle,tracker\n");
  for (std::size_t n = 0; n < steps; ++n) {
    worst = std::max(worst, std::abs(oracle.existence[n] - tracked[n]));
    std::printf("%zu,%.9g,%.9g\n", n + 1, oracle.existence[n], tracked[n]);
  }
  std::printf("max_abs_deviation=%.4f tolerance=%.4f\n", worst, tolerance);
  return worst <= tolerance ? 0 : kExitOracle;
}

int cmd_bench(const CommonOptions& o, const std::string& axis_name, std::vector<double> values, std::size_t steps,
              std::optional<std::size_t> particles) {
  RunConfig config = resolve(o);
  if (particles) config.tracker.num_particles = config.tracker.num_birth_particles = *particles;
  const BenchAxis axis = parse_bench_axis(axis_name);
  if (values.empty()) values = default_bench_values(axis);
  const auto rows = run_benchmark(config, axis, values, steps);

  const std::string path = output_path(config, "bench_" + axis_name + ".csv");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("cannot write '" + path + "'");
  std::fprintf(f, "%s,mean_ms,median_ms,steps\n", axis_name.c_str());
  std::printf("%s,mean_ms,median_ms,steps\n", axis_name.c_str());
  std::vector<double> x, y;
  for (const auto& r : rows) {
    std::fprintf(f, "%.9g,%.9g,%.9g,%zu\n", r.value, r.mean_ms, r.median_ms, r.steps);
    std::printf("%.9g,%.9g,%.9g,%zu\n", r.value, r.mean_ms, r.median_ms, r.steps);
    x.push_back(r.value);
    y.push_back(r.mean_ms);
  }
  std::fclose(f);
  if (rows.size() >= 3) {
    const auto linear = polynomial_fit(x, y, 1);
    const auto quadratic = polynomial_fit(x, y, 2);
    std::printf("linear R^2=%.4f quadratic R^2=%.4f\n", linear.r_squared, quadratic.r_squared);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-based belief propagation multisensor-multitarget tracker"};
  app.require_subcommand(1);

  CommonOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Write simulated truth and measurement frames");
  add_common(simulate, sim_opts);

  CommonOptions track_opts;
  std::string frames_path, truth_path;
  bool no_timing = false;
  auto* track = app.add_subcommand("track", "Run the tracker and write per-step OSPA rows");
  add_common(track, track_opts);
  track->add_option("--frames", frames_path, "Frame CSV (simulate inline when omitted)");
  track->add_option("--truth", truth_path, "Truth CSV matching --frames");
  track->add_flag("--no-timing", no_timing, "Write step_ms as 0 so output is byte-reproducible");

  auto* oracle = app.add_subcommand("oracle", "Compare against exact oracles");
  oracle->require_subcommand(1);
  std::uint64_t oracle_seed = 1;
  std::size_t instances = 1000, max_k = 3, max_m = 3;
  auto* assoc = oracle->add_subcommand("assoc", "BP marginals vs exhaustive enumeration");
  assoc->add_option("--seed", oracle_seed, "Seed");
  assoc->add_option("--instances", instances, "Random instances")->check(CLI::PositiveNumber);
  assoc->add_option("--max-targets", max_k, "Largest K")->check(CLI::Range(1, 6));
  assoc->add_option("--max-measurements", max_m, "Largest M")->check(CLI::Range(1, 6));
  std::size_t bern_steps = 50, bern_particles = 3000;
  double bern_tol = 0.05;
  auto* bernoulli = oracle->add_subcommand("bernoulli", "Single-target tracker vs grid Bernoulli filter");
  bernoulli->add_option("--seed", oracle_seed, "Seed");
  bernoulli->add_option("--steps", bern_steps, "Time steps")->check(CLI::Range(5, 100000));
  bernoulli->add_option("--particles", bern_particles, "J = I")->check(CLI::PositiveNumber);
  bernoulli->add_option("--tolerance", bern_tol, "Max per-step deviation of the existence probability");

  CommonOptions bench_opts;
  std::string axis = "sensors";
  std::vector<double> values;
  std::size_t bench_steps = 30;
  std::optional<std::size_t> bench_particles;
  auto* bench = app.add_subcommand("bench", "Per-step runtime sweep");
  add_common(bench, bench_opts);
  bench->add_option("--axis", axis, "sensors, clutter or targets")
      ->check(CLI::IsMember({"sensors", "clutter", "targets"}));
  bench->add_option("--values", values, "Axis values (default: full sweep)")->delimiter(',');
  bench->add_option("--steps", bench_steps, "Steps per value (first 5 untimed)")->check(CLI::Range(6, 100000));
  bench->add_option("--particles", bench_particles, "J = I override")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim_opts);
    if (*track) return cmd_track(track_opts, frames_path, truth_path, !no_timing);
    if (*assoc) return cmd_oracle_assoc(instances, max_k, max_m, oracle_seed);
    if (*bernoulli) return cmd_oracle_bernoulli(bern_steps, bern_particles, oracle_seed, bern_tol);
    if (*bench) return cmd_bench(bench_opts, axis, values, bench_steps, bench_particles);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (e.line() > 0) std::cerr << " (line " << e.line() << ")";
    std::cerr << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataMismatch& e) {
    std::cerr << "data mismatch: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
