#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpmtt/evaluation.hpp"
#include "bpmtt/simulator.hpp"
#include "bpmtt/tracker.hpp"

namespace bpmtt {

/// Everything one Monte Carlo experiment needs.
struct RunConfig {
  ScenarioConfig scenario{};
  TrackerConfig tracker{};
  OspaParams ospa{};
  std::size_t runs = 1;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Malformed configuration; carries the 1-based line of the offending entry
/// (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Frame or truth data that does not fit the configuration.
class DataMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the hierarchical YAML configuration. Keys carry their units; any
/// unknown section or key is a ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

struct ResultRow {
  std::size_t run = 0;
  std::size_t n = 0;
  double ospa = 0.0;
  std::size_t card_est = 0;
  std::size_t card_true = 0;
  double step_ms = 0.0;
};

struct MospaRow {
  std::size_t n = 0;
  double mospa = 0.0;
  double mean_card_est = 0.0;
  double mean_card_true = 0.0;
};

/// Scenario and tracker configs of run `run`, with seeds split from the master.
ScenarioConfig scenario_for_run(const RunConfig& config);
TrackerConfig tracker_for_run(const RunConfig& config, std::size_t run);

/// Tracks one run's frames and scores every step against the truth.
std::vector<ResultRow> track_run(const RunConfig& config, std::size_t run, const SimulatedRun& data);

/// Simulates and tracks config.runs runs on config.threads workers. Rows are
/// sorted by (run, n).
std::vector<ResultRow> run_monte_carlo(const RunConfig& config);

/// Mean over runs of the per-step OSPA and cardinalities.
std::vector<MospaRow> aggregate_mospa(const std::vector<ResultRow>& rows);

// ---- CSV ----

void write_frames_csv(const std::string& path, const std::vector<SimulatedRun>& runs);
void write_truth_csv(const std::string& path, const std::vector<SimulatedRun>& runs);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows, bool timing = true);
void write_mospa_csv(const std::string& path, const std::vector<MospaRow>& rows);

/// Reads frames and truth back into runs. Throws DataMismatch when a sensor
/// index or step lies outside the scenario.
std::vector<SimulatedRun> read_runs_csv(const std::string& frames_path, const std::string& truth_path,
                                        const ScenarioConfig& scenario);

// ---- benchmarks ----

enum class BenchAxis { kSensors, kClutter, kTargets };

BenchAxis parse_bench_axis(const std::string& name);
std::vector<double> default_bench_values(BenchAxis axis);

struct BenchRow {
  double value = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  std::size_t steps = 0;
};

/// Per-step tracker runtime for each axis value. The targets axis uses
/// K = targets + 3 PTs. Only Tracker::step is timed.
std::vector<BenchRow> run_benchmark(const RunConfig& base, BenchAxis axis, const std::vector<double>& values,
                                    std::size_t steps);

struct FitResult {
  Eigen::VectorXd coefficients;  // ascending powers
  double sse = 0.0;
  double r_squared = 0.0;
};

/// Least-squares polynomial fit of the given degree.
FitResult polynomial_fit(const std::vector<double>& x, const std::vector<double>& y, int degree);

// ---- association oracle ----

struct AssocOracleReport {
  /// Per instance: max over PTs and hypotheses of |BP marginal - exact|.
  std::vector<double> errors;
  double max_error = 0.0;
  double median_error = 0.0;
  /// Max relative error over the K = 1 instances (M up to 6).
  double max_single_target_rel_error = 0.0;
  /// Instances whose residual did not fall below the tolerance.
  std::size_t unconverged = 0;
};

/// Compares BP marginals with exhaustive enumeration on random positive beta
/// tables with K <= max_targets, M <= max_measurements, and on `single_target`
/// extra instances with K = 1, M in 1..6.
AssocOracleReport run_association_oracle(std::size_t instances, std::size_t max_targets,
                                         std::size_t max_measurements, std::size_t single_target,
                                         std::uint64_t seed);

// ---- single-target reduction ----

/// Scripted measurements for the 1D scenario: a target present on steps
/// [appear, vanish] starting at `start`, plus Poisson clutter, seeded.
std::vector<std::vector<double>> scripted_bernoulli_measurements(const BernoulliScenario& scenario,
                                                                 std::size_t steps, std::size_t appear,
                                                                 std::size_t vanish, double start,
                                                                 std::uint64_t seed);

struct BernoulliTrack {
  std::vector<double> existence;
  /// Whether the PT was treated as reliable (survival branch) at each step.
  std::vector<bool> reliable;
};

/// Existence trajectory of the particle tracker (K = 1, S = 1) on the 1D
/// scenario.
BernoulliTrack track_bernoulli(const BernoulliScenario& scenario,
                               const std::vector<std::vector<double>>& measurements, std::size_t num_particles,
                               std::size_t num_birth_particles, std::uint64_t seed);

}  // namespace bpmtt
