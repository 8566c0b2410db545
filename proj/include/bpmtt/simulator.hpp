#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "bpmtt/model.hpp"
#include "bpmtt/rng.hpp"

namespace bpmtt {

struct ScenarioConfig {
  double roi_halfwidth = 3000.0;
  std::size_t num_targets = 5;
  std::vector<std::size_t> birth_times{5, 10, 15, 20, 25};
  /// Optional per-target last step alive; empty means targets never die.
  std::vector<std::optional<std::size_t>> death_times;
  double initial_radius = 1000.0;
  double initial_speed = 10.0;
  std::size_t num_steps = 150;

  std::size_t num_sensors = 3;
  double sensor_radius = 3000.0;
  double detection_probability = 0.8;
  double clutter_mean = 2.0;
  double range_variance = 100.0;   // m^2
  double bearing_variance = 0.25;  // deg^2
  double max_range = 6000.0;

  double sigma_u = 0.1581138830084;  // sqrt(0.025) m/s^2
  double period = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  MotionModel motion() const;
};

struct TruthTarget {
  std::size_t id = 0;  // 0-based target index
  TargetState state = TargetState::Zero();
};

/// Alive targets per step; steps[n - 1] holds time n.
struct GroundTruth {
  std::vector<std::vector<TruthTarget>> steps;

  std::size_t num_steps() const { return steps.size(); }
  const std::vector<TruthTarget>& at(std::size_t n) const { return steps.at(n - 1); }
};

std::vector<std::shared_ptr<const Sensor>> make_sensors(const ScenarioConfig& config);

GroundTruth generate_truth(const ScenarioConfig& config, Rng& rng);

/// One frame: detections with probability P_d for covered targets, Poisson
/// clutter, then a random permutation per sensor.
MeasurementFrame generate_frame(const std::vector<TruthTarget>& alive,
                                const std::vector<std::shared_ptr<const Sensor>>& sensors, Rng& rng);

struct SimulatedRun {
  GroundTruth truth;
  std::vector<MeasurementFrame> frames;  // frames[n - 1]
};

/// Truth and frames of Monte Carlo run `run`, drawn from substreams of
/// config.seed so runs are independent of one another and of scheduling.
SimulatedRun simulate_run(const ScenarioConfig& config, std::size_t run);

}  // namespace bpmtt
