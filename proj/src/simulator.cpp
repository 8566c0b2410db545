#include "bpmtt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace bpmtt {

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(roi_halfwidth > 0.0, "roi half-width must be > 0");
  require(birth_times.size() == num_targets, "need one birth time per target");
  for (std::size_t b : birth_times) require(b >= 1 && b <= num_steps, "birth times must lie in [1, num_steps]");
  require(death_times.empty() || death_times.size() == num_targets, "need one death time per target or none");
  require(initial_radius > 0.0 && initial_speed >= 0.0, "initial radius must be > 0 and speed >= 0");
  require(num_steps >= 1, "scenario needs at least one step");
  require(sensor_radius >= 0.0, "sensor radius must be >= 0");
  require(detection_probability >= 0.0 && detection_probability <= 1.0, "detection probability must lie in [0, 1]");
  require(clutter_mean >= 0.0, "clutter mean must be >= 0");
  require(range_variance > 0.0 && bearing_variance > 0.0, "noise variances must be > 0");
  require(max_range > 0.0, "max range must be > 0");
  require(sigma_u >= 0.0 && period > 0.0, "sigma_u must be >= 0 and period > 0");
}

MotionModel ScenarioConfig::motion() const { return MotionModel::constant_velocity(period, sigma_u); }

std::vector<std::shared_ptr<const Sensor>> make_sensors(const ScenarioConfig& config) {
  const Eigen::Matrix2d noise = Eigen::Vector2d(config.range_variance, config.bearing_variance).asDiagonal();
  std::vector<std::shared_ptr<const Sensor>> sensors;
  for (std::size_t s = 0; s < config.num_sensors; ++s) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(config.num_sensors);
    const Eigen::Vector2d pos = config.sensor_radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    sensors.push_back(std::make_shared<RangeBearingSensor>(pos, config.detection_probability,
                                                           config.clutter_mean, noise, config.max_range));
  }
  return sensors;
}

GroundTruth generate_truth(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const MotionModel motion = config.motion();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double rotation = 2.0 * std::numbers::pi * unit(rng);

  GroundTruth truth;
  truth.steps.resize(config.num_steps);
  for (std::size_t i = 0; i < config.num_targets; ++i) {
    const double angle =
        rotation + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(config.num_targets);
    const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
    TargetState x;
    x << config.initial_radius * dir, -config.initial_speed * dir;

    const std::size_t birth = config.birth_times[i];
    std::size_t last = config.num_steps;
    if (!config.death_times.empty() && config.death_times[i]) last = std::min(last, *config.death_times[i]);
    for (std::size_t n = birth; n <= last; ++n) {
      if (n > birth) x = transition_sample(x, motion, rng);
      truth.steps[n - 1].push_back({i, x});
    }
  }
  return truth;
}

MeasurementFrame generate_frame(const std::vector<TruthTarget>& alive,
                                const std::vector<std::shared_ptr<const Sensor>>& sensors, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MeasurementFrame frame(sensors.size());
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const Sensor& sensor = *sensors[s];
    auto& zs = frame[s];
    for (const auto& target : alive)
      if (sensor.covers(target.state) && unit(rng) < sensor.detection_probability(target.state))
        zs.push_back(sensor.sample_measurement(target.state, rng));
    if (sensor.clutter_mean() > 0.0) {
      std::poisson_distribution<std::size_t> count(sensor.clutter_mean());
      for (std::size_t c = count(rng); c > 0; --c) zs.push_back(sensor.sample_clutter(rng));
    }
    std::shuffle(zs.begin(), zs.end(), rng);
  }
  return frame;
}

SimulatedRun simulate_run(const ScenarioConfig& config, std::size_t run) {
  SimulatedRun out;
  Rng truth_rng = make_rng(config.seed, Stream::kTruth, {run});
  out.truth = generate_truth(config, truth_rng);
  const auto sensors = make_sensors(config);
  out.frames.reserve(config.num_steps);
  for (std::size_t n = 1; n <= config.num_steps; ++n) {
    Rng frame_rng = make_rng(config.seed, Stream::kFrame, {run, n});
    out.frames.push_back(generate_frame(out.truth.at(n), sensors, frame_rng));
  }
  return out;
}

}  // namespace bpmtt
