#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bpmtt/association.hpp"
#include "bpmtt/model.hpp"
#include "bpmtt/rng.hpp"

namespace bpmtt {

/// All particles and existence mass of a PT were annihilated by the update.
class DegeneratePosterior : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned position box used for birth particles when no measurement is
/// available to seed them.
struct BirthRegion {
  Eigen::Vector2d lower{-3000.0, -3000.0};
  Eigen::Vector2d upper{3000.0, 3000.0};
};

struct TrackerConfig {
  std::size_t num_targets = 8;            // K
  std::size_t num_particles = 3000;       // J
  std::size_t num_birth_particles = 3000; // I
  AssociationOptions association{};
  double detection_threshold = 0.5;
  double reliability_threshold = 1e-3;
  double mean_births = 0.01;
  double survival_probability = 0.999;
  double birth_velocity_std = 10.0;
  BirthRegion birth_region{};
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Weighted particles representing the PT belief for r = 1. The weights do
/// not sum to one; their sum is the existence probability.
class PotentialTargetBelief {
 public:
  PotentialTargetBelief() = default;
  PotentialTargetBelief(std::vector<TargetState> particles, std::vector<double> weights);

  /// J particles at the origin with zero weight.
  static PotentialTargetBelief nonexistent(std::size_t num_particles);
  /// Equal weights existence / J; existence() returns `existence` exactly.
  static PotentialTargetBelief equally_weighted(std::vector<TargetState> particles, double existence);

  const std::vector<TargetState>& particles() const { return particles_; }
  const std::vector<double>& weights() const { return weights_; }
  double existence() const { return existence_; }
  std::size_t size() const { return particles_.size(); }

 private:
  std::vector<TargetState> particles_;
  std::vector<double> weights_;
  double existence_ = 0.0;
};

/// Prediction message alpha(x, 1) as J survivor and I birth particles.
struct PredictedBelief {
  std::vector<TargetState> particles;
  std::vector<double> weights;
  std::vector<unsigned char> is_birth;

  double existence() const;
  std::size_t num_birth() const;
};

struct BirthPlanEntry {
  double birth_probability = 0.0;
  double survival_probability = 0.0;
  std::vector<TargetState> birth_particles;
  /// Indices into the designated sensor's previous measurements.
  std::vector<std::size_t> measurement_subset;
};

struct BirthPlan {
  std::vector<BirthPlanEntry> entries;
  std::vector<std::size_t> reliable;
  std::vector<std::size_t> unreliable;
  std::optional<std::size_t> designated_sensor;
};

struct TargetRecord {
  double existence = 0.0;
  bool detected = false;
  std::optional<TargetState> estimate;
};

struct TrackRecord {
  std::size_t n = 0;
  std::vector<TargetRecord> targets;
  double step_ms = 0.0;
  std::size_t resets = 0;

  std::vector<TargetState> estimates() const;
};

PredictedBelief predict(const PotentialTargetBelief& belief, const MotionModel& motion,
                        const BirthPlanEntry& plan, std::size_t num_birth_particles, Rng& rng);

/// Importance-sampling update across sensors using precomputed factor tables
/// and the eta rows of this PT (one per sensor).
PotentialTargetBelief update_with_factors(const PredictedBelief& predicted,
                                          std::span<const FactorTable* const> factors,
                                          std::span<const Eigen::VectorXd> etas);

PotentialTargetBelief update(const PredictedBelief& predicted, std::span<const Eigen::VectorXd> etas,
                             const MeasurementFrame& frame,
                             std::span<const std::shared_ptr<const Sensor>> sensors);

/// MMSE estimate if existence exceeds the threshold (strictly).
std::optional<TargetState> detect_and_estimate(const PotentialTargetBelief& belief, double threshold);

/// Systematic resampling to J equally weighted particles; existence is kept.
PotentialTargetBelief resample(const PotentialTargetBelief& belief, std::size_t num_particles, Rng& rng);

/// Splits indices {0..count-1} into `parts` subsets whose sizes differ by at
/// most one: a seeded permutation dealt round-robin.
std::vector<std::vector<std::size_t>> partition_measurements(std::size_t count, std::size_t parts, Rng& rng);

/// Draws the I birth particles of one PT from the measurements in `subset`
/// (or the birth region when empty), then propagates them one step.
std::vector<TargetState> sample_birth_particles(std::span<const Measurement> subset, const Sensor* sensor,
                                                const TrackerConfig& config, const MotionModel& motion,
                                                Rng& rng);

/// Reliable/unreliable split and birth/survival parameters for step n.
/// `previous` holds the designated sensor's measurements at n - 1 (may be
/// empty); `designated` is that sensor (null when there are no sensors).
BirthPlan plan_birth_survival(std::span<const PotentialTargetBelief> beliefs,
                              std::span<const Measurement> previous, const Sensor* designated,
                              const TrackerConfig& config, const MotionModel& motion, std::size_t n);

/// Sequential tracker over K potential targets.
class Tracker {
 public:
  Tracker(TrackerConfig config, MotionModel motion, std::vector<std::shared_ptr<const Sensor>> sensors);

  TrackRecord step(const MeasurementFrame& frame);

  const std::vector<PotentialTargetBelief>& beliefs() const { return beliefs_; }
  const BirthPlan& last_plan() const { return last_plan_; }
  const TrackerConfig& config() const { return config_; }
  std::size_t num_sensors() const { return sensors_.size(); }
  std::size_t time() const { return n_; }

 private:
  TrackerConfig config_;
  MotionModel motion_;
  std::vector<std::shared_ptr<const Sensor>> sensors_;
  std::vector<PotentialTargetBelief> beliefs_;
  MeasurementFrame previous_frame_;
  BirthPlan last_plan_;
  std::size_t n_ = 0;
};

}  // namespace bpmtt
