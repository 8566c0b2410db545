#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpmtt/rng.hpp"

namespace bpmtt {

/// Kinematic state [p1 p2 v1 v2]: 2D position (m) and velocity (m/s).
using TargetState = Eigen::Vector4d;

inline Eigen::Vector2d position(const TargetState& x) { return x.head<2>(); }
inline Eigen::Vector2d velocity(const TargetState& x) { return x.tail<2>(); }

/// Raised when a model is evaluated outside of its domain (degenerate
/// geometry, zero clutter density at an observed measurement, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear-Gaussian motion x_n = A x_{n-1} + W u_n, u_n ~ N(0, sigma_u^2 I_2).
struct MotionModel {
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  Eigen::Matrix<double, 4, 2> W = Eigen::Matrix<double, 4, 2>::Zero();
  double sigma_u = 0.0;
  double T = 1.0;

  /// White-noise-acceleration constant-velocity discretization.
  static MotionModel constant_velocity(double period, double sigma_u);
  /// Position random walk (A = I, u drives p1 and p2 directly).
  static MotionModel random_walk(double sigma);

  void validate() const;
};

TargetState transition_sample(const TargetState& state, const MotionModel& motion, Rng& rng);

/// Range (m) and bearing (deg, [0, 360)) as reported by a sensor. Sensors
/// observing a single coordinate store it in `range` and leave bearing at 0.
struct Measurement {
  double range = 0.0;
  double bearing = 0.0;
};

/// Per-sensor ordered measurement lists for one time step.
using MeasurementFrame = std::vector<std::vector<Measurement>>;

/// Gaussian over the 2D position, given by its mean and a lower-triangular
/// square root of the covariance. Used to seed birth particles.
struct PositionGaussian {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sqrt_cov = Eigen::Matrix2d::Zero();
};

/// Wraps an angle in degrees to (-180, 180].
double wrap_deg_signed(double deg);
/// Wraps an angle in degrees to [0, 360).
double wrap_deg_positive(double deg);

using DetectionFunction = std::function<double(const TargetState&)>;

/// Sensor interface. Concrete sensors define the measurement density, the
/// false alarm density and how a measurement is inverted into a position.
class Sensor {
 public:
  Sensor(double pd, double clutter_mean);
  virtual ~Sensor() = default;

  double clutter_mean() const { return clutter_mean_; }
  double detection_probability(const TargetState& x) const {
    return pd_fn_ ? pd_fn_(x) : pd_;
  }
  /// Installs a state-dependent detection probability (values in [0, 1]).
  void set_detection_function(DetectionFunction fn) { pd_fn_ = std::move(fn); }
  bool has_constant_detection() const { return !pd_fn_; }

  virtual double log_measurement_pdf(const Measurement& z, const TargetState& x) const = 0;
  /// log f(z_m | x) for every measurement; default evaluates one by one.
  virtual void log_measurement_pdfs(const TargetState& x, std::span<const Measurement> zs,
                                    std::span<double> out) const;
  /// Returns -inf outside the support.
  virtual double log_clutter_pdf(const Measurement& z) const = 0;

  virtual bool covers(const TargetState& x) const = 0;
  virtual Measurement sample_measurement(const TargetState& x, Rng& rng) const = 0;
  virtual Measurement sample_clutter(Rng& rng) const = 0;
  /// Position distribution implied by one measurement.
  virtual PositionGaussian invert(const Measurement& z) const = 0;

  double measurement_pdf(const Measurement& z, const TargetState& x) const;
  double clutter_pdf(const Measurement& z) const;

 private:
  double pd_;
  double clutter_mean_;
  DetectionFunction pd_fn_;
};

/// Range-bearing sensor with Gaussian noise and false alarms uniform over the
/// coverage disc (linear in range, uniform in bearing).
class RangeBearingSensor final : public Sensor {
 public:
  /// noise_cov holds range variance (m^2) and bearing variance (deg^2).
  RangeBearingSensor(Eigen::Vector2d position, double pd, double clutter_mean,
                     const Eigen::Matrix2d& noise_cov, double max_range);

  const Eigen::Vector2d& position() const { return position_; }
  const Eigen::Matrix2d& noise_cov() const { return noise_cov_; }
  double max_range() const { return max_range_; }

  /// Noise-free (range, bearing) of a state. Throws ModelError when the
  /// target sits exactly on the sensor.
  Measurement predict(const TargetState& x) const;

  double log_measurement_pdf(const Measurement& z, const TargetState& x) const override;
  void log_measurement_pdfs(const TargetState& x, std::span<const Measurement> zs,
                            std::span<double> out) const override;
  double log_clutter_pdf(const Measurement& z) const override;
  bool covers(const TargetState& x) const override;
  Measurement sample_measurement(const TargetState& x, Rng& rng) const override;
  Measurement sample_clutter(Rng& rng) const override;
  PositionGaussian invert(const Measurement& z) const override;

 private:
  double quadratic_form(double d_range, double d_bearing) const;

  Eigen::Vector2d position_;
  Eigen::Matrix2d noise_cov_;
  Eigen::Matrix2d noise_info_;
  Eigen::Matrix2d noise_sqrt_;
  double log_norm_;
  double max_range_;
};

/// Sensor observing p1 on a line with Gaussian noise; false alarms uniform on
/// [lower, upper]. The coordinate is carried in Measurement::range.
class LinearPositionSensor final : public Sensor {
 public:
  LinearPositionSensor(double pd, double clutter_mean, double noise_std, double lower,
                       double upper);

  double noise_std() const { return noise_std_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  double log_measurement_pdf(const Measurement& z, const TargetState& x) const override;
  double log_clutter_pdf(const Measurement& z) const override;
  bool covers(const TargetState& x) const override;
  Measurement sample_measurement(const TargetState& x, Rng& rng) const override;
  Measurement sample_clutter(Rng& rng) const override;
  PositionGaussian invert(const Measurement& z) const override;

 private:
  double noise_std_;
  double lower_;
  double upper_;
};

// Factors of the factor graph. `a` is the target-oriented association index
// (0 = missed detection, m >= 1 = measurement m); `exists` is the existence bit.

double log_likelihood_factor_g(const TargetState& x, bool exists, std::size_t a,
                               std::span<const Measurement> zs, const Sensor& sensor);
double likelihood_factor_g(const TargetState& x, bool exists, std::size_t a,
                           std::span<const Measurement> zs, const Sensor& sensor);

double log_detection_factor_h(const TargetState& x, bool exists, std::size_t a,
                              std::size_t num_measurements, const Sensor& sensor);
double detection_factor_h(const TargetState& x, bool exists, std::size_t a,
                          std::size_t num_measurements, const Sensor& sensor);

double log_joint_factor_upsilon(const TargetState& x, bool exists, std::size_t a,
                                std::span<const Measurement> zs, const Sensor& sensor);
double joint_factor_upsilon(const TargetState& x, bool exists, std::size_t a,
                            std::span<const Measurement> zs, const Sensor& sensor);

/// Pairwise consistency of a_k and b_m (k, m are 1-based): zero iff exactly one
/// side claims the pairing (k, m).
int exclusion_factor_psi(std::size_t a, std::size_t b, std::size_t k, std::size_t m);

}  // namespace bpmtt
