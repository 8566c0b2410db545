#include "bpmtt/model.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace bpmtt {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

MotionModel MotionModel::constant_velocity(double period, double sigma_u) {
  MotionModel m;
  m.T = period;
  m.sigma_u = sigma_u;
  m.A(0, 2) = period;
  m.A(1, 3) = period;
  m.W(0, 0) = 0.5 * period * period;
  m.W(1, 1) = 0.5 * period * period;
  m.W(2, 0) = period;
  m.W(3, 1) = period;
  m.validate();
  return m;
}

MotionModel MotionModel::random_walk(double sigma) {
  MotionModel m;
  m.sigma_u = sigma;
  m.W(0, 0) = 1.0;
  m.W(1, 1) = 1.0;
  m.validate();
  return m;
}

void MotionModel::validate() const {
  if (!A.allFinite() || !W.allFinite()) throw std::invalid_argument("motion model matrices must be finite");
  if (!(sigma_u >= 0.0) || !std::isfinite(sigma_u)) throw std::invalid_argument("sigma_u must be finite and >= 0");
  if (!(T > 0.0)) throw std::invalid_argument("sampling period must be > 0");
}

TargetState transition_sample(const TargetState& state, const MotionModel& motion, Rng& rng) {
  TargetState next = motion.A * state;
  if (motion.sigma_u > 0.0) {
    std::normal_distribution<double> noise(0.0, motion.sigma_u);
    const Eigen::Vector2d u(noise(rng), noise(rng));
    next.noalias() += motion.W * u;
  }
  return next;
}

double wrap_deg_signed(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

double wrap_deg_positive(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

// ---- Sensor ----

Sensor::Sensor(double pd, double clutter_mean) : pd_(pd), clutter_mean_(clutter_mean) {
  check_probability(pd, "detection probability");
  if (!(clutter_mean >= 0.0) || !std::isfinite(clutter_mean))
    throw std::invalid_argument("clutter mean must be finite and >= 0");
}

void Sensor::log_measurement_pdfs(const TargetState& x, std::span<const Measurement> zs,
                                  std::span<double> out) const {
  for (std::size_t m = 0; m < zs.size(); ++m) out[m] = log_measurement_pdf(zs[m], x);
}

double Sensor::measurement_pdf(const Measurement& z, const TargetState& x) const {
  return std::exp(log_measurement_pdf(z, x));
}

double Sensor::clutter_pdf(const Measurement& z) const { return std::exp(log_clutter_pdf(z)); }

// ---- RangeBearingSensor ----

RangeBearingSensor::RangeBearingSensor(Eigen::Vector2d position, double pd, double clutter_mean,
                                       const Eigen::Matrix2d& noise_cov, double max_range)
    : Sensor(pd, clutter_mean), position_(std::move(position)), noise_cov_(noise_cov),
      max_range_(max_range) {
  if (!position_.allFinite()) throw std::invalid_argument("sensor position must be finite");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw std::invalid_argument("max range must be > 0");
  if (!noise_cov.allFinite() || std::abs(noise_cov(0, 1) - noise_cov(1, 0)) > 1e-12 * noise_cov.norm())
    throw std::invalid_argument("noise covariance must be finite and symmetric");
  Eigen::LLT<Eigen::Matrix2d> llt(noise_cov);
  if (llt.info() != Eigen::Success || !(noise_cov.determinant() > 0.0))
    throw std::invalid_argument("noise covariance must be positive definite");
  noise_sqrt_ = llt.matrixL();
  noise_info_ = noise_cov.inverse();
  log_norm_ = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(noise_cov.determinant());
}

Measurement RangeBearingSensor::predict(const TargetState& x) const {
  const double dx = x[0] - position_[0];
  const double dy = x[1] - position_[1];
  if (dx == 0.0 && dy == 0.0) throw ModelError("bearing undefined: target position equals sensor position");
  return {std::hypot(dx, dy), wrap_deg_positive(std::atan2(dy, dx) * kDegPerRad)};
}

double RangeBearingSensor::quadratic_form(double d_range, double d_bearing) const {
  return noise_info_(0, 0) * d_range * d_range + 2.0 * noise_info_(0, 1) * d_range * d_bearing +
         noise_info_(1, 1) * d_bearing * d_bearing;
}

double RangeBearingSensor::log_measurement_pdf(const Measurement& z, const TargetState& x) const {
  const Measurement h = predict(x);
  return log_norm_ - 0.5 * quadratic_form(z.range - h.range, wrap_deg_signed(z.bearing - h.bearing));
}

void RangeBearingSensor::log_measurement_pdfs(const TargetState& x, std::span<const Measurement> zs,
                                              std::span<double> out) const {
  if (zs.empty()) return;
  const Measurement h = predict(x);
  for (std::size_t m = 0; m < zs.size(); ++m) {
    out[m] = log_norm_ - 0.5 * quadratic_form(zs[m].range - h.range,
                                              wrap_deg_signed(zs[m].bearing - h.bearing));
  }
}

double RangeBearingSensor::log_clutter_pdf(const Measurement& z) const {
  if (!(z.range >= 0.0 && z.range <= max_range_ && z.bearing >= 0.0 && z.bearing < 360.0))
    return kNegInf;
  if (z.range == 0.0) return kNegInf;
  return std::log(2.0 * z.range / (max_range_ * max_range_)) - std::log(360.0);
}

bool RangeBearingSensor::covers(const TargetState& x) const {
  return (bpmtt::position(x) - position_).norm() <= max_range_;
}

Measurement RangeBearingSensor::sample_measurement(const TargetState& x, Rng& rng) const {
  std::normal_distribution<double> std_normal;
  const Eigen::Vector2d v = noise_sqrt_ * Eigen::Vector2d(std_normal(rng), std_normal(rng));
  const Measurement h = predict(x);
  Measurement z{h.range + v[0], h.bearing + v[1]};
  if (z.range < 0.0) {
    z.range = -z.range;
    z.bearing += 180.0;
  }
  z.bearing = wrap_deg_positive(z.bearing);
  return z;
}

Measurement RangeBearingSensor::sample_clutter(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Inverse CDF of the linear range density: F(r) = (r / R)^2.
  const double r = max_range_ * std::sqrt(unit(rng));
  return {r, wrap_deg_positive(360.0 * unit(rng))};
}

PositionGaussian RangeBearingSensor::invert(const Measurement& z) const {
  // Unscented transform of N(z, C_v) through the polar-to-Cartesian map,
  // n = 2, kappa = 1.
  constexpr double kKappa = 1.0;
  constexpr double kN = 2.0;
  const Eigen::Matrix2d spread = Eigen::LLT<Eigen::Matrix2d>((kN + kKappa) * noise_cov_).matrixL();
  const Eigen::Vector2d mean_z(z.range, z.bearing);

  auto to_cartesian = [this](const Eigen::Vector2d& rb) {
    const double theta = rb[1] / kDegPerRad;
    return Eigen::Vector2d(position_[0] + rb[0] * std::cos(theta), position_[1] + rb[0] * std::sin(theta));
  };

  std::array<Eigen::Vector2d, 5> points;
  std::array<double, 5> weights;
  points[0] = to_cartesian(mean_z);
  weights[0] = kKappa / (kN + kKappa);
  for (int i = 0; i < 2; ++i) {
    points[1 + 2 * i] = to_cartesian(mean_z + spread.col(i));
    points[2 + 2 * i] = to_cartesian(mean_z - spread.col(i));
    weights[1 + 2 * i] = weights[2 + 2 * i] = 0.5 / (kN + kKappa);
  }
  PositionGaussian out;
  for (int i = 0; i < 5; ++i) out.mean += weights[i] * points[i];
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 5; ++i) {
    const Eigen::Vector2d d = points[i] - out.mean;
    cov += weights[i] * d * d.transpose();
  }
  out.sqrt_cov = Eigen::LLT<Eigen::Matrix2d>(cov).matrixL();
  return out;
}

// ---- LinearPositionSensor ----

LinearPositionSensor::LinearPositionSensor(double pd, double clutter_mean, double noise_std,
                                           double lower, double upper)
    : Sensor(pd, clutter_mean), noise_std_(noise_std), lower_(lower), upper_(upper) {
  if (!(noise_std > 0.0)) throw std::invalid_argument("noise std must be > 0");
  if (!(upper > lower)) throw std::invalid_argument("clutter interval must be nonempty");
}

double LinearPositionSensor::log_measurement_pdf(const Measurement& z, const TargetState& x) const {
  const double d = (z.range - x[0]) / noise_std_;
  return -0.5 * d * d - std::log(noise_std_) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double LinearPositionSensor::log_clutter_pdf(const Measurement& z) const {
  if (!(z.range >= lower_ && z.range <= upper_)) return kNegInf;
  return -std::log(upper_ - lower_);
}

bool LinearPositionSensor::covers(const TargetState& x) const { return x[0] >= lower_ && x[0] <= upper_; }

Measurement LinearPositionSensor::sample_measurement(const TargetState& x, Rng& rng) const {
  std::normal_distribution<double> noise(0.0, noise_std_);
  return {x[0] + noise(rng), 0.0};
}

Measurement LinearPositionSensor::sample_clutter(Rng& rng) const {
  std::uniform_real_distribution<double> u(lower_, upper_);
  return {u(rng), 0.0};
}

PositionGaussian LinearPositionSensor::invert(const Measurement& z) const {
  PositionGaussian out;
  out.mean = Eigen::Vector2d(z.range, 0.0);
  out.sqrt_cov(0, 0) = noise_std_;
  return out;
}

// ---- factors ----

namespace {

void check_association(std::size_t a, std::size_t num_measurements) {
  if (a > num_measurements) throw std::out_of_range("association index exceeds number of measurements");
}

}  // namespace

double log_likelihood_factor_g(const TargetState& x, bool exists, std::size_t a,
                               std::span<const Measurement> zs, const Sensor& sensor) {
  check_association(a, zs.size());
  if (!exists || a == 0) return 0.0;
  const Measurement& z = zs[a - 1];
  const double log_fa = sensor.log_clutter_pdf(z);
  if (log_fa == kNegInf) throw ModelError("false alarm density vanishes at an observed measurement");
  return sensor.log_measurement_pdf(z, x) - log_fa;
}

double likelihood_factor_g(const TargetState& x, bool exists, std::size_t a,
                           std::span<const Measurement> zs, const Sensor& sensor) {
  return std::exp(log_likelihood_factor_g(x, exists, a, zs, sensor));
}

double detection_factor_h(const TargetState& x, bool exists, std::size_t a,
                          std::size_t num_measurements, const Sensor& sensor) {
  check_association(a, num_measurements);
  if (!exists) return a == 0 ? 1.0 : 0.0;
  const double pd = sensor.detection_probability(x);
  if (a == 0) return 1.0 - pd;
  if (sensor.clutter_mean() == 0.0) throw ModelError("detection factor requires a positive clutter mean");
  return pd / sensor.clutter_mean();
}

double log_detection_factor_h(const TargetState& x, bool exists, std::size_t a,
                              std::size_t num_measurements, const Sensor& sensor) {
  return std::log(detection_factor_h(x, exists, a, num_measurements, sensor));
}

double log_joint_factor_upsilon(const TargetState& x, bool exists, std::size_t a,
                                std::span<const Measurement> zs, const Sensor& sensor) {
  const double log_h = log_detection_factor_h(x, exists, a, zs.size(), sensor);
  if (log_h == kNegInf) return kNegInf;
  return log_likelihood_factor_g(x, exists, a, zs, sensor) + log_h;
}

double joint_factor_upsilon(const TargetState& x, bool exists, std::size_t a,
                            std::span<const Measurement> zs, const Sensor& sensor) {
  return std::exp(log_joint_factor_upsilon(x, exists, a, zs, sensor));
}

int exclusion_factor_psi(std::size_t a, std::size_t b, std::size_t k, std::size_t m) {
  const bool target_claims = a == m;
  const bool measurement_claims = b == k;
  return target_claims == measurement_claims ? 1 : 0;
}

}  // namespace bpmtt
