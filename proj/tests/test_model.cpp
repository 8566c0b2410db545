#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bpmtt/model.hpp"

using namespace bpmtt;

namespace {

RangeBearingSensor origin_sensor(double pd = 0.8, double mu = 2.0) {
  return RangeBearingSensor(Eigen::Vector2d::Zero(), pd, mu, Eigen::Vector2d(100.0, 0.25).asDiagonal(), 6000.0);
}

TargetState at(double p1, double p2, double v1 = 0.0, double v2 = 0.0) {
  TargetState x;
  x << p1, p2, v1, v2;
  return x;
}

}  // namespace

TEST(Transition, NoiselessConstantVelocity) {
  const auto motion = MotionModel::constant_velocity(1.0, 0.0);
  Rng rng(1);
  EXPECT_TRUE(transition_sample(at(0, 0, 10, 0), motion, rng).isApprox(at(10, 0, 10, 0)));
  EXPECT_TRUE(transition_sample(at(5, -5), motion, rng).isApprox(at(5, -5)));
}

TEST(Transition, ConstantVelocityMatrices) {
  const auto m = MotionModel::constant_velocity(2.0, 1.0);
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a(0, 2) = a(1, 3) = 2.0;
  EXPECT_TRUE(m.A.isApprox(a));
  EXPECT_DOUBLE_EQ(m.W(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.W(1, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.W(2, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.W(3, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.W(0, 1), 0.0);
}

TEST(Transition, MonteCarloMomentsMatchAnalytic) {
  const double sigma_u = std::sqrt(0.025);
  const auto motion = MotionModel::constant_velocity(1.0, sigma_u);
  Rng rng(42);
  const int draws = 100000;
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  double sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const TargetState x = transition_sample(TargetState::Zero(), motion, rng);
    sum += x;
    sq += x[0] * x[0];
  }
  const Eigen::Vector4d mean = sum / draws;
  // Position noise std is (T^2 / 2) sigma_u.
  const double pos_std = 0.5 * sigma_u;
  EXPECT_LT(std::abs(mean[0]), 3.0 * pos_std / std::sqrt(draws));
  EXPECT_LT(std::abs(mean[1]), 3.0 * pos_std / std::sqrt(draws));
  EXPECT_NEAR(sq / draws, pos_std * pos_std, 0.02 * pos_std * pos_std);
}

TEST(Transition, RejectsInvalidModel) {
  MotionModel m = MotionModel::constant_velocity(1.0, 1.0);
  m.T = 0.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  EXPECT_THROW(MotionModel::constant_velocity(1.0, -1.0), std::invalid_argument);
}

TEST(MeasurementPdf, PeakValue) {
  const RangeBearingSensor s(Eigen::Vector2d::Zero(), 0.8, 2.0, Eigen::Vector2d(100.0, 0.25).asDiagonal(), 6000.0);
  const double peak = 1.0 / (2.0 * std::numbers::pi * 10.0 * 0.5);
  EXPECT_NEAR(s.measurement_pdf({1000.0, 0.0}, at(1000, 0)), peak, 1e-15);
  EXPECT_NEAR(peak, 0.03183, 1e-5);
}

TEST(MeasurementPdf, OneSigmaFalloffInRange) {
  const auto s = origin_sensor();
  const double peak = s.measurement_pdf({1000.0, 0.0}, at(1000, 0));
  EXPECT_NEAR(s.measurement_pdf({1010.0, 0.0}, at(1000, 0)), peak * std::exp(-0.5), 1e-15);
}

TEST(MeasurementPdf, BearingResidualWraps) {
  const auto s = origin_sensor();
  // Predicted bearing 0; a measured 359.5 is a residual of -0.5.
  const double wrapped = s.measurement_pdf({1000.0, 359.5}, at(1000, 0));
  const double direct = s.measurement_pdf({1000.0, 0.5}, at(1000, 0));
  EXPECT_NEAR(wrapped, direct, 1e-18);
  EXPECT_NEAR(wrapped, s.measurement_pdf({1000.0, 0.0}, at(1000, 0)) * std::exp(-0.5), 1e-15);
}

TEST(MeasurementPdf, InvariantUnder360Shift) {
  const auto s = origin_sensor();
  const TargetState x = at(-700, 1200);
  for (double b : {3.0, 117.0, 240.5, 359.0}) {
    const double a = s.log_measurement_pdf({1400.0, b}, x);
    EXPECT_NEAR(a, s.log_measurement_pdf({1400.0, b + 360.0}, x), 1e-9);
    EXPECT_NEAR(a, s.log_measurement_pdf({1400.0, b - 720.0}, x), 1e-9);
  }
}

TEST(MeasurementPdf, DegenerateGeometryThrows) {
  const auto s = origin_sensor();
  EXPECT_THROW(s.measurement_pdf({10.0, 0.0}, at(0, 0)), ModelError);
}

TEST(MeasurementPdf, BatchedMatchesSingle) {
  const auto s = origin_sensor();
  const std::vector<Measurement> zs{{1000, 10}, {2500, 359}, {10, 180}};
  std::vector<double> out(zs.size());
  const TargetState x = at(900, 150);
  s.log_measurement_pdfs(x, zs, out);
  for (std::size_t m = 0; m < zs.size(); ++m) EXPECT_DOUBLE_EQ(out[m], s.log_measurement_pdf(zs[m], x));
}

TEST(ClutterPdf, BoundaryAndOrigin) {
  const auto s = origin_sensor();
  EXPECT_NEAR(s.clutter_pdf({6000.0, 0.0}), (2.0 / 6000.0) / 360.0, 1e-18);
  EXPECT_EQ(s.clutter_pdf({0.0, 45.0}), 0.0);
  EXPECT_EQ(s.clutter_pdf({6000.1, 45.0}), 0.0);
  EXPECT_EQ(s.log_clutter_pdf({100.0, 360.0}), -std::numeric_limits<double>::infinity());
}

TEST(ClutterPdf, IntegratesToOne) {
  // Composite Simpson rule in range; the density is constant in bearing.
  const auto s = origin_sensor();
  const int intervals = 2000;
  const double h = 6000.0 / intervals;
  double range_integral = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    range_integral += w * s.clutter_pdf({std::min(i * h, 6000.0), 123.0});
  }
  range_integral *= h / 3.0;
  EXPECT_NEAR(range_integral * 360.0, 1.0, 1e-6);
}

TEST(ClutterPdf, SamplesStayInSupport) {
  const auto s = origin_sensor();
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const Measurement z = s.sample_clutter(rng);
    ASSERT_GE(z.range, 0.0);
    ASSERT_LE(z.range, 6000.0);
    ASSERT_GE(z.bearing, 0.0);
    ASSERT_LT(z.bearing, 360.0);
  }
}

TEST(LikelihoodFactor, Branches) {
  const auto s = origin_sensor();
  const std::vector<Measurement> zs{{6000.0, 0.0}, {100, 1}, {200, 2}};
  const TargetState x = at(6000, 0);
  for (std::size_t a = 0; a <= 3; ++a) EXPECT_EQ(likelihood_factor_g(x, false, a, zs, s), 1.0);
  EXPECT_EQ(likelihood_factor_g(x, true, 0, zs, s), 1.0);
  const double expected = s.measurement_pdf(zs[0], x) / s.clutter_pdf(zs[0]);
  EXPECT_NEAR(likelihood_factor_g(x, true, 1, zs, s), expected, 1e-9 * expected);
  // Peak density 0.03183 over 9.26e-7.
  EXPECT_NEAR(likelihood_factor_g(x, true, 1, zs, s), 3.44e4, 0.01e4);
  EXPECT_THROW(likelihood_factor_g(x, true, 4, zs, s), std::out_of_range);
}

TEST(LikelihoodFactor, ZeroClutterDensityIsModelError) {
  const auto s = origin_sensor();
  const std::vector<Measurement> zs{{0.0, 0.0}};
  EXPECT_THROW(likelihood_factor_g(at(1, 0), true, 1, zs, s), ModelError);
}

TEST(DetectionFactor, Branches) {
  const auto s = origin_sensor(0.8, 2.0);
  const TargetState x = at(100, 0);
  EXPECT_NEAR(detection_factor_h(x, true, 2, 3, s), 0.4, 1e-15);
  EXPECT_NEAR(detection_factor_h(x, true, 0, 3, s), 0.2, 1e-15);
  EXPECT_EQ(detection_factor_h(x, false, 0, 5, s), 1.0);
  EXPECT_EQ(detection_factor_h(x, false, 5, 5, s), 0.0);
}

TEST(DetectionFactor, ZeroClutterMeanRejected) {
  const auto s = origin_sensor(0.8, 0.0);
  EXPECT_THROW(detection_factor_h(at(1, 0), true, 1, 1, s), ModelError);
  EXPECT_NEAR(detection_factor_h(at(1, 0), true, 0, 1, s), 0.2, 1e-15);
}

TEST(DetectionFactor, StateDependentHook) {
  RangeBearingSensor s = origin_sensor(0.8, 2.0);
  s.set_detection_function([](const TargetState& x) { return x[0] > 0.0 ? 0.9 : 0.1; });
  EXPECT_NEAR(detection_factor_h(at(5, 0), true, 0, 1, s), 0.1, 1e-15);
  EXPECT_NEAR(detection_factor_h(at(-5, 0), true, 1, 1, s), 0.05, 1e-15);
}

TEST(JointFactor, ProductOfFactors) {
  const auto s = origin_sensor();
  const std::vector<Measurement> zs{{6000.0, 0.0}};
  const TargetState x = at(6000, 0);
  EXPECT_EQ(joint_factor_upsilon(x, false, 0, zs, s), 1.0);
  EXPECT_EQ(joint_factor_upsilon(x, false, 1, zs, s), 0.0);
  EXPECT_NEAR(joint_factor_upsilon(x, true, 0, zs, s), 0.2, 1e-15);
  const double g = likelihood_factor_g(x, true, 1, zs, s);
  EXPECT_NEAR(joint_factor_upsilon(x, true, 1, zs, s), g * 0.4, 1e-9 * g);
  EXPECT_NEAR(log_joint_factor_upsilon(x, true, 1, zs, s), std::log(g * 0.4), 1e-12);
}

TEST(ExclusionFactor, Examples) {
  EXPECT_EQ(exclusion_factor_psi(2, 3, 1, 2), 0);
  EXPECT_EQ(exclusion_factor_psi(0, 0, 1, 2), 1);
  EXPECT_EQ(exclusion_factor_psi(2, 1, 1, 2), 1);
}

TEST(ExclusionFactor, ExactlyTwoZerosPerPair) {
  for (std::size_t k = 1; k <= 4; ++k) {
    for (std::size_t m = 1; m <= 4; ++m) {
      int zeros = 0;
      for (std::size_t a : {std::size_t{0}, m})
        for (std::size_t b : {std::size_t{0}, k}) zeros += exclusion_factor_psi(a, b, k, m) == 0;
      EXPECT_EQ(zeros, 2);
      // Zero exactly when one side claims the pairing and the other denies it.
      for (std::size_t a = 0; a <= 4; ++a)
        for (std::size_t b = 0; b <= 4; ++b)
          EXPECT_EQ(exclusion_factor_psi(a, b, k, m) == 0, (a == m) != (b == k));
    }
  }
}

TEST(Sensor, RejectsBadCovariance) {
  EXPECT_THROW(RangeBearingSensor(Eigen::Vector2d::Zero(), 0.8, 2.0, Eigen::Matrix2d::Zero(), 6000.0),
               std::invalid_argument);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(RangeBearingSensor(Eigen::Vector2d::Zero(), 0.8, 2.0, asym, 6000.0), std::invalid_argument);
  EXPECT_THROW(RangeBearingSensor(Eigen::Vector2d::Zero(), 1.5, 2.0, Eigen::Matrix2d::Identity(), 6000.0),
               std::invalid_argument);
}

TEST(Sensor, InversionRecoversPosition) {
  const RangeBearingSensor s(Eigen::Vector2d(3000, 0), 0.8, 2.0, Eigen::Vector2d(100.0, 0.25).asDiagonal(), 6000.0);
  const PositionGaussian g = s.invert({2000.0, 180.0});
  EXPECT_NEAR(g.mean[0], 1000.0, 1.0);
  EXPECT_NEAR(g.mean[1], 0.0, 1e-6);
  const Eigen::Matrix2d cov = g.sqrt_cov * g.sqrt_cov.transpose();
  // Radial variance is the range variance, cross-range std is r * sigma_bearing.
  EXPECT_NEAR(cov(0, 0), 100.0, 1.0);
  const double cross = 2000.0 * 0.5 * std::numbers::pi / 180.0;
  EXPECT_NEAR(std::sqrt(cov(1, 1)), cross, 0.01 * cross);
}

TEST(Angles, Wrapping) {
  EXPECT_DOUBLE_EQ(wrap_deg_signed(359.5), -0.5);
  EXPECT_DOUBLE_EQ(wrap_deg_signed(180.0), 180.0);
  EXPECT_DOUBLE_EQ(wrap_deg_signed(-180.0), 180.0);
  EXPECT_DOUBLE_EQ(wrap_deg_positive(-1.0), 359.0);
  EXPECT_DOUBLE_EQ(wrap_deg_positive(720.0), 0.0);
}
