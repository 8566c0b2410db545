#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "bpmtt/simulator.hpp"

using namespace bpmtt;

namespace {

ScenarioConfig noiseless() {
  ScenarioConfig c;
  c.sigma_u = 0.0;
  return c;
}

}  // namespace

TEST(Truth, NoiselessKinematics) {
  const ScenarioConfig c = noiseless();
  Rng rng(11);
  const GroundTruth truth = generate_truth(c, rng);
  ASSERT_EQ(truth.num_steps(), 150u);
  for (std::size_t n = 1; n <= 150; ++n) {
    for (const auto& t : truth.at(n)) {
      const std::size_t birth = c.birth_times[t.id];
      ASSERT_GE(n, birth);
      const double elapsed = static_cast<double>(n - birth);
      Eigen::Vector2d start = Eigen::Vector2d::Zero();
      for (const auto& s : truth.at(birth))
        if (s.id == t.id) start = position(s.state);
      EXPECT_NEAR(start.norm(), 1000.0, 1e-9);
      // Straight line through the origin at 10 m/s.
      const Eigen::Vector2d inward = -start.normalized();
      EXPECT_LT((velocity(t.state) - 10.0 * inward).norm(), 1e-9);
      EXPECT_LT((position(t.state) - (start + 10.0 * elapsed * inward)).norm(), 1e-9);
    }
  }
}

TEST(Truth, EqualAngularSpacingAtBirth) {
  const ScenarioConfig c = noiseless();
  Rng rng(5);
  const GroundTruth truth = generate_truth(c, rng);
  std::vector<Eigen::Vector2d> starts(5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (const auto& t : truth.at(c.birth_times[i]))
      if (t.id == i) starts[i] = position(t.state);
    EXPECT_NEAR(starts[i].norm(), 1000.0, 1e-9);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const Eigen::Vector2d a = starts[i], b = starts[(i + 1) % 5];
    const double angle = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b)) * 180.0 / std::numbers::pi;
    EXPECT_NEAR(angle, 72.0, 1e-9);
  }
}

TEST(Truth, AliveSetFollowsBirthSchedule) {
  ScenarioConfig c;
  c.death_times = {std::nullopt, std::size_t{40}, std::nullopt, std::nullopt, std::nullopt};
  Rng rng(3);
  const GroundTruth truth = generate_truth(c, rng);
  for (std::size_t n = 1; n <= c.num_steps; ++n) {
    std::size_t expected = 0;
    for (std::size_t i = 0; i < 5; ++i) expected += (n >= c.birth_times[i] && (i != 1 || n <= 40)) ? 1 : 0;
    EXPECT_EQ(truth.at(n).size(), expected) << "n=" << n;
  }
  EXPECT_TRUE(truth.at(4).empty());
}

TEST(Truth, ProcessNoiseMoments) {
  ScenarioConfig c;
  c.num_targets = 1;
  c.birth_times = {1};
  c.num_steps = 2;
  const double q = c.sigma_u * c.sigma_u;
  const int runs = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    Rng rng(1000 + r);
    const GroundTruth truth = generate_truth(c, rng);
    const auto& x0 = truth.at(1)[0].state;
    const auto& x1 = truth.at(2)[0].state;
    // Velocity increment along p1 is T u_1.
    const double dv = x1[2] - x0[2];
    sum += dv;
    sum_sq += dv * dv;
  }
  const double mean = sum / runs;
  const double var = sum_sq / runs - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(q / runs));
  EXPECT_NEAR(var, q, 4.0 * q * std::sqrt(2.0 / runs));
}

TEST(Sensors, PlacedOnCircle) {
  ScenarioConfig c;
  c.num_sensors = 4;
  const auto sensors = make_sensors(c);
  ASSERT_EQ(sensors.size(), 4u);
  const Eigen::Vector2d expected[] = {{3000, 0}, {0, 3000}, {-3000, 0}, {0, -3000}};
  for (std::size_t s = 0; s < 4; ++s) {
    const auto* rb = dynamic_cast<const RangeBearingSensor*>(sensors[s].get());
    ASSERT_NE(rb, nullptr);
    EXPECT_LT((rb->position() - expected[s]).norm(), 1e-9);
  }
}

TEST(Frames, PerfectDetectionNoClutter) {
  ScenarioConfig c;
  c.detection_probability = 1.0;
  c.clutter_mean = 0.0;
  c.num_steps = 40;
  const auto run = simulate_run(c, 0);
  for (std::size_t n = 26; n <= 40; ++n)
    for (const auto& zs : run.frames[n - 1]) EXPECT_EQ(zs.size(), 5u);
  for (std::size_t n = 1; n < 5; ++n)
    for (const auto& zs : run.frames[n - 1]) EXPECT_TRUE(zs.empty());
}

TEST(Frames, ClutterCountAndRange) {
  ScenarioConfig c;
  c.num_sensors = 1;
  c.detection_probability = 0.0;
  const auto sensors = make_sensors(c);
  Rng rng(21);
  const int frames = 10000;
  double count = 0.0, range_sum = 0.0;
  std::size_t ranges = 0;
  for (int f = 0; f < frames; ++f) {
    const auto frame = generate_frame({}, sensors, rng);
    count += static_cast<double>(frame[0].size());
    for (const auto& z : frame[0]) {
      EXPECT_GE(z.range, 0.0);
      EXPECT_LE(z.range, 6000.0);
      EXPECT_GE(z.bearing, 0.0);
      EXPECT_LT(z.bearing, 360.0);
      range_sum += z.range;
      ++ranges;
    }
  }
  EXPECT_NEAR(count / frames, 2.0, 3.0 * std::sqrt(2.0 / frames));
  // Range density 2r / R^2 has mean 2R/3 and standard deviation R sqrt(1/18).
  const double se = 6000.0 * std::sqrt(1.0 / 18.0) / std::sqrt(static_cast<double>(ranges));
  EXPECT_NEAR(range_sum / static_cast<double>(ranges), 4000.0, 4.0 * se);
}

TEST(Frames, MeanMeasurementCount) {
  ScenarioConfig c;
  const auto sensors = make_sensors(c);
  Rng truth_rng(2);
  const GroundTruth truth = generate_truth(c, truth_rng);
  const auto& alive = truth.at(30);
  ASSERT_EQ(alive.size(), 5u);
  Rng rng(4);
  const int frames = 5000;
  double total = 0.0;
  for (int f = 0; f < frames; ++f)
    for (const auto& zs : generate_frame(alive, sensors, rng)) total += static_cast<double>(zs.size());
  // Per sensor: 5 * 0.8 detections plus 2 false alarms; variance 5 * 0.16 + 2.
  const double mean = total / (3.0 * frames);
  EXPECT_NEAR(mean, 6.0, 4.0 * std::sqrt(2.8 / (3.0 * frames)));
}

TEST(Frames, Reproducible) {
  ScenarioConfig c;
  c.num_steps = 30;
  const auto a = simulate_run(c, 2);
  const auto b = simulate_run(c, 2);
  const auto other = simulate_run(c, 3);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  bool differs = false;
  for (std::size_t n = 0; n < a.frames.size(); ++n)
    for (std::size_t s = 0; s < 3; ++s) {
      ASSERT_EQ(a.frames[n][s].size(), b.frames[n][s].size());
      for (std::size_t m = 0; m < a.frames[n][s].size(); ++m) {
        EXPECT_EQ(a.frames[n][s][m].range, b.frames[n][s][m].range);
        EXPECT_EQ(a.frames[n][s][m].bearing, b.frames[n][s][m].bearing);
      }
      if (a.frames[n][s].size() != other.frames[n][s].size()) differs = true;
    }
  EXPECT_TRUE(differs);
}

TEST(Scenario, Validation) {
  ScenarioConfig c;
  EXPECT_NO_THROW(c.validate());
  c.birth_times = {1, 2};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.detection_probability = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.birth_times[0] = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
