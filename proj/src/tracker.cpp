#include "bpmtt/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

#include "bpmtt/parallel.hpp"

namespace bpmtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Below this a linear-domain factor sum is recomputed with log-sum-exp.
constexpr double kLinearFloor = 1e-280;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void TrackerConfig::validate() const {
  require(num_targets >= 1, "number of potential targets must be >= 1");
  require(num_particles >= 1, "number of particles must be >= 1");
  require(num_birth_particles >= 1, "number of birth particles must be >= 1");
  require(association.max_iterations >= 1, "BP iteration cap must be >= 1");
  require(association.tolerance > 0.0, "BP tolerance must be > 0");
  require(detection_threshold > 0.0 && detection_threshold < 1.0, "detection threshold must lie in (0, 1)");
  require(reliability_threshold > 0.0 && reliability_threshold < 1.0, "reliability threshold must lie in (0, 1)");
  require(mean_births >= 0.0 && std::isfinite(mean_births), "mean number of births must be >= 0");
  require(survival_probability >= 0.0 && survival_probability <= 1.0, "survival probability must lie in [0, 1]");
  require(birth_velocity_std >= 0.0 && std::isfinite(birth_velocity_std), "birth velocity std must be >= 0");
  require((birth_region.upper - birth_region.lower).minCoeff() >= 0.0, "birth region bounds are inverted");
  require(threads >= 1, "thread count must be >= 1");
}

// ---- beliefs ----

PotentialTargetBelief::PotentialTargetBelief(std::vector<TargetState> particles, std::vector<double> weights)
    : particles_(std::move(particles)), weights_(std::move(weights)) {
  if (particles_.size() != weights_.size()) throw std::invalid_argument("particle/weight size mismatch");
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("particle weights must be finite and >= 0");
  existence_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

PotentialTargetBelief PotentialTargetBelief::nonexistent(std::size_t num_particles) {
  return PotentialTargetBelief(std::vector<TargetState>(num_particles, TargetState::Zero()),
                               std::vector<double>(num_particles, 0.0));
}

PotentialTargetBelief PotentialTargetBelief::equally_weighted(std::vector<TargetState> particles,
                                                              double existence) {
  if (particles.empty()) throw std::invalid_argument("particle set is empty");
  if (!(existence >= 0.0)) throw std::invalid_argument("existence probability must be >= 0");
  const double w = existence / static_cast<double>(particles.size());
  const std::size_t count = particles.size();
  PotentialTargetBelief belief(std::move(particles), std::vector<double>(count, w));
  belief.existence_ = existence;
  return belief;
}

double PredictedBelief::existence() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

std::size_t PredictedBelief::num_birth() const {
  return static_cast<std::size_t>(std::count(is_birth.begin(), is_birth.end(), 1));
}

std::vector<TargetState> TrackRecord::estimates() const {
  std::vector<TargetState> out;
  for (const auto& t : targets)
    if (t.estimate) out.push_back(*t.estimate);
  return out;
}

// ---- prediction ----

PredictedBelief predict(const PotentialTargetBelief& belief, const MotionModel& motion,
                        const BirthPlanEntry& plan, std::size_t num_birth_particles, Rng& rng) {
  if (belief.size() == 0) throw std::invalid_argument("belief has no particles");
  const double p_b = plan.birth_probability;
  const double p_s = plan.survival_probability;
  if (!(p_b >= 0.0 && p_b <= 1.0) || !(p_s >= 0.0 && p_s <= 1.0))
    throw std::invalid_argument("birth/survival probabilities must lie in [0, 1]");
  if (p_b > 0.0 && plan.birth_particles.size() != num_birth_particles)
    throw std::invalid_argument("birth plan is missing birth particles");

  const std::size_t num_survivors = belief.size();
  PredictedBelief out;
  out.particles.reserve(num_survivors + num_birth_particles);
  out.weights.reserve(num_survivors + num_birth_particles);
  out.is_birth.assign(num_survivors, 0);
  out.is_birth.resize(num_survivors + num_birth_particles, 1);

  for (std::size_t j = 0; j < num_survivors; ++j) {
    const double w = p_s * belief.weights()[j];
    out.particles.push_back(w > 0.0 ? transition_sample(belief.particles()[j], motion, rng)
                                    : belief.particles()[j]);
    out.weights.push_back(w);
  }

  const double birth_weight =
      p_b * std::max(0.0, 1.0 - belief.existence()) / static_cast<double>(num_birth_particles);
  const bool have_births = plan.birth_particles.size() == num_birth_particles;
  for (std::size_t i = 0; i < num_birth_particles; ++i) {
    out.particles.push_back(have_births ? plan.birth_particles[i] : TargetState::Zero());
    out.weights.push_back(birth_weight);
  }
  return out;
}

// ---- update ----

PotentialTargetBelief update_with_factors(const PredictedBelief& predicted,
                                          std::span<const FactorTable* const> factors,
                                          std::span<const Eigen::VectorXd> etas) {
  if (factors.size() != etas.size()) throw std::invalid_argument("need one eta row per sensor");
  const std::size_t num_particles = predicted.particles.size();

  double predicted_existence = 0.0;
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < num_particles; ++j) {
    if (predicted.weights[j] > 0.0) {
      active.push_back(j);
      predicted_existence += predicted.weights[j];
    }
  }

  std::vector<double> log_wa(active.size());
  for (std::size_t r = 0; r < active.size(); ++r) log_wa[r] = std::log(predicted.weights[active[r]]);

  double log_wb = std::log(std::max(0.0, 1.0 - predicted_existence));
  for (std::size_t s = 0; s < factors.size(); ++s) {
    const FactorTable& table = *factors[s];
    const Eigen::VectorXd& eta = etas[s];
    if (table.particle_index.size() != active.size())
      throw std::invalid_argument("factor table does not match the predicted particles");
    if (eta.size() != table.upsilon.cols()) throw std::invalid_argument("eta row has the wrong length");
    log_wb += std::log(eta[0]);

    const Eigen::VectorXd log_eta = eta.array().log();
    for (std::size_t r = 0; r < active.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      const double linear = table.upsilon.row(row).dot(eta);
      if (linear > kLinearFloor && std::isfinite(linear)) {
        log_wa[r] += std::log(linear);
        continue;
      }
      // Max-shifted log-sum-exp when the linear sum under- or overflows.
      const Eigen::ArrayXd terms = table.log_upsilon.row(row).transpose().array() + log_eta.array();
      const double peak = terms.maxCoeff();
      log_wa[r] += peak == kNegInf ? kNegInf : peak + std::log((terms - peak).exp().sum());
    }
  }

  double peak = log_wb;
  for (double v : log_wa) peak = std::max(peak, v);
  if (peak == kNegInf || !std::isfinite(peak))
    throw DegeneratePosterior("all existence hypotheses of the potential target were annihilated");
  double total = std::exp(log_wb - peak);
  for (double v : log_wa) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);

  std::vector<double> weights(num_particles, 0.0);
  for (std::size_t r = 0; r < active.size(); ++r) weights[active[r]] = std::exp(log_wa[r] - log_norm);
  return PotentialTargetBelief(predicted.particles, std::move(weights));
}

PotentialTargetBelief update(const PredictedBelief& predicted, std::span<const Eigen::VectorXd> etas,
                             const MeasurementFrame& frame,
                             std::span<const std::shared_ptr<const Sensor>> sensors) {
  if (frame.size() != sensors.size() || etas.size() != sensors.size())
    throw std::invalid_argument("frame, eta rows and sensors must agree in count");
  std::vector<FactorTable> tables;
  tables.reserve(sensors.size());
  for (std::size_t s = 0; s < sensors.size(); ++s)
    tables.push_back(compute_factor_table(predicted.particles, predicted.weights, frame[s], *sensors[s]));
  std::vector<const FactorTable*> pointers;
  for (const auto& t : tables) pointers.push_back(&t);
  return update_with_factors(predicted, pointers, etas);
}

// ---- detection, estimation, resampling ----

std::optional<TargetState> detect_and_estimate(const PotentialTargetBelief& belief, double threshold) {
  if (belief.size() == 0) throw std::invalid_argument("belief has no particles");
  const double existence = belief.existence();
  if (!(existence > threshold)) return std::nullopt;
  TargetState estimate = TargetState::Zero();
  for (std::size_t j = 0; j < belief.size(); ++j) estimate += belief.weights()[j] * belief.particles()[j];
  return TargetState(estimate / existence);
}

PotentialTargetBelief resample(const PotentialTargetBelief& belief, std::size_t num_particles, Rng& rng) {
  if (num_particles == 0) throw std::invalid_argument("cannot resample to zero particles");
  const auto& w = belief.weights();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("cannot resample: all weights are zero");

  const double step = total / static_cast<double>(num_particles);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double offset = unit(rng) * step;

  std::vector<TargetState> out;
  out.reserve(num_particles);
  std::size_t j = 0;
  double cumulative = w[0];
  for (std::size_t i = 0; i < num_particles; ++i) {
    const double target = offset + static_cast<double>(i) * step;
    while (target >= cumulative && j + 1 < w.size()) cumulative += w[++j];
    // Skip trailing zero-weight particles reached through rounding.
    std::size_t pick = j;
    while (w[pick] == 0.0 && pick > 0) --pick;
    out.push_back(belief.particles()[pick]);
  }
  return PotentialTargetBelief::equally_weighted(std::move(out), belief.existence());
}

// ---- birth and survival ----

std::vector<std::vector<std::size_t>> partition_measurements(std::size_t count, std::size_t parts, Rng& rng) {
  std::vector<std::vector<std::size_t>> subsets(parts);
  if (parts == 0) return subsets;
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < count; ++i) subsets[i % parts].push_back(order[i]);
  return subsets;
}

std::vector<TargetState> sample_birth_particles(std::span<const Measurement> subset, const Sensor* sensor,
                                                const TrackerConfig& config, const MotionModel& motion,
                                                Rng& rng) {
  std::vector<PositionGaussian> proposals;
  if (sensor != nullptr)
    for (const auto& z : subset) proposals.push_back(sensor->invert(z));

  std::normal_distribution<double> std_normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Vector2d extent = config.birth_region.upper - config.birth_region.lower;

  std::vector<TargetState> particles;
  particles.reserve(config.num_birth_particles);
  for (std::size_t i = 0; i < config.num_birth_particles; ++i) {
    Eigen::Vector2d pos;
    if (!proposals.empty()) {
      const PositionGaussian& g = proposals[i % proposals.size()];
      pos = g.mean + g.sqrt_cov * Eigen::Vector2d(std_normal(rng), std_normal(rng));
    } else {
      pos = config.birth_region.lower + extent.cwiseProduct(Eigen::Vector2d(unit(rng), unit(rng)));
    }
    TargetState x;
    x << pos, config.birth_velocity_std * std_normal(rng), config.birth_velocity_std * std_normal(rng);
    particles.push_back(transition_sample(x, motion, rng));
  }
  return particles;
}

BirthPlan plan_birth_survival(std::span<const PotentialTargetBelief> beliefs,
                              std::span<const Measurement> previous, const Sensor* designated,
                              const TrackerConfig& config, const MotionModel& motion, std::size_t n) {
  BirthPlan plan;
  plan.entries.resize(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    if (beliefs[k].existence() > config.reliability_threshold) {
      plan.reliable.push_back(k);
      plan.entries[k].survival_probability = config.survival_probability;
    } else {
      plan.unreliable.push_back(k);
    }
  }
  if (plan.unreliable.empty()) return plan;

  const std::span<const Measurement> measurements = designated != nullptr ? previous : std::span<const Measurement>{};
  Rng plan_rng = make_rng(config.seed, Stream::kPlan, {n});
  const auto subsets = partition_measurements(measurements.size(), plan.unreliable.size(), plan_rng);
  const double birth_probability =
      std::min(1.0, config.mean_births / static_cast<double>(plan.unreliable.size()));

  parallel_for(plan.unreliable.size(), config.threads, [&](std::size_t u) {
    const std::size_t k = plan.unreliable[u];
    BirthPlanEntry& entry = plan.entries[k];
    entry.birth_probability = birth_probability;
    entry.survival_probability = 0.0;
    entry.measurement_subset = subsets[u];
    std::vector<Measurement> subset;
    for (std::size_t idx : subsets[u]) subset.push_back(measurements[idx]);
    Rng rng = make_rng(config.seed, Stream::kBirth, {n, k});
    entry.birth_particles = sample_birth_particles(subset, designated, config, motion, rng);
  });
  return plan;
}

// ---- tracker ----

Tracker::Tracker(TrackerConfig config, MotionModel motion, std::vector<std::shared_ptr<const Sensor>> sensors)
    : config_(std::move(config)), motion_(std::move(motion)), sensors_(std::move(sensors)) {
  config_.validate();
  motion_.validate();
  for (const auto& s : sensors_) {
    if (!s) throw std::invalid_argument("null sensor");
    if (!(s->clutter_mean() > 0.0)) throw std::invalid_argument("tracker requires a positive clutter mean per sensor");
  }
  beliefs_.assign(config_.num_targets, PotentialTargetBelief::nonexistent(config_.num_particles));
}

TrackRecord Tracker::step(const MeasurementFrame& frame) {
  if (frame.size() != sensors_.size())
    throw std::invalid_argument("frame has " + std::to_string(frame.size()) + " sensors, tracker has " +
                                std::to_string(sensors_.size()));
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = ++n_;
  const std::size_t num_targets = config_.num_targets;
  const std::size_t num_sensors = sensors_.size();

  std::optional<std::size_t> designated;
  std::span<const Measurement> previous;
  if (num_sensors > 0) {
    designated = n % num_sensors;
    if (!previous_frame_.empty()) previous = previous_frame_[*designated];
  }
  last_plan_ = plan_birth_survival(beliefs_, previous, designated ? sensors_[*designated].get() : nullptr,
                                   config_, motion_, n);
  last_plan_.designated_sensor = designated;

  std::vector<PredictedBelief> predicted(num_targets);
  parallel_for(num_targets, config_.threads, [&](std::size_t k) {
    Rng rng = make_rng(config_.seed, Stream::kPredict, {n, k});
    predicted[k] = predict(beliefs_[k], motion_, last_plan_.entries[k], config_.num_birth_particles, rng);
  });

  // factors[s * K + k]
  std::vector<FactorTable> factors(num_sensors * num_targets);
  std::vector<EtaTable> etas(num_sensors);
  for (std::size_t s = 0; s < num_sensors; ++s) {
    BetaTable beta;
    beta.values.resize(static_cast<Eigen::Index>(num_targets), static_cast<Eigen::Index>(frame[s].size() + 1));
    parallel_for(num_targets, config_.threads, [&](std::size_t k) {
      FactorTable& table = factors[s * num_targets + k];
      table = compute_factor_table(predicted[k].particles, predicted[k].weights, frame[s], *sensors_[s]);
      beta.values.row(static_cast<Eigen::Index>(k)) = beta_from_factors(table, predicted[k].weights).transpose();
    });
    etas[s] = iterate_association(beta, config_.association);
  }

  TrackRecord record;
  record.n = n;
  record.targets.resize(num_targets);
  std::vector<unsigned char> reset(num_targets, 0);
  parallel_for(num_targets, config_.threads, [&](std::size_t k) {
    std::vector<const FactorTable*> tables(num_sensors);
    std::vector<Eigen::VectorXd> eta_rows(num_sensors);
    for (std::size_t s = 0; s < num_sensors; ++s) {
      tables[s] = &factors[s * num_targets + k];
      eta_rows[s] = etas[s].values.row(static_cast<Eigen::Index>(k)).transpose();
    }
    PotentialTargetBelief updated;
    try {
      updated = update_with_factors(predicted[k], tables, eta_rows);
    } catch (const DegeneratePosterior&) {
      reset[k] = 1;
      beliefs_[k] = PotentialTargetBelief::nonexistent(config_.num_particles);
      return;
    }
    TargetRecord& out = record.targets[k];
    out.existence = updated.existence();
    out.estimate = detect_and_estimate(updated, config_.detection_threshold);
    out.detected = out.estimate.has_value();
    if (updated.existence() > 0.0) {
      Rng rng = make_rng(config_.seed, Stream::kResample, {n, k});
      beliefs_[k] = resample(updated, config_.num_particles, rng);
    } else {
      beliefs_[k] = PotentialTargetBelief::nonexistent(config_.num_particles);
    }
  });
  for (std::size_t k = 0; k < num_targets; ++k) {
    if (reset[k]) {
      ++record.resets;
      std::clog << "warning: potential target " << k << " reset to nonexistence at step " << n
                << " (degenerate posterior)\n";
    }
  }

  previous_frame_ = frame;
  record.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return record;
}

}  // namespace bpmtt
