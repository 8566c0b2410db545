#include "bpmtt/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bpmtt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Floor applied to beta_k(0) relative to the row maximum when a PT cannot be
// missed (P_d = 1 and certain existence); keeps the ratio form finite.
constexpr double kMissFloor = 1e-12;

void check_weights(std::span<const TargetState> particles, std::span<const double> weights) {
  if (particles.empty()) throw std::invalid_argument("particle set is empty");
  if (particles.size() != weights.size()) throw std::invalid_argument("particle/weight size mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("particle weights must be finite and >= 0");
    total += w;
  }
  if (total > 1.0 + 1e-9) throw std::invalid_argument("particle weights sum to more than one");
}

}  // namespace

void BetaTable::validate() const {
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    bool any_positive = false;
    for (Eigen::Index a = 0; a < values.cols(); ++a) {
      const double v = values(k, a);
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("beta entries must be finite and >= 0");
      any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) throw std::invalid_argument("beta row " + std::to_string(k) + " is identically zero");
  }
}

FactorTable compute_factor_table(std::span<const TargetState> particles, std::span<const double> weights,
                                 std::span<const Measurement> zs, const Sensor& sensor) {
  check_weights(particles, weights);
  const std::size_t num_meas = zs.size();
  const auto cols = static_cast<Eigen::Index>(num_meas + 1);

  std::vector<double> log_fa(num_meas);
  for (std::size_t m = 0; m < num_meas; ++m) {
    log_fa[m] = sensor.log_clutter_pdf(zs[m]);
    if (log_fa[m] == kNegInf) throw ModelError("false alarm density vanishes at an observed measurement");
  }
  if (num_meas > 0 && sensor.clutter_mean() == 0.0)
    throw ModelError("detection factor requires a positive clutter mean");
  const double log_mu = num_meas > 0 ? std::log(sensor.clutter_mean()) : 0.0;

  FactorTable table;
  for (std::size_t j = 0; j < particles.size(); ++j)
    if (weights[j] > 0.0) table.particle_index.push_back(j);
  const auto rows = static_cast<Eigen::Index>(table.particle_index.size());
  table.log_upsilon.resize(rows, cols);
  table.upsilon.resize(rows, cols);

  const bool constant_pd = sensor.has_constant_detection();
  const double pd0 = sensor.detection_probability(particles.front());
  const double log_miss0 = std::log1p(-pd0);
  const double log_detect0 = std::log(pd0) - log_mu;

  for (Eigen::Index r = 0; r < rows; ++r) {
    const TargetState& x = particles[table.particle_index[r]];
    double log_miss = log_miss0;
    double log_detect = log_detect0;
    if (!constant_pd) {
      const double pd = sensor.detection_probability(x);
      log_miss = std::log1p(-pd);
      log_detect = std::log(pd) - log_mu;
    }
    double* log_row = table.log_upsilon.row(r).data();
    double* row = table.upsilon.row(r).data();
    log_row[0] = log_miss;
    row[0] = std::exp(log_miss);
    if (num_meas == 0) continue;
    sensor.log_measurement_pdfs(x, zs, std::span<double>(log_row + 1, num_meas));
    for (std::size_t m = 0; m < num_meas; ++m) {
      log_row[m + 1] += log_detect - log_fa[m];
      row[m + 1] = std::exp(log_row[m + 1]);
    }
  }
  return table;
}

Eigen::VectorXd beta_from_factors(const FactorTable& factors, std::span<const double> weights) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(factors.upsilon.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < factors.upsilon.rows(); ++r) {
    const double w = weights[factors.particle_index[r]];
    total += w;
    beta += w * factors.upsilon.row(r).transpose();
  }
  beta[0] += std::max(0.0, 1.0 - total);
  return beta;
}

Eigen::VectorXd evaluate_beta_row(std::span<const TargetState> particles, std::span<const double> weights,
                                  std::span<const Measurement> zs, const Sensor& sensor) {
  return beta_from_factors(compute_factor_table(particles, weights, zs, sensor), weights);
}

BetaTable evaluate_beta(std::span<const WeightedParticles> predicted, std::span<const Measurement> zs,
                        const Sensor& sensor) {
  BetaTable beta;
  beta.values.resize(static_cast<Eigen::Index>(predicted.size()), static_cast<Eigen::Index>(zs.size() + 1));
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    beta.values.row(static_cast<Eigen::Index>(k)) =
        evaluate_beta_row(predicted[k].states, predicted[k].weights, zs, sensor).transpose();
  }
  return beta;
}

namespace {

/// Likelihood ratios l(k, m) = beta_k(m) / beta_k(0), K x M.
Eigen::MatrixXd likelihood_ratios(const BetaTable& beta) {
  beta.validate();
  const Eigen::Index num_targets = beta.values.rows();
  const Eigen::Index num_meas = std::max<Eigen::Index>(beta.values.cols() - 1, 0);
  Eigen::MatrixXd ratios(num_targets, num_meas);
  for (Eigen::Index k = 0; k < num_targets; ++k) {
    double miss = beta.values(k, 0);
    if (miss <= 0.0) miss = kMissFloor * beta.values.row(k).maxCoeff();
    for (Eigen::Index m = 0; m < num_meas; ++m) ratios(k, m) = beta.values(k, m + 1) / miss;
  }
  return ratios;
}

// zeta(k, m) = l(k, m) / (1 + sum_{m' != m} l(k, m') nu(m', k))
void update_zeta(const Eigen::MatrixXd& ratios, const Eigen::MatrixXd& nu, Eigen::MatrixXd& zeta) {
  for (Eigen::Index k = 0; k < ratios.rows(); ++k) {
    double total = 1.0;
    for (Eigen::Index m = 0; m < ratios.cols(); ++m) total += ratios(k, m) * nu(m, k);
    for (Eigen::Index m = 0; m < ratios.cols(); ++m) {
      const double rest = std::max(total - ratios(k, m) * nu(m, k), 1.0);
      zeta(k, m) = ratios(k, m) / rest;
    }
  }
}

// nu(m, k) = 1 / (1 + sum_{k' != k} zeta(k', m))
void update_nu(const Eigen::MatrixXd& zeta, Eigen::MatrixXd& nu) {
  for (Eigen::Index m = 0; m < zeta.cols(); ++m) {
    double total = 1.0;
    for (Eigen::Index k = 0; k < zeta.rows(); ++k) total += zeta(k, m);
    for (Eigen::Index k = 0; k < zeta.rows(); ++k) nu(m, k) = 1.0 / std::max(total - zeta(k, m), 1.0);
  }
}

}  // namespace

MessageState init_zeta(const BetaTable& beta) {
  const Eigen::MatrixXd ratios = likelihood_ratios(beta);
  MessageState state;
  state.nu = Eigen::MatrixXd::Ones(ratios.cols(), ratios.rows());
  state.zeta = Eigen::MatrixXd::Zero(ratios.rows(), ratios.cols());
  update_zeta(ratios, state.nu, state.zeta);
  return state;
}

AssociationResult run_association(const BetaTable& beta, const AssociationOptions& options) {
  if (options.max_iterations < 1) throw std::invalid_argument("association needs at least one iteration");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("association tolerance must be > 0");

  const Eigen::MatrixXd ratios = likelihood_ratios(beta);
  const Eigen::Index num_targets = ratios.rows();
  const Eigen::Index num_meas = ratios.cols();

  AssociationResult result;
  MessageState& state = result.state;
  state.nu = Eigen::MatrixXd::Ones(num_meas, num_targets);
  state.zeta = Eigen::MatrixXd::Zero(num_targets, num_meas);
  update_zeta(ratios, state.nu, state.zeta);

  Eigen::MatrixXd next_nu(num_meas, num_targets);
  for (int p = 1; p <= options.max_iterations; ++p) {
    update_nu(state.zeta, next_nu);
    double residual = 0.0;
    for (Eigen::Index m = 0; m < num_meas; ++m) {
      for (Eigen::Index k = 0; k < num_targets; ++k) {
        const double v = next_nu(m, k);
        if (!std::isfinite(v) || !(v > 0.0))
          throw NumericalError("non-finite association message at iteration " + std::to_string(p), p);
        residual = std::max(residual, std::abs(std::log(v / state.nu(m, k))));
      }
    }
    state.nu.swap(next_nu);
    update_zeta(ratios, state.nu, state.zeta);
    if (!state.zeta.allFinite())
      throw NumericalError("non-finite association message at iteration " + std::to_string(p), p);
    state.iteration = p;
    state.residual = residual;
    result.residuals.push_back(residual);
    if (residual < options.tolerance) break;
  }

  result.eta.values = Eigen::MatrixXd::Ones(num_targets, num_meas + 1);
  for (Eigen::Index k = 0; k < num_targets; ++k)
    for (Eigen::Index m = 0; m < num_meas; ++m) result.eta.values(k, m + 1) = state.nu(m, k);
  return result;
}

EtaTable iterate_association(const BetaTable& beta, const AssociationOptions& options) {
  return run_association(beta, options).eta;
}

Eigen::MatrixXd association_marginals(const BetaTable& beta, const EtaTable& eta) {
  if (beta.values.rows() != eta.values.rows() || beta.values.cols() != eta.values.cols())
    throw std::invalid_argument("beta/eta shape mismatch");
  Eigen::MatrixXd marginals = beta.values.cwiseProduct(eta.values);
  for (Eigen::Index k = 0; k < marginals.rows(); ++k) {
    const double total = marginals.row(k).sum();
    if (!(total > 0.0)) throw std::invalid_argument("association belief has zero mass");
    marginals.row(k) /= total;
  }
  return marginals;
}

Eigen::MatrixXd measurement_marginals(const MessageState& state) {
  const Eigen::Index num_targets = state.zeta.rows();
  const Eigen::Index num_meas = state.zeta.cols();
  Eigen::MatrixXd marginals(num_meas, num_targets + 1);
  for (Eigen::Index m = 0; m < num_meas; ++m) {
    marginals(m, 0) = 1.0;
    for (Eigen::Index k = 0; k < num_targets; ++k) marginals(m, k + 1) = state.zeta(k, m);
    marginals.row(m) /= marginals.row(m).sum();
  }
  return marginals;
}

}  // namespace bpmtt
