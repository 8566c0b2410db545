#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "bpmtt/model.hpp"

namespace bpmtt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-PT messages beta_k(a), a in {0..M}, for one sensor. Row k, column a.
struct BetaTable {
  Eigen::MatrixXd values;

  std::size_t num_targets() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_measurements() const {
    return values.cols() == 0 ? 0 : static_cast<std::size_t>(values.cols() - 1);
  }
  /// Throws std::invalid_argument unless entries are finite, nonnegative and
  /// every row has a positive entry.
  void validate() const;
};

/// Per-PT messages eta_k(a) returned by the association loop, same layout as
/// BetaTable.
struct EtaTable {
  Eigen::MatrixXd values;

  std::size_t num_targets() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_measurements() const {
    return values.cols() == 0 ? 0 : static_cast<std::size_t>(values.cols() - 1);
  }
};

/// Association messages in scalar-ratio form. Because of the structure of the
/// exclusion factor, a message on (k, m) only takes two distinct values:
///   nu(m, k)   = nu_{m->k}(a = m)   / nu_{m->k}(a != m)
///   zeta(k, m) = zeta_{k->m}(b = k) / zeta_{k->m}(b != k)
struct MessageState {
  Eigen::MatrixXd nu;    // M x K
  Eigen::MatrixXd zeta;  // K x M
  int iteration = 0;
  double residual = 0.0;
};

struct AssociationOptions {
  int max_iterations = 20;
  double tolerance = 1e-6;
};

/// Non-finite message encountered while iterating.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct AssociationResult {
  EtaTable eta;
  MessageState state;
  /// Residual after each iteration (max-norm of log-ratio changes of nu).
  std::vector<double> residuals;
};

/// Factor values upsilon(x_j, 1, a; z) for the particles of one PT at one
/// sensor. Only particles with positive weight get a row.
struct FactorTable {
  std::vector<std::size_t> particle_index;
  RowMatrix log_upsilon;  // (active particles) x (M + 1)
  RowMatrix upsilon;
};

FactorTable compute_factor_table(std::span<const TargetState> particles, std::span<const double> weights,
                                 std::span<const Measurement> zs, const Sensor& sensor);

/// beta(a) = sum_j upsilon_j(a) w_j + 1(a) (1 - sum_j w_j).
Eigen::VectorXd beta_from_factors(const FactorTable& factors, std::span<const double> weights);

/// Monte Carlo measurement evaluation for a single PT.
Eigen::VectorXd evaluate_beta_row(std::span<const TargetState> particles, std::span<const double> weights,
                                  std::span<const Measurement> zs, const Sensor& sensor);

struct WeightedParticles {
  std::span<const TargetState> states;
  std::span<const double> weights;
};

BetaTable evaluate_beta(std::span<const WeightedParticles> predicted, std::span<const Measurement> zs,
                        const Sensor& sensor);

/// zeta^(0)_{k->m}(b) = sum_a beta_k(a) Psi(a, b), in ratio form; nu set to 1.
MessageState init_zeta(const BetaTable& beta);

/// Loopy BP over the association variables of one sensor (Jacobi sweeps).
AssociationResult run_association(const BetaTable& beta, const AssociationOptions& options = {});

EtaTable iterate_association(const BetaTable& beta, const AssociationOptions& options = {});

/// Normalized beta_k(a) eta_k(a): approximate marginals p(a_k = a).
Eigen::MatrixXd association_marginals(const BetaTable& beta, const EtaTable& eta);

/// Approximate p(b_m = k), column 0 being clutter. M x (K + 1).
Eigen::MatrixXd measurement_marginals(const MessageState& state);

}  // namespace bpmtt
