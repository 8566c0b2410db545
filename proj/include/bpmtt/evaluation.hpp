#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "bpmtt/association.hpp"

namespace bpmtt {

struct OspaParams {
  double cutoff = 200.0;
  double order = 1.0;

  void validate() const;
};

struct Assignment {
  /// row_to_col[i] is the column matched to row i.
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost injective matching of the rows of a rows <= cols cost matrix
/// into its columns (Hungarian method with potentials). A matrix with more
/// rows than columns is rejected.
Assignment optimal_assignment(const Eigen::MatrixXd& cost);

/// OSPA distance between two finite position sets; 0 when both are empty.
double ospa(const std::vector<Eigen::Vector2d>& estimates, const std::vector<Eigen::Vector2d>& truth,
            const OspaParams& params = {});

/// Number of association maps the exact oracle enumerates (a_k distinct when
/// nonzero).
double count_association_maps(std::size_t num_targets, std::size_t num_measurements);

/// Exact marginals p(a_k = a) of the joint prop. to prod_k beta_k(a_k) under
/// the exclusion constraint, K x (M + 1). Throws std::length_error when more
/// than `max_maps` maps would have to be enumerated.
Eigen::MatrixXd exact_association_marginals(const BetaTable& beta, double max_maps = 1e7);

/// Single-target, single-sensor 1D scenario for the grid Bernoulli filter.
/// The state is the p1 coordinate, moving as a Gaussian random walk; the
/// sensor observes p1 with Gaussian noise and emits uniform clutter on
/// [clutter_lower, clutter_upper]. Births follow the same adaptive scheme as
/// the tracker with K = 1.
struct BernoulliScenario {
  double grid_lower = -700.0;
  double grid_upper = 700.0;
  std::size_t cells = 2000;

  double walk_std = 2.0;
  double detection_probability = 0.8;
  double clutter_mean = 2.0;
  double noise_std = 10.0;
  double clutter_lower = -500.0;
  double clutter_upper = 500.0;

  double survival_probability = 0.999;
  double mean_births = 0.01;
  double reliability_threshold = 1e-3;
  double birth_lower = -500.0;
  double birth_upper = 500.0;

  void validate() const;
};

struct BernoulliResult {
  Eigen::VectorXd grid;
  std::vector<double> existence;           // one per step
  std::vector<Eigen::VectorXd> posterior;  // normalized state density per step
  bool coarse = false;                     // grid spacing too wide for the noise scales
};

/// Grid recursion of the Bernoulli filter. measurements[n - 1] holds the
/// observed coordinates at step n. When `reliable` is given, entry n - 1
/// selects the survival branch (true) or the birth branch (false) at step n
/// instead of comparing the oracle's own existence with the threshold.
BernoulliResult bernoulli_oracle(const BernoulliScenario& scenario,
                                 const std::vector<std::vector<double>>& measurements,
                                 const std::vector<bool>* reliable = nullptr);

}  // namespace bpmtt
