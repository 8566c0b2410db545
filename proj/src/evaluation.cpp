#include "bpmtt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bpmtt {

void OspaParams::validate() const {
  if (!(cutoff > 0.0)) throw std::invalid_argument("OSPA cutoff must be > 0");
  if (!(order >= 1.0)) throw std::invalid_argument("OSPA order must be >= 1");
}

Assignment optimal_assignment(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  Assignment out;
  if (n == 0) return out;
  if (n > m) throw std::invalid_argument("cost matrix must not have more rows than columns");
  if (!cost.allFinite() || cost.minCoeff() < 0.0) throw std::invalid_argument("costs must be finite and >= 0");

  // 1-based potentials formulation; column 0 is a virtual start column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (match[j] != 0) out.row_to_col[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i)
    out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.row_to_col[i]));
  return out;
}

double ospa(const std::vector<Eigen::Vector2d>& estimates, const std::vector<Eigen::Vector2d>& truth,
            const OspaParams& params) {
  params.validate();
  const auto& small = estimates.size() <= truth.size() ? estimates : truth;
  const auto& large = estimates.size() <= truth.size() ? truth : estimates;
  if (large.empty()) return 0.0;

  const double c = params.cutoff;
  const double p = params.order;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(small.size()), static_cast<Eigen::Index>(large.size()));
  for (std::size_t i = 0; i < small.size(); ++i)
    for (std::size_t j = 0; j < large.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(std::min((small[i] - large[j]).norm(), c), p);

  const double matched = optimal_assignment(cost).cost;
  const double unmatched = std::pow(c, p) * static_cast<double>(large.size() - small.size());
  const double value = std::pow((matched + unmatched) / static_cast<double>(large.size()), 1.0 / p);
  return std::min(value, c);
}

double count_association_maps(std::size_t num_targets, std::size_t num_measurements) {
  // sum_j C(K, j) M! / (M - j)!
  double total = 0.0;
  double choose = 1.0;
  double falling = 1.0;
  for (std::size_t j = 0; j <= std::min(num_targets, num_measurements); ++j) {
    if (j > 0) {
      choose *= static_cast<double>(num_targets - j + 1) / static_cast<double>(j);
      falling *= static_cast<double>(num_measurements - j + 1);
    }
    total += choose * falling;
  }
  return total;
}

namespace {

struct Enumerator {
  const Eigen::MatrixXd& beta;
  Eigen::MatrixXd& accum;
  std::vector<char> taken;
  std::vector<Eigen::Index> choice;

  void visit(Eigen::Index k, double weight) {
    if (weight == 0.0) return;
    if (k == beta.rows()) {
      for (Eigen::Index t = 0; t < beta.rows(); ++t) accum(t, choice[t]) += weight;
      return;
    }
    choice[k] = 0;
    visit(k + 1, weight * beta(k, 0));
    for (Eigen::Index a = 1; a < beta.cols(); ++a) {
      if (taken[a]) continue;
      taken[a] = 1;
      choice[k] = a;
      visit(k + 1, weight * beta(k, a));
      taken[a] = 0;
    }
  }
};

}  // namespace

Eigen::MatrixXd exact_association_marginals(const BetaTable& beta, double max_maps) {
  beta.validate();
  const double maps = count_association_maps(beta.num_targets(), beta.num_measurements());
  if (maps > max_maps)
    throw std::length_error("association instance has " + std::to_string(maps) + " maps, limit is " +
                            std::to_string(max_maps));

  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(beta.values.rows(), beta.values.cols());
  Enumerator e{beta.values, accum, std::vector<char>(static_cast<std::size_t>(beta.values.cols()), 0),
               std::vector<Eigen::Index>(static_cast<std::size_t>(beta.values.rows()), 0)};
  e.visit(0, 1.0);
  for (Eigen::Index k = 0; k < accum.rows(); ++k) {
    const double total = accum.row(k).sum();
    if (!(total > 0.0)) throw std::invalid_argument("association joint has zero mass");
    accum.row(k) /= total;
  }
  return accum;
}

void BernoulliScenario::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(grid_upper > grid_lower && cells >= 2, "grid needs two or more cells over a positive interval");
  require(walk_std > 0.0 && noise_std > 0.0, "noise scales must be > 0");
  require(detection_probability >= 0.0 && detection_probability <= 1.0, "detection probability must lie in [0, 1]");
  require(clutter_mean > 0.0, "clutter mean must be > 0");
  require(clutter_upper > clutter_lower, "clutter support is empty");
  require(survival_probability >= 0.0 && survival_probability <= 1.0, "survival probability must lie in [0, 1]");
  require(mean_births >= 0.0, "mean births must be >= 0");
  require(reliability_threshold > 0.0 && reliability_threshold < 1.0, "reliability threshold must lie in (0, 1)");
  require(birth_upper > birth_lower, "birth interval is empty");
}

namespace {

double normal_pdf(double x, double sd) {
  return std::exp(-0.5 * (x / sd) * (x / sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::numbers::sqrt2)); }

}  // namespace

BernoulliResult bernoulli_oracle(const BernoulliScenario& sc, const std::vector<std::vector<double>>& measurements,
                                 const std::vector<bool>* reliable) {
  sc.validate();
  if (reliable != nullptr && reliable->size() != measurements.size())
    throw std::invalid_argument("branch schedule must have one entry per step");
  const auto cells = static_cast<Eigen::Index>(sc.cells);
  const double h = (sc.grid_upper - sc.grid_lower) / static_cast<double>(sc.cells - 1);

  BernoulliResult result;
  result.grid = Eigen::VectorXd::LinSpaced(cells, sc.grid_lower, sc.grid_upper);
  const Eigen::VectorXd& x = result.grid;
  Eigen::VectorXd trap = Eigen::VectorXd::Constant(cells, h);
  trap[0] = trap[cells - 1] = 0.5 * h;
  auto integrate = [&](const Eigen::VectorXd& f) { return trap.dot(f); };

  result.coarse = h > 0.5 * std::min(sc.walk_std, sc.noise_std);
  if (result.coarse)
    std::clog << "warning: Bernoulli oracle grid spacing " << h << " is coarse relative to the noise scales\n";

  // Random-walk kernel weighted by the trapezoid rule: K(i, j) = N(x_i - x_j) trap_j.
  Eigen::MatrixXd kernel(cells, cells);
  for (Eigen::Index i = 0; i < cells; ++i)
    for (Eigen::Index j = 0; j < cells; ++j) kernel(i, j) = normal_pdf(x[i] - x[j], sc.walk_std) * trap[j];

  const double clutter_density = 1.0 / (sc.clutter_upper - sc.clutter_lower);
  double existence = 0.0;
  Eigen::VectorXd density = Eigen::VectorXd::Zero(cells);
  const std::vector<double> empty;

  for (std::size_t n = 1; n <= measurements.size(); ++n) {
    // Birth/survival split driven by the previous existence probability.
    double predicted_existence = 0.0;
    Eigen::VectorXd predicted(cells);
    const bool survive = reliable != nullptr ? (*reliable)[n - 1] : existence > sc.reliability_threshold;
    if (survive) {
      predicted_existence = sc.survival_probability * existence;
      predicted = kernel * density;
    } else {
      const double birth_probability = std::min(1.0, sc.mean_births);
      predicted_existence = birth_probability * (1.0 - existence);
      const auto& previous = n >= 2 ? measurements[n - 2] : empty;
      if (previous.empty()) {
        // Uniform box convolved with the random-walk step.
        const double width = sc.birth_upper - sc.birth_lower;
        for (Eigen::Index i = 0; i < cells; ++i)
          predicted[i] = (normal_cdf(x[i] - sc.birth_lower, sc.walk_std) -
                          normal_cdf(x[i] - sc.birth_upper, sc.walk_std)) / width;
      } else {
        const double sd = std::hypot(sc.noise_std, sc.walk_std);
        predicted.setZero();
        for (double z : previous)
          for (Eigen::Index i = 0; i < cells; ++i) predicted[i] += normal_pdf(x[i] - z, sd);
        predicted /= static_cast<double>(previous.size());
      }
    }
    const double mass = integrate(predicted);
    if (mass > 0.0) predicted /= mass;

    Eigen::VectorXd likelihood = Eigen::VectorXd::Constant(cells, 1.0 - sc.detection_probability);
    for (double z : measurements[n - 1]) {
      const double scale = sc.detection_probability / (sc.clutter_mean * clutter_density);
      for (Eigen::Index i = 0; i < cells; ++i) likelihood[i] += scale * normal_pdf(z - x[i], sc.noise_std);
    }
    const Eigen::VectorXd joint = predicted.cwiseProduct(likelihood);
    const double evidence = integrate(joint);
    const double exists = predicted_existence * evidence;
    const double absent = 1.0 - predicted_existence;
    existence = exists / (exists + absent);
    density = evidence > 0.0 ? Eigen::VectorXd(joint / evidence) : predicted;

    result.existence.push_back(existence);
    result.posterior.push_back(density);
  }
  return result;
}

}  // namespace bpmtt
