#include "bpmtt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>

#include "bpmtt/parallel.hpp"

namespace bpmtt {

ScenarioConfig scenario_for_run(const RunConfig& config) {
  ScenarioConfig sc = config.scenario;
  sc.seed = config.seed;
  return sc;
}

TrackerConfig tracker_for_run(const RunConfig& config, std::size_t run) {
  TrackerConfig tc = config.tracker;
  tc.seed = derive_seed(config.seed, Stream::kRun, {run});
  tc.threads = config.runs == 1 ? config.threads : 1;
  return tc;
}

std::vector<ResultRow> track_run(const RunConfig& config, std::size_t run, const SimulatedRun& data) {
  const ScenarioConfig sc = scenario_for_run(config);
  if (data.frames.size() != data.truth.num_steps())
    throw DataMismatch("frames and truth cover different numbers of steps");
  Tracker tracker(tracker_for_run(config, run), sc.motion(), make_sensors(sc));

  std::vector<ResultRow> rows;
  rows.reserve(data.frames.size());
  for (std::size_t n = 1; n <= data.frames.size(); ++n) {
    const MeasurementFrame& frame = data.frames[n - 1];
    if (frame.size() != tracker.num_sensors())
      throw DataMismatch("frame at step " + std::to_string(n) + " has " + std::to_string(frame.size()) +
                         " sensors, configuration has " + std::to_string(tracker.num_sensors()));
    const TrackRecord record = tracker.step(frame);

    std::vector<Eigen::Vector2d> estimated;
    for (const auto& x : record.estimates()) estimated.push_back(position(x));
    std::vector<Eigen::Vector2d> actual;
    for (const auto& t : data.truth.at(n)) actual.push_back(position(t.state));

    rows.push_back({run, n, ospa(estimated, actual, config.ospa), estimated.size(), actual.size(), record.step_ms});
  }
  return rows;
}

std::vector<ResultRow> run_monte_carlo(const RunConfig& config) {
  config.validate();
  const ScenarioConfig sc = scenario_for_run(config);
  std::vector<std::vector<ResultRow>> per_run(config.runs);
  parallel_for(config.runs, config.threads,
               [&](std::size_t r) { per_run[r] = track_run(config, r, simulate_run(sc, r)); });
  std::vector<ResultRow> rows;
  for (auto& part : per_run) rows.insert(rows.end(), part.begin(), part.end());
  return rows;
}

std::vector<MospaRow> aggregate_mospa(const std::vector<ResultRow>& rows) {
  struct Sum {
    double ospa = 0.0, card_est = 0.0, card_true = 0.0;
    std::size_t count = 0;
  };
  std::map<std::size_t, Sum> sums;
  for (const auto& r : rows) {
    Sum& s = sums[r.n];
    s.ospa += r.ospa;
    s.card_est += static_cast<double>(r.card_est);
    s.card_true += static_cast<double>(r.card_true);
    ++s.count;
  }
  std::vector<MospaRow> out;
  for (const auto& [n, s] : sums) {
    const auto c = static_cast<double>(s.count);
    out.push_back({n, s.ospa / c, s.card_est / c, s.card_true / c});
  }
  return out;
}

// ---- CSV ----

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells(1);
  for (char ch : line) {
    if (ch == ',') cells.emplace_back();
    else cells.back() += ch;
  }
  return cells;
}

template <typename Fn>
void read_csv(const std::string& path, const std::string& header, std::size_t columns, Fn&& on_row) {
  std::ifstream in(path);
  if (!in) throw DataMismatch("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw DataMismatch("'" + path + "' must start with header '" + header + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns)
      throw DataMismatch(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) + " columns");
    try {
      on_row(cells);
    } catch (const std::logic_error&) {
      throw DataMismatch(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
}

}  // namespace

void write_frames_csv(const std::string& path, const std::vector<SimulatedRun>& runs) {
  auto out = open_out(path);
  out << "run,n,s,range_m,bearing_deg\n";
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (std::size_t n = 1; n <= runs[r].frames.size(); ++n)
      for (std::size_t s = 0; s < runs[r].frames[n - 1].size(); ++s) {
        const auto& zs = runs[r].frames[n - 1][s];
        // A sensor without measurements gets one row with empty range and bearing.
        if (zs.empty()) out << r << ',' << n << ',' << s + 1 << ",,\n";
        for (const auto& z : zs)
          out << r << ',' << n << ',' << s + 1 << ',' << fmt(z.range) << ',' << fmt(z.bearing) << '\n';
      }
}

void write_truth_csv(const std::string& path, const std::vector<SimulatedRun>& runs) {
  auto out = open_out(path);
  out << "run,n,target,p1,p2,v1,v2\n";
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (std::size_t n = 1; n <= runs[r].truth.num_steps(); ++n)
      for (const auto& t : runs[r].truth.at(n))
        out << r << ',' << n << ',' << t.id + 1 << ',' << fmt(t.state[0]) << ',' << fmt(t.state[1]) << ','
            << fmt(t.state[2]) << ',' << fmt(t.state[3]) << '\n';
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows, bool timing) {
  std::vector<ResultRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ResultRow& a, const ResultRow& b) { return std::tie(a.run, a.n) < std::tie(b.run, b.n); });
  auto out = open_out(path);
  out << "run,n,ospa,card_est,card_true,step_ms\n";
  for (const auto& r : sorted)
    out << r.run << ',' << r.n << ',' << fmt(r.ospa) << ',' << r.card_est << ',' << r.card_true << ','
        << fmt(timing ? r.step_ms : 0.0) << '\n';
}

void write_mospa_csv(const std::string& path, const std::vector<MospaRow>& rows) {
  auto out = open_out(path);
  out << "n,mospa,mean_card_est,mean_card_true\n";
  for (const auto& r : rows)
    out << r.n << ',' << fmt(r.mospa) << ',' << fmt(r.mean_card_est) << ',' << fmt(r.mean_card_true) << '\n';
}

std::vector<SimulatedRun> read_runs_csv(const std::string& frames_path, const std::string& truth_path,
                                        const ScenarioConfig& scenario) {
  std::vector<SimulatedRun> runs;
  auto ensure_run = [&](std::size_t r) {
    while (runs.size() <= r) {
      SimulatedRun run;
      run.frames.assign(scenario.num_steps, MeasurementFrame(scenario.num_sensors));
      run.truth.steps.resize(scenario.num_steps);
      runs.push_back(std::move(run));
    }
    return &runs[r];
  };
  auto check_step = [&](std::size_t n) {
    if (n < 1 || n > scenario.num_steps)
      throw DataMismatch("step " + std::to_string(n) + " lies outside 1.." + std::to_string(scenario.num_steps));
  };

  read_csv(frames_path, "run,n,s,range_m,bearing_deg", 5, [&](const std::vector<std::string>& c) {
    const std::size_t n = std::stoul(c[1]);
    const std::size_t s = std::stoul(c[2]);
    check_step(n);
    if (s < 1 || s > scenario.num_sensors)
      throw DataMismatch("sensor " + std::to_string(s) + " lies outside 1.." + std::to_string(scenario.num_sensors));
    auto& zs = ensure_run(std::stoul(c[0]))->frames[n - 1][s - 1];
    if (c[3].empty() && c[4].empty()) return;
    zs.push_back({std::stod(c[3]), std::stod(c[4])});
  });
  read_csv(truth_path, "run,n,target,p1,p2,v1,v2", 7, [&](const std::vector<std::string>& c) {
    const std::size_t n = std::stoul(c[1]);
    const std::size_t target = std::stoul(c[2]);
    check_step(n);
    if (target < 1) throw DataMismatch("target ids start at 1");
    TargetState x;
    x << std::stod(c[3]), std::stod(c[4]), std::stod(c[5]), std::stod(c[6]);
    ensure_run(std::stoul(c[0]))->truth.steps[n - 1].push_back({target - 1, x});
  });
  return runs;
}

// ---- benchmarks ----

BenchAxis parse_bench_axis(const std::string& name) {
  if (name == "sensors") return BenchAxis::kSensors;
  if (name == "clutter") return BenchAxis::kClutter;
  if (name == "targets") return BenchAxis::kTargets;
  throw std::invalid_argument("unknown benchmark axis '" + name + "' (sensors, clutter or targets)");
}

std::vector<double> default_bench_values(BenchAxis axis) {
  std::vector<double> v;
  switch (axis) {
    case BenchAxis::kSensors:
      for (int s = 2; s <= 20; s += 2) v.push_back(s);
      break;
    case BenchAxis::kClutter:
      for (int mu = 1; mu <= 90; mu += 11) v.push_back(mu);
      break;
    case BenchAxis::kTargets:
      for (int t = 2; t <= 20; t += 2) v.push_back(t);
      break;
  }
  return v;
}

std::vector<BenchRow> run_benchmark(const RunConfig& base, BenchAxis axis, const std::vector<double>& values,
                                    std::size_t steps) {
  // The first steps are dominated by bootstrapping births and are not timed.
  constexpr std::size_t kWarmup = 5;
  if (steps <= kWarmup) throw std::invalid_argument("benchmark needs more than 5 steps");

  struct Case {
    SimulatedRun data;
    std::unique_ptr<Tracker> tracker;
    std::vector<double> times;
  };
  std::vector<Case> cases;
  for (double value : values) {
    RunConfig config = base;
    ScenarioConfig& sc = config.scenario;
    sc.num_steps = steps;
    switch (axis) {
      case BenchAxis::kSensors:
        sc.num_sensors = static_cast<std::size_t>(value);
        break;
      case BenchAxis::kClutter:
        sc.clutter_mean = value;
        break;
      case BenchAxis::kTargets:
        sc.num_targets = static_cast<std::size_t>(value);
        config.tracker.num_targets = sc.num_targets + 3;
        break;
    }
    sc.birth_times.assign(sc.num_targets, 1);
    config.runs = 1;
    config.validate();

    const ScenarioConfig run_sc = scenario_for_run(config);
    Case c;
    c.data = simulate_run(run_sc, 0);
    c.tracker = std::make_unique<Tracker>(tracker_for_run(config, 0), run_sc.motion(), make_sensors(run_sc));
    cases.push_back(std::move(c));
  }

  // All trackers advance in lockstep so that slow drifts in machine speed
  // affect every axis value alike.
  for (std::size_t n = 1; n <= steps; ++n)
    for (Case& c : cases) {
      const TrackRecord record = c.tracker->step(c.data.frames[n - 1]);
      if (n > kWarmup) c.times.push_back(record.step_ms);
    }

  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::vector<double>& times = cases[i].times;
    BenchRow row;
    row.value = values[i];
    row.steps = times.size();
    row.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    row.median_ms = times[times.size() / 2];
    rows.push_back(row);
  }
  return rows;
}

FitResult polynomial_fit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  if (x.size() != y.size() || x.size() < static_cast<std::size_t>(degree + 1))
    throw std::invalid_argument("not enough points for the requested fit");
  const auto rows = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(rows, degree + 1);
  Eigen::VectorXd target(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int d = 0; d <= degree; ++d) design(i, d) = std::pow(x[static_cast<std::size_t>(i)], d);
    target[i] = y[static_cast<std::size_t>(i)];
  }
  FitResult fit;
  fit.coefficients = design.colPivHouseholderQr().solve(target);
  fit.sse = (design * fit.coefficients - target).squaredNorm();
  const double sst = (target.array() - target.mean()).square().sum();
  fit.r_squared = sst > 0.0 ? 1.0 - fit.sse / sst : 1.0;
  return fit;
}

// ---- association oracle ----

AssocOracleReport run_association_oracle(std::size_t instances, std::size_t max_targets,
                                         std::size_t max_measurements, std::size_t single_target,
                                         std::uint64_t seed) {
  if (instances == 0 || max_targets == 0 || max_measurements == 0)
    throw std::invalid_argument("oracle needs at least one instance, target and measurement");
  Rng rng = make_rng(seed, Stream::kOracle, {instances, max_targets, max_measurements});
  std::uniform_real_distribution<double> entry(1e-3, 1.0);
  const AssociationOptions options{1000, 1e-6};

  auto random_beta = [&](std::size_t k, std::size_t m) {
    BetaTable beta;
    beta.values.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m + 1));
    for (Eigen::Index i = 0; i < beta.values.size(); ++i) beta.values.data()[i] = entry(rng);
    return beta;
  };

  AssocOracleReport report;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, max_targets)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, max_measurements)(rng);
    const BetaTable beta = random_beta(k, m);
    const AssociationResult bp = run_association(beta, options);
    if (!(bp.state.residual < options.tolerance)) ++report.unconverged;
    const Eigen::MatrixXd diff = association_marginals(beta, bp.eta) - exact_association_marginals(beta);
    report.errors.push_back(diff.cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 0; i < single_target; ++i) {
    const std::size_t m = 1 + i % 6;
    const BetaTable beta = random_beta(1, m);
    const Eigen::MatrixXd exact = exact_association_marginals(beta);
    const Eigen::MatrixXd approx = association_marginals(beta, iterate_association(beta, options));
    report.max_single_target_rel_error = std::max(
        report.max_single_target_rel_error, ((approx - exact).array() / exact.array()).abs().maxCoeff());
  }

  std::vector<double> sorted = report.errors;
  std::sort(sorted.begin(), sorted.end());
  report.max_error = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  report.median_error = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return report;
}

// ---- single-target reduction ----

std::vector<std::vector<double>> scripted_bernoulli_measurements(const BernoulliScenario& scenario,
                                                                 std::size_t steps, std::size_t appear,
                                                                 std::size_t vanish, double start,
                                                                 std::uint64_t seed) {
  scenario.validate();
  Rng rng = make_rng(seed, Stream::kOracle, {steps, appear, vanish});
  std::normal_distribution<double> std_normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<int> clutter_count(scenario.clutter_mean);

  std::vector<std::vector<double>> out(steps);
  double x = start;
  for (std::size_t n = 1; n <= steps; ++n) {
    auto& zs = out[n - 1];
    if (n >= appear && n <= vanish) {
      if (n > appear) x += scenario.walk_std * std_normal(rng);
      if (unit(rng) < scenario.detection_probability) {
        const double z = x + scenario.noise_std * std_normal(rng);
        if (z >= scenario.clutter_lower && z <= scenario.clutter_upper) zs.push_back(z);
      }
    }
    for (int c = clutter_count(rng); c > 0; --c)
      zs.push_back(scenario.clutter_lower + (scenario.clutter_upper - scenario.clutter_lower) * unit(rng));
    std::shuffle(zs.begin(), zs.end(), rng);
  }
  return out;
}

BernoulliTrack track_bernoulli(const BernoulliScenario& scenario,
                                    const std::vector<std::vector<double>>& measurements,
                                    std::size_t num_particles, std::size_t num_birth_particles,
                                    std::uint64_t seed) {
  scenario.validate();
  TrackerConfig config;
  config.num_targets = 1;
  config.num_particles = num_particles;
  config.num_birth_particles = num_birth_particles;
  config.mean_births = scenario.mean_births;
  config.survival_probability = scenario.survival_probability;
  config.reliability_threshold = scenario.reliability_threshold;
  config.birth_velocity_std = 0.0;
  config.birth_region.lower = Eigen::Vector2d(scenario.birth_lower, 0.0);
  config.birth_region.upper = Eigen::Vector2d(scenario.birth_upper, 0.0);
  config.seed = seed;

  auto sensor = std::make_shared<LinearPositionSensor>(scenario.detection_probability, scenario.clutter_mean,
                                                       scenario.noise_std, scenario.clutter_lower,
                                                       scenario.clutter_upper);
  Tracker tracker(config, MotionModel::random_walk(scenario.walk_std), {sensor});

  BernoulliTrack out;
  for (const auto& zs : measurements) {
    MeasurementFrame frame(1);
    for (double z : zs) frame[0].push_back({z, 0.0});
    out.existence.push_back(tracker.step(frame).targets[0].existence);
    out.reliable.push_back(!tracker.last_plan().reliable.empty());
  }
  return out;
}

}  // namespace bpmtt
