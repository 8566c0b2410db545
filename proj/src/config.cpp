#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bpmtt/experiment.hpp"

namespace bpmtt {

namespace {

using Setter = std::function<void(const YAML::Node&)>;
using Section = std::map<std::string, Setter>;

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("'" + key + "' must be a scalar", line_of(node));
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError("'" + key + "' has an invalid value '" + node.Scalar() + "'", line_of(node));
  }
}

std::size_t count(const YAML::Node& node, const std::string& key) {
  const auto v = scalar<long long>(node, key);
  if (v < 0) throw ConfigError("'" + key + "' must be >= 0", line_of(node));
  return static_cast<std::size_t>(v);
}

Eigen::Vector2d pair(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() != 2)
    throw ConfigError("'" + key + "' must be a list of two numbers", line_of(node));
  return {scalar<double>(node[0], key), scalar<double>(node[1], key)};
}

void apply(const YAML::Node& section, const std::string& name, const Section& setters) {
  if (section.IsNull()) return;
  if (!section.IsMap()) throw ConfigError("section '" + name + "' must be a mapping", line_of(section));
  for (const auto& entry : section) {
    const std::string key = entry.first.as<std::string>();
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("unknown key '" + name + "." + key + "'", line_of(entry.first));
    it->second(entry.second);
  }
}

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  tracker.validate();
  ospa.validate();
  if (runs < 1) throw std::invalid_argument("number of runs must be >= 1");
  if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
  if (scenario.clutter_mean <= 0.0) throw std::invalid_argument("clutter mean must be > 0 for tracking");
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }

  RunConfig c;
  ScenarioConfig& sc = c.scenario;
  TrackerConfig& tc = c.tracker;
  bool births_given = false;
  bool region_given = false;

  const Section scenario{
      {"roi_halfwidth_m", [&](const YAML::Node& n) { sc.roi_halfwidth = scalar<double>(n, "roi_halfwidth_m"); }},
      {"num_targets", [&](const YAML::Node& n) { sc.num_targets = count(n, "num_targets"); }},
      {"birth_times_steps",
       [&](const YAML::Node& n) {
         if (!n.IsSequence()) throw ConfigError("'birth_times_steps' must be a list", line_of(n));
         sc.birth_times.clear();
         for (const auto& b : n) sc.birth_times.push_back(count(b, "birth_times_steps"));
         births_given = true;
       }},
      {"initial_radius_m", [&](const YAML::Node& n) { sc.initial_radius = scalar<double>(n, "initial_radius_m"); }},
      {"initial_speed_m_per_s",
       [&](const YAML::Node& n) { sc.initial_speed = scalar<double>(n, "initial_speed_m_per_s"); }},
      {"num_steps", [&](const YAML::Node& n) { sc.num_steps = count(n, "num_steps"); }},
      {"num_sensors", [&](const YAML::Node& n) { sc.num_sensors = count(n, "num_sensors"); }},
      {"sensor_radius_m", [&](const YAML::Node& n) { sc.sensor_radius = scalar<double>(n, "sensor_radius_m"); }},
      {"detection_probability",
       [&](const YAML::Node& n) { sc.detection_probability = scalar<double>(n, "detection_probability"); }},
      {"clutter_mean", [&](const YAML::Node& n) { sc.clutter_mean = scalar<double>(n, "clutter_mean"); }},
      {"range_variance_m2", [&](const YAML::Node& n) { sc.range_variance = scalar<double>(n, "range_variance_m2"); }},
      {"bearing_variance_deg2",
       [&](const YAML::Node& n) { sc.bearing_variance = scalar<double>(n, "bearing_variance_deg2"); }},
      {"max_range_m", [&](const YAML::Node& n) { sc.max_range = scalar<double>(n, "max_range_m"); }},
      {"sigma_u_m_per_s2", [&](const YAML::Node& n) { sc.sigma_u = scalar<double>(n, "sigma_u_m_per_s2"); }},
      {"period_s", [&](const YAML::Node& n) { sc.period = scalar<double>(n, "period_s"); }},
  };
  const Section tracker{
      {"num_potential_targets", [&](const YAML::Node& n) { tc.num_targets = count(n, "num_potential_targets"); }},
      {"num_particles", [&](const YAML::Node& n) { tc.num_particles = count(n, "num_particles"); }},
      {"num_birth_particles",
       [&](const YAML::Node& n) { tc.num_birth_particles = count(n, "num_birth_particles"); }},
      {"bp_max_iterations",
       [&](const YAML::Node& n) {
         tc.association.max_iterations = static_cast<int>(count(n, "bp_max_iterations"));
       }},
      {"bp_tolerance", [&](const YAML::Node& n) { tc.association.tolerance = scalar<double>(n, "bp_tolerance"); }},
      {"detection_threshold",
       [&](const YAML::Node& n) { tc.detection_threshold = scalar<double>(n, "detection_threshold"); }},
      {"reliability_threshold",
       [&](const YAML::Node& n) { tc.reliability_threshold = scalar<double>(n, "reliability_threshold"); }},
      {"mean_births", [&](const YAML::Node& n) { tc.mean_births = scalar<double>(n, "mean_births"); }},
      {"survival_probability",
       [&](const YAML::Node& n) { tc.survival_probability = scalar<double>(n, "survival_probability"); }},
      {"birth_velocity_std_m_per_s",
       [&](const YAML::Node& n) { tc.birth_velocity_std = scalar<double>(n, "birth_velocity_std_m_per_s"); }},
      {"birth_region_lower_m",
       [&](const YAML::Node& n) {
         tc.birth_region.lower = pair(n, "birth_region_lower_m");
         region_given = true;
       }},
      {"birth_region_upper_m",
       [&](const YAML::Node& n) {
         tc.birth_region.upper = pair(n, "birth_region_upper_m");
         region_given = true;
       }},
  };
  const Section evaluation{
      {"ospa_cutoff_m", [&](const YAML::Node& n) { c.ospa.cutoff = scalar<double>(n, "ospa_cutoff_m"); }},
      {"ospa_order", [&](const YAML::Node& n) { c.ospa.order = scalar<double>(n, "ospa_order"); }},
  };
  const Section experiment{
      {"runs", [&](const YAML::Node& n) { c.runs = count(n, "runs"); }},
      {"seed", [&](const YAML::Node& n) { c.seed = scalar<std::uint64_t>(n, "seed"); }},
      {"threads", [&](const YAML::Node& n) { c.threads = count(n, "threads"); }},
      {"output_dir", [&](const YAML::Node& n) { c.output_dir = scalar<std::string>(n, "output_dir"); }},
  };
  const std::map<std::string, const Section*> sections{
      {"scenario", &scenario}, {"tracker", &tracker}, {"evaluation", &evaluation}, {"experiment", &experiment}};

  if (!root.IsNull()) {
    if (!root.IsMap()) throw ConfigError("configuration must be a mapping of sections", line_of(root));
    for (const auto& entry : root) {
      const std::string name = entry.first.as<std::string>();
      const auto it = sections.find(name);
      if (it == sections.end()) throw ConfigError("unknown section '" + name + "'", line_of(entry.first));
      apply(entry.second, name, *it->second);
    }
  }

  // Staggered default births when the target count changed but no schedule was given.
  if (!births_given && sc.birth_times.size() != sc.num_targets) {
    sc.birth_times.clear();
    for (std::size_t i = 0; i < sc.num_targets; ++i) sc.birth_times.push_back(std::min(5 * (i + 1), sc.num_steps));
  }
  if (!region_given) {
    tc.birth_region.lower = Eigen::Vector2d::Constant(-sc.roi_halfwidth);
    tc.birth_region.upper = Eigen::Vector2d::Constant(sc.roi_halfwidth);
  }
  sc.seed = c.seed;
  tc.seed = c.seed;
  tc.threads = c.threads;

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'", 0);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace bpmtt
