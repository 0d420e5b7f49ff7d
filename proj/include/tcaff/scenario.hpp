/**
 * @file scenario.hpp
 * @brief Scenario files: named worlds, trajectories, rates, and parameter
 *        sets for the experiment harness.
 *
 * A scenario is a JSON document:
 *
 *   {
 *     "name": str, "duration_s": f64,
 *     "map_rate_hz": f64, "share_rate_hz": f64, "seed": u64,
 *     "world":  {"extent": [x,y], "n_objects": int, "wh_range": [min,max],
 *                "alias_copies": int, "alias_size": int, "alias_radius": f64,
 *                "alias_centers": [[x,y],...], "min_separation": f64},
 *     "drift":  {"trans_rw_sigma": f64, "rot_rw_sigma": f64,
 *                "trans_bias": f64, "rot_bias": f64},
 *     "sensor": {"fov_radius": f64, "fov_half_angle": f64,
 *                "detection_prob": f64, "centroid_sigma": f64, "wh_sigma": f64},
 *     "robots": [{"id": str, "waypoints": [[t,x,y],...], "loop": bool}, ...],
 *     "params": {"kappa", "epsilon", "sigma", "wh_tol", "n_solutions",
 *                "min_associations", "p_nm", "nu", "tau", "window",
 *                "max_branches", "max_no_meas_steps",
 *                "q_diag": [3], "r_diag": [3]}
 *   }
 *
 * Every field has a default; unknown fields are rejected to catch typos.
 * Command-line overrides use dotted paths ("sensor.centroid_sigma=0.1").
 */

#ifndef TCAFF_SCENARIO_HPP
#define TCAFF_SCENARIO_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcaff/clipper.hpp"
#include "tcaff/filter.hpp"
#include "tcaff/object_map.hpp"
#include "tcaff/registration.hpp"
#include "tcaff/sim.hpp"

namespace tcaff {

struct RobotSpec {
  std::string id;
  Trajectory trajectory;
  std::optional<SensorConfig> sensor;  // overrides the scenario-wide sensor
};

struct Scenario {
  std::string name;
  std::string description;
  double duration_s{120.0};
  double map_rate_hz{10.0};
  double share_rate_hz{1.0};
  std::uint64_t seed{1};

  WorldConfig world;
  DriftConfig drift;
  SensorConfig sensor;
  std::vector<RobotSpec> robots;

  MapParams map_params;
  ClipperParams clipper_params;
  MnoParams mno_params;
  FilterParams filter_params;
  KalmanModel kalman_model;
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out)
{
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_vec2(const nlohmann::json& j, const char* key, Eigen::Vector2d& out)
{
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) {
    throw std::runtime_error(std::string("scenario: \"") + key + "\" must be a 2-array");
  }
  out = {a[0].get<double>(), a[1].get<double>()};
}

inline void read_diag3(const nlohmann::json& j, const char* key, Eigen::Matrix3d& out)
{
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw std::runtime_error(std::string("scenario: \"") + key + "\" must be a 3-array");
  }
  out = Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>()).asDiagonal();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where)
{
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) { ok = true; break; }
    }
    if (!ok) throw std::runtime_error("scenario: unknown field \"" + it.key() + "\" in " + where);
  }
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j)
{
  using detail::read_field;
  Scenario sc;
  detail::reject_unknown(j, {"name", "description", "duration_s", "map_rate_hz", "share_rate_hz",
                             "seed", "world", "drift", "sensor", "robots", "params"},
                         "scenario");
  read_field(j, "name", sc.name);
  read_field(j, "description", sc.description);
  read_field(j, "duration_s", sc.duration_s);
  read_field(j, "map_rate_hz", sc.map_rate_hz);
  read_field(j, "share_rate_hz", sc.share_rate_hz);
  read_field(j, "seed", sc.seed);
  if (sc.duration_s <= 0.0 || sc.map_rate_hz <= 0.0 || sc.share_rate_hz <= 0.0) {
    throw std::runtime_error("scenario: duration and rates must be positive");
  }
  if (sc.share_rate_hz > sc.map_rate_hz) {
    throw std::runtime_error("scenario: share_rate_hz must not exceed map_rate_hz");
  }

  if (j.contains("world")) {
    const auto& w = j.at("world");
    detail::reject_unknown(w, {"extent", "n_objects", "wh_range", "alias_copies", "alias_size",
                               "alias_radius", "alias_centers", "min_separation"},
                           "world");
    detail::read_vec2(w, "extent", sc.world.extent);
    read_field(w, "n_objects", sc.world.n_objects);
    if (w.contains("wh_range")) {
      const auto& r = w.at("wh_range");
      if (!r.is_array() || r.size() != 2) throw std::runtime_error("scenario: wh_range must be a 2-array");
      sc.world.wh_min = r[0].get<double>();
      sc.world.wh_max = r[1].get<double>();
    }
    read_field(w, "alias_copies", sc.world.alias_copies);
    read_field(w, "alias_size", sc.world.alias_size);
    read_field(w, "alias_radius", sc.world.alias_radius);
    read_field(w, "min_separation", sc.world.min_separation);
    if (w.contains("alias_centers")) {
      for (const auto& c : w.at("alias_centers")) {
        if (!c.is_array() || c.size() != 2) {
          throw std::runtime_error("scenario: alias_centers entries must be 2-arrays");
        }
        sc.world.alias_centers.push_back({c[0].get<double>(), c[1].get<double>()});
      }
    }
  }

  if (j.contains("drift")) {
    const auto& d = j.at("drift");
    detail::reject_unknown(d, {"trans_rw_sigma", "rot_rw_sigma", "trans_bias", "rot_bias"}, "drift");
    read_field(d, "trans_rw_sigma", sc.drift.trans_rw_sigma);
    read_field(d, "rot_rw_sigma", sc.drift.rot_rw_sigma);
    read_field(d, "trans_bias", sc.drift.trans_bias);
    read_field(d, "rot_bias", sc.drift.rot_bias);
  }

  const auto read_sensor = [](const nlohmann::json& s, SensorConfig& out) {
    detail::reject_unknown(s, {"fov_radius", "fov_half_angle", "detection_prob",
                               "centroid_sigma", "wh_sigma"},
                           "sensor");
    read_field(s, "fov_radius", out.fov_radius);
    read_field(s, "fov_half_angle", out.fov_half_angle);
    read_field(s, "detection_prob", out.detection_prob);
    read_field(s, "centroid_sigma", out.centroid_sigma);
    read_field(s, "wh_sigma", out.wh_sigma);
  };
  if (j.contains("sensor")) read_sensor(j.at("sensor"), sc.sensor);

  if (!j.contains("robots") || !j.at("robots").is_array() || j.at("robots").size() < 2) {
    throw std::runtime_error("scenario: need at least two robots");
  }
  for (const auto& r : j.at("robots")) {
    detail::reject_unknown(r, {"id", "waypoints", "loop", "sensor"}, "robots[]");
    RobotSpec spec;
    if (r.contains("sensor")) {
      SensorConfig s = sc.sensor;
      read_sensor(r.at("sensor"), s);
      spec.sensor = s;
    }
    if (!r.contains("id") || !r.at("id").is_string()) {
      throw std::runtime_error("scenario: robot missing \"id\"");
    }
    spec.id = r.at("id").get<std::string>();
    if (!r.contains("waypoints") || !r.at("waypoints").is_array() || r.at("waypoints").empty()) {
      throw std::runtime_error("scenario: robot \"" + spec.id + "\" needs waypoints");
    }
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& wp : r.at("waypoints")) {
      if (!wp.is_array() || wp.size() != 3) {
        throw std::runtime_error("scenario: waypoints must be [t, x, y] triples");
      }
      TimedWaypoint tw;
      tw.t = wp[0].get<double>();
      tw.p = {wp[1].get<double>(), wp[2].get<double>()};
      if (tw.t <= prev_t) {
        throw std::runtime_error("scenario: waypoint times must strictly increase (robot \"" +
                                 spec.id + "\")");
      }
      prev_t = tw.t;
      spec.trajectory.waypoints.push_back(tw);
    }
    if (r.contains("loop")) spec.trajectory.loop = r.at("loop").get<bool>();
    for (const auto& other : sc.robots) {
      if (other.id == spec.id) throw std::runtime_error("scenario: duplicate robot id \"" + spec.id + "\"");
    }
    sc.robots.push_back(std::move(spec));
  }
  if (sc.robots.size() > 4) throw std::runtime_error("scenario: at most four robots are supported");

  if (j.contains("params")) {
    const auto& p = j.at("params");
    detail::reject_unknown(p, {"kappa", "epsilon", "sigma", "wh_tol", "max_solver_iters",
                               "solver_tol", "exhaustive_limit", "n_solutions", "min_associations",
                               "p_nm", "nu", "tau", "window", "max_branches", "max_no_meas_steps",
                               "q_diag", "r_diag"},
                           "params");
    read_field(p, "kappa", sc.map_params.kappa);
    read_field(p, "epsilon", sc.clipper_params.epsilon);
    read_field(p, "sigma", sc.clipper_params.sigma);
    read_field(p, "wh_tol", sc.clipper_params.wh_tol);
    read_field(p, "max_solver_iters", sc.clipper_params.max_solver_iters);
    read_field(p, "solver_tol", sc.clipper_params.solver_tol);
    read_field(p, "exhaustive_limit", sc.clipper_params.exhaustive_limit);
    read_field(p, "n_solutions", sc.mno_params.n_solutions);
    read_field(p, "min_associations", sc.mno_params.min_associations);
    read_field(p, "p_nm", sc.filter_params.p_nm);
    read_field(p, "nu", sc.filter_params.nu);
    read_field(p, "tau", sc.filter_params.tau);
    read_field(p, "window", sc.filter_params.window);
    read_field(p, "max_branches", sc.filter_params.max_branches);
    read_field(p, "max_no_meas_steps", sc.filter_params.max_no_meas_steps);
    detail::read_diag3(p, "q_diag", sc.kalman_model.Q);
    detail::read_diag3(p, "r_diag", sc.kalman_model.R);
  }
  return sc;
}

/// Applies one "dotted.path=value" override onto the raw scenario JSON.
/// Values parse as JSON when possible (numbers, bools, arrays) and fall
/// back to strings.
inline void apply_override(nlohmann::json& j, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::runtime_error("override must look like key.path=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;  // plain string
  }

  nlohmann::json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw std::runtime_error("override has empty path segment: " + assignment);
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

inline Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {})
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("scenario " + path + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return scenario_from_json(j);
}

}  // namespace tcaff

#endif  // TCAFF_SCENARIO_HPP
