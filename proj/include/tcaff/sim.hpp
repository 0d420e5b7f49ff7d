/**
 * @file sim.hpp
 * @brief Synthetic worlds, waypoint trajectories, odometry drift, and the
 *        object observation model used by the experiment harness.
 *
 * All randomness flows through counter-based streams keyed on
 * (seed, robot, tick, object), so every output is a pure function of the
 * configuration and seed regardless of evaluation order.
 */

#ifndef TCAFF_SIM_HPP
#define TCAFF_SIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tcaff/geometry.hpp"
#include "tcaff/object_map.hpp"
#include "tcaff/rng.hpp"

namespace tcaff {

namespace stream {
// Stream tags keeping the random substreams of one run disjoint.
constexpr std::uint64_t kWorld = 101;
constexpr std::uint64_t kOdometry = 202;
constexpr std::uint64_t kSensor = 303;
}  // namespace stream

struct WorldConfig {
  Eigen::Vector2d extent{10.0, 10.0};     // objects placed in [0,extent.x] x [0,extent.y]
  int n_objects{12};                      // scattered objects, on top of any alias copies
  double wh_min{0.2};
  double wh_max{1.2};
  int alias_copies{0};                    // number of identical constellations
  int alias_size{0};                      // objects per constellation
  double alias_radius{1.5};               // local spread of a constellation
  std::vector<Eigen::Vector2d> alias_centers;  // optional fixed placement
  double min_separation{0.6};             // rejection radius between objects
  std::uint64_t seed{0};
};

struct DriftConfig {
  double trans_rw_sigma{0.0};  // m per sqrt(step)
  double rot_rw_sigma{0.0};    // rad per sqrt(step)
  double trans_bias{0.0};      // m per step, along the body x axis
  double rot_bias{0.0};        // rad per step
};

struct SensorConfig {
  double fov_radius{6.0};          // m
  double fov_half_angle{M_PI};     // rad; pi means omnidirectional
  double detection_prob{1.0};
  double centroid_sigma{0.0};      // m, per axis
  double wh_sigma{0.0};            // m
};

/// Ground-truth trajectory of one robot: poses in the world frame and the
/// drifted odometry estimate of the same motion. odom_poses[0] is identity
/// (the odometry frame is anchored at the start pose).
struct RobotTruth {
  std::vector<Pose2> world_poses;
  std::vector<Pose2> odom_poses;
};

/**
 * Scatters objects in the extent, optionally planting alias_copies exact
 * translated copies of one constellation first. Deterministic per seed.
 */
inline std::vector<ObjectLandmark> generate_world(const WorldConfig& cfg)
{
  CounterRng rng(cfg.seed, {stream::kWorld});
  std::vector<ObjectLandmark> world;
  std::uint64_t next_id = 0;

  auto far_enough = [&](const Eigen::Vector3d& p) {
    for (const auto& o : world) {
      if ((o.centroid.head<2>() - p.head<2>()).norm() < cfg.min_separation) return false;
    }
    return true;
  };

  if (cfg.alias_copies > 0 && cfg.alias_size > 0) {
    struct Proto {
      Eigen::Vector2d offset;
      double w, h;
    };
    std::vector<Proto> proto(cfg.alias_size);
    for (std::size_t k = 0; k < proto.size(); ++k) {
      auto& p = proto[k];
      for (int attempt = 0; attempt < 200; ++attempt) {
        p.offset = {rng.uniform(-cfg.alias_radius, cfg.alias_radius),
                    rng.uniform(-cfg.alias_radius, cfg.alias_radius)};
        bool clear = true;
        for (std::size_t o = 0; o < k; ++o) {
          if ((proto[o].offset - p.offset).norm() < cfg.min_separation) clear = false;
        }
        if (clear) break;
      }
      p.w = rng.uniform(cfg.wh_min, cfg.wh_max);
      p.h = rng.uniform(cfg.wh_min, cfg.wh_max);
    }
    for (int c = 0; c < cfg.alias_copies; ++c) {
      Eigen::Vector2d center;
      if (c < static_cast<int>(cfg.alias_centers.size())) {
        center = cfg.alias_centers[c];
      } else {
        // spread the copies along the diagonal, off the walls
        const double f = (c + 1.0) / (cfg.alias_copies + 1.0);
        center = {cfg.extent.x() * f, cfg.extent.y() * f};
      }
      for (const auto& p : proto) {
        ObjectLandmark o;
        o.id = next_id++;
        o.centroid = {center.x() + p.offset.x(), center.y() + p.offset.y(), p.h * 0.5};
        o.width = p.w;
        o.height = p.h;
        world.push_back(o);
      }
    }
  }

  for (int i = 0; i < cfg.n_objects; ++i) {
    ObjectLandmark o;
    o.id = next_id++;
    o.width = rng.uniform(cfg.wh_min, cfg.wh_max);
    o.height = rng.uniform(cfg.wh_min, cfg.wh_max);
    for (int attempt = 0; attempt < 200; ++attempt) {
      o.centroid = {rng.uniform(0.0, cfg.extent.x()), rng.uniform(0.0, cfg.extent.y()),
                    o.height * 0.5};
      if (far_enough(o.centroid)) break;
    }
    world.push_back(o);
  }
  return world;
}

/// One scheduled position on a robot's scripted path.
struct TimedWaypoint {
  double t{0.0};  // seconds
  Eigen::Vector2d p{Eigen::Vector2d::Zero()};
};

/// Scripted path: linear interpolation between timed waypoints, so dwell
/// phases are expressed by repeating a position at a later time. Heading
/// follows the motion direction and is held through dwells. With loop set,
/// time wraps at the last waypoint.
struct Trajectory {
  std::vector<TimedWaypoint> waypoints;  // strictly increasing t
  bool loop{false};

  Pose2 pose_at(double t) const
  {
    if (waypoints.empty()) throw std::invalid_argument("Trajectory: no waypoints");
    if (waypoints.size() == 1) {
      return {waypoints[0].p.x(), waypoints[0].p.y(), 0.0};
    }
    const double t_end = waypoints.back().t;
    if (loop && t_end > waypoints.front().t) {
      const double span = t_end - waypoints.front().t;
      t = waypoints.front().t + std::fmod(std::max(0.0, t - waypoints.front().t), span);
    }
    t = std::clamp(t, waypoints.front().t, t_end);

    std::size_t s = 0;
    while (s + 2 < waypoints.size() && t > waypoints[s + 1].t) ++s;
    const auto& a = waypoints[s];
    const auto& b = waypoints[s + 1];
    const double dt = b.t - a.t;
    const double f = dt > 0.0 ? std::clamp((t - a.t) / dt, 0.0, 1.0) : 1.0;
    const Eigen::Vector2d p = a.p + f * (b.p - a.p);
    return {p.x(), p.y(), heading_at(s)};
  }

 private:
  // Direction of segment s; dwell segments inherit the nearest moving
  // segment (looking backward first).
  double heading_at(std::size_t s) const
  {
    for (std::size_t i = s + 1; i-- > 0;) {
      const Eigen::Vector2d seg = waypoints[i + 1].p - waypoints[i].p;
      if (seg.norm() > 1e-9) return std::atan2(seg.y(), seg.x());
    }
    for (std::size_t i = s + 1; i + 1 < waypoints.size(); ++i) {
      const Eigen::Vector2d seg = waypoints[i + 1].p - waypoints[i].p;
      if (seg.norm() > 1e-9) return std::atan2(seg.y(), seg.x());
    }
    return 0.0;
  }
};

/**
 * Corrupts the true relative motions with per-step bias and random-walk
 * noise. With all drift parameters zero the odometry equals the true
 * motion expressed in the start frame.
 */
inline RobotTruth simulate_odometry(const std::vector<Pose2>& truth_world,
                                    const DriftConfig& drift, std::uint64_t seed)
{
  RobotTruth rt;
  rt.world_poses = truth_world;
  rt.odom_poses.reserve(truth_world.size());
  if (truth_world.empty()) return rt;

  rt.odom_poses.push_back(Pose2::identity());
  for (std::size_t k = 1; k < truth_world.size(); ++k) {
    const Pose2 delta = compose(inverse(truth_world[k - 1]), truth_world[k]);
    CounterRng rng(seed, {stream::kOdometry, k});
    const Pose2 noise(drift.trans_bias + drift.trans_rw_sigma * rng.normal(),
                      drift.trans_rw_sigma * rng.normal(),
                      drift.rot_bias + drift.rot_rw_sigma * rng.normal());
    rt.odom_poses.push_back(compose(rt.odom_poses.back(), compose(delta, noise)));
  }
  return rt;
}

/**
 * Detects world objects inside the field of view with probability
 * detection_prob and reports them as landmarks in the robot's odometry
 * frame, through the drifted odometry pose, with Gaussian centroid and
 * width/height noise. last_seen is stamped with `now`.
 */
inline std::vector<ObjectLandmark> observe(const std::vector<ObjectLandmark>& world,
                                           const Pose2& robot_pose_world,
                                           const Pose2& robot_pose_odom,
                                           const SensorConfig& sensor, double now,
                                           std::uint64_t seed, std::uint64_t tick)
{
  std::vector<ObjectLandmark> out;
  const Pose2 world_to_body = inverse(robot_pose_world);
  for (const auto& obj : world) {
    const Eigen::Vector3d p_body = transform_point(world_to_body, obj.centroid);
    const double range = p_body.head<2>().norm();
    if (range > sensor.fov_radius) continue;
    const double bearing = std::atan2(p_body.y(), p_body.x());
    if (std::abs(bearing) > sensor.fov_half_angle) continue;

    CounterRng rng(seed, {stream::kSensor, tick, obj.id});
    if (!rng.bernoulli(sensor.detection_prob)) continue;

    Eigen::Vector3d noisy = p_body;
    for (int a = 0; a < 3; ++a) noisy[a] += sensor.centroid_sigma * rng.normal();

    ObjectLandmark o;
    o.id = obj.id;
    o.centroid = transform_point(robot_pose_odom, noisy);
    o.width = std::max(0.01, obj.width + sensor.wh_sigma * rng.normal());
    o.height = std::max(0.01, obj.height + sensor.wh_sigma * rng.normal());
    o.last_seen = now;
    out.push_back(o);
  }
  return out;
}

}  // namespace tcaff

#endif  // TCAFF_SIM_HPP
