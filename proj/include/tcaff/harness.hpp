/**
 * @file harness.hpp
 * @brief Experiment runner: drives mapping and map sharing at their
 *        configured rates, runs the association + filter pipeline per robot
 *        pair, and emits run.csv / metrics.json plus per-tick map dumps.
 *
 * Baseline runners (single-solution association with an acceptance
 * threshold, and the unfiltered multi-solution variant) reuse the same
 * simulation loop so comparisons see identical worlds and noise.
 */

#ifndef TCAFF_HARNESS_HPP
#define TCAFF_HARNESS_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcaff/filter.hpp"
#include "tcaff/registration.hpp"
#include "tcaff/scenario.hpp"
#include "tcaff/sim.hpp"

namespace tcaff {

/// One row of run.csv: the state of one robot pair at one sharing tick.
struct RunRecord {
  int step{0};
  double time_s{0.0};
  std::string pair;
  Pose2 gt;
  std::optional<Pose2> est;
  std::string mode;  // "exploring" | "locked" | "baseline"
  int n_meas{0};
  std::optional<double> trans_err_m;
  std::optional<double> head_err_deg;
  bool overlap{false};  // do the robots' recent views share a true object
};

struct Metrics {
  std::optional<double> mean_trans_err_m;
  std::optional<double> std_trans_err_m;
  std::optional<double> mean_head_err_deg;
  std::optional<double> std_head_err_deg;
  double availability{0.0};
  int false_accepts{0};
  std::optional<double> time_to_first_lock_s;
  int n_records{0};
};

struct TimingStats {
  double mean_ms{0.0};
  double std_ms{0.0};
  int n{0};
};

struct TimingReport {
  TimingStats mapping;    // one robot's observe+upsert tick
  TimingStats mno;        // one association call per pair
  TimingStats tcaff_step; // one filter step per pair
};

namespace detail {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag)
{
  return splitmix64(seed ^ splitmix64(tag));
}

class TimingCollector {
 public:
  void add(double ms) { samples_.push_back(ms); }

  TimingStats stats() const
  {
    TimingStats s;
    s.n = static_cast<int>(samples_.size());
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : samples_) sum += v;
    s.mean_ms = sum / s.n;
    double var = 0.0;
    for (double v : samples_) var += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = std::sqrt(var / s.n);
    return s;
  }

 private:
  std::vector<double> samples_;
};

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const
  {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Everything a per-pair policy needs at one sharing tick.
struct PairTick {
  int share_step;
  int map_tick;
  double now;
  int i, j;
  const ObjectMap* view_i;  // receiver's own recent view
  const ObjectMap* view_j;  // neighbor's view, decoded from the wire message
  Pose2 gt;
  bool overlap;
};

/**
 * Runs the mapping/sharing skeleton and hands every (pair, sharing tick) to
 * the visitor. When maps_dir is non-empty the shared messages are dumped as
 * maps/<robot_id>/<share_step>.json.
 */
template <typename Visitor>
inline void drive(const Scenario& sc, const std::string& maps_dir, TimingCollector& mapping_ms,
                  Visitor&& visit)
{
  const std::vector<ObjectLandmark> world = [&] {
    WorldConfig wc = sc.world;
    wc.seed = sub_seed(sc.seed, 1);
    return generate_world(wc);
  }();

  const int n_robots = static_cast<int>(sc.robots.size());
  const double dt = 1.0 / sc.map_rate_hz;
  const int n_ticks = static_cast<int>(std::llround(sc.duration_s * sc.map_rate_hz));
  const int share_every = std::max(1, static_cast<int>(std::llround(sc.map_rate_hz / sc.share_rate_hz)));

  std::vector<RobotTruth> truth(n_robots);
  for (int r = 0; r < n_robots; ++r) {
    std::vector<Pose2> world_poses;
    world_poses.reserve(n_ticks);
    for (int k = 0; k < n_ticks; ++k) world_poses.push_back(sc.robots[r].trajectory.pose_at(k * dt));
    truth[r] = simulate_odometry(world_poses, sc.drift, sub_seed(sc.seed, 100 + r));
  }

  std::vector<ObjectMap> maps(n_robots);
  for (int r = 0; r < n_robots; ++r) maps[r].robot_id = sc.robots[r].id;

  if (!maps_dir.empty()) {
    for (int r = 0; r < n_robots; ++r) {
      std::filesystem::create_directories(std::filesystem::path(maps_dir) / sc.robots[r].id);
    }
  }

  for (int k = 0; k < n_ticks; ++k) {
    const double now = k * dt;
    for (int r = 0; r < n_robots; ++r) {
      StopWatch sw;
      const SensorConfig& sensor =
          sc.robots[r].sensor ? *sc.robots[r].sensor : sc.sensor;
      const auto obs = observe(world, truth[r].world_poses[k], truth[r].odom_poses[k], sensor,
                               now, sub_seed(sc.seed, 200 + r), static_cast<std::uint64_t>(k));
      for (const auto& o : obs) maps[r] = upsert(std::move(maps[r]), o);
      mapping_ms.add(sw.ms());
    }

    if ((k + 1) % share_every != 0) continue;
    const int share_step = k / share_every;

    std::vector<ObjectMap> views(n_robots);
    std::vector<std::string> msgs(n_robots);
    for (int r = 0; r < n_robots; ++r) {
      views[r] = recent_view(maps[r], now, sc.map_params);
      msgs[r] = serialize(views[r]);
      if (!maps_dir.empty()) {
        std::ofstream out(std::filesystem::path(maps_dir) / sc.robots[r].id /
                          (std::to_string(share_step) + ".json"));
        out << msgs[r] << '\n';
      }
    }

    for (int i = 0; i < n_robots; ++i) {
      for (int j = i + 1; j < n_robots; ++j) {
        const ObjectMap remote = deserialize(msgs[j]);

        PairTick tick;
        tick.share_step = share_step;
        tick.map_tick = k;
        tick.now = now;
        tick.i = i;
        tick.j = j;
        tick.view_i = &views[i];
        tick.view_j = &remote;
        tick.gt = gt_alignment(truth[i].odom_poses[k], truth[i].world_poses[k],
                               truth[j].odom_poses[k], truth[j].world_poses[k]);
        tick.overlap = false;
        for (const auto& oi : views[i].objects) {
          if (remote.find(oi.id) != nullptr) { tick.overlap = true; break; }
        }
        visit(tick);
      }
    }
  }
}

inline RunRecord make_record(const PairTick& tick, const Scenario& sc,
                             const std::optional<Pose2>& est, const std::string& mode, int n_meas)
{
  RunRecord rec;
  rec.step = tick.share_step;
  rec.time_s = tick.now;
  rec.pair = sc.robots[tick.i].id + "-" + sc.robots[tick.j].id;
  rec.gt = tick.gt;
  rec.est = est;
  rec.mode = mode;
  rec.n_meas = n_meas;
  rec.overlap = tick.overlap;
  if (est) {
    rec.trans_err_m = std::hypot(est->x - tick.gt.x, est->y - tick.gt.y);
    rec.head_err_deg = std::abs(wrap_angle(est->theta - tick.gt.theta)) * 180.0 / M_PI;
  }
  return rec;
}

}  // namespace detail

/// Error and availability summary per the run's records. Errors average
/// only over ticks with a published estimate; std is the population value.
inline Metrics compute_metrics(const std::vector<RunRecord>& records)
{
  Metrics m;
  m.n_records = static_cast<int>(records.size());
  std::vector<double> terrs, herrs;
  for (const auto& rec : records) {
    if (!rec.est) continue;
    terrs.push_back(*rec.trans_err_m);
    herrs.push_back(*rec.head_err_deg);
    if (!rec.overlap) m.false_accepts++;
    if (!m.time_to_first_lock_s || rec.time_s < *m.time_to_first_lock_s) {
      m.time_to_first_lock_s = rec.time_s;
    }
  }
  if (m.n_records > 0) m.availability = static_cast<double>(terrs.size()) / m.n_records;
  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair<double, double>(mean, std::sqrt(var / v.size()));
  };
  if (!terrs.empty()) {
    auto [mt, st] = mean_std(terrs);
    m.mean_trans_err_m = mt;
    m.std_trans_err_m = st;
    auto [mh, sh] = mean_std(herrs);
    m.mean_head_err_deg = mh;
    m.std_head_err_deg = sh;
  }
  return m;
}

struct RunResult {
  std::vector<RunRecord> records;
  Metrics metrics;
  TimingReport timing;
};

/**
 * Full pipeline run: maps are built at map_rate_hz, shared at
 * share_rate_hz, and every pair's filter is stepped on each shared map.
 * Deterministic for a fixed scenario + seed. When out_dir is non-empty,
 * writes run.csv, metrics.json, and maps/ dumps there.
 */
inline RunResult run_scenario(const Scenario& sc, const std::string& out_dir = "");

/// Single-solution baseline: accept the one association solution whenever
/// it has at least min_assoc inliers. `mno_only` instead accepts the first
/// (densest) multi-solution measurement with no temporal filtering.
enum class BaselineKind { ClipperThreshold, MnoOnly };

inline RunResult run_baseline(const Scenario& sc, BaselineKind kind, int min_assoc,
                              const std::string& out_dir = "");

namespace detail {

inline std::string csv_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline const char* run_csv_header()
{
  return "step,time_s,pair,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,mode,n_meas,trans_err_m,head_err_deg,overlap";
}

inline std::string to_csv(const std::vector<RunRecord>& records)
{
  using detail::csv_double;
  std::string out = run_csv_header();
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.step) + ',' + csv_double(r.time_s) + ',' + r.pair + ',';
    out += csv_double(r.gt.x) + ',' + csv_double(r.gt.y) + ',' + csv_double(r.gt.theta) + ',';
    if (r.est) {
      out += csv_double(r.est->x) + ',' + csv_double(r.est->y) + ',' + csv_double(r.est->theta);
    } else {
      out += ",,";
    }
    out += ',' + r.mode + ',' + std::to_string(r.n_meas) + ',';
    if (r.trans_err_m) out += csv_double(*r.trans_err_m);
    out += ',';
    if (r.head_err_deg) out += csv_double(*r.head_err_deg);
    out += ',';
    out += r.overlap ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline std::vector<RunRecord> parse_csv(const std::string& text)
{
  std::vector<RunRecord> records;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error("run.csv: empty file");
  if (line != run_csv_header()) throw std::runtime_error("run.csv: unexpected header");
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < 14) f.push_back("");
    RunRecord r;
    r.step = std::stoi(f[0]);
    r.time_s = std::stod(f[1]);
    r.pair = f[2];
    r.gt = Pose2(std::stod(f[3]), std::stod(f[4]), std::stod(f[5]));
    if (!f[6].empty()) r.est = Pose2(std::stod(f[6]), std::stod(f[7]), std::stod(f[8]));
    r.mode = f[9];
    r.n_meas = std::stoi(f[10]);
    if (!f[11].empty()) r.trans_err_m = std::stod(f[11]);
    if (!f[12].empty()) r.head_err_deg = std::stod(f[12]);
    r.overlap = f[13] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

inline nlohmann::json metrics_to_json(const Metrics& m)
{
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"mean_trans_err_m", opt(m.mean_trans_err_m)},
          {"std_trans_err_m", opt(m.std_trans_err_m)},
          {"mean_head_err_deg", opt(m.mean_head_err_deg)},
          {"std_head_err_deg", opt(m.std_head_err_deg)},
          {"availability", m.availability},
          {"false_accepts", m.false_accepts},
          {"time_to_first_lock_s", opt(m.time_to_first_lock_s)},
          {"n_records", m.n_records}};
}

namespace detail {

inline void write_outputs(const std::string& out_dir, const RunResult& result)
{
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(std::filesystem::path(out_dir) / "run.csv");
    csv << to_csv(result.records);
  }
  {
    std::ofstream mj(std::filesystem::path(out_dir) / "metrics.json");
    mj << metrics_to_json(result.metrics).dump(2) << '\n';
  }
}

}  // namespace detail

inline RunResult run_scenario(const Scenario& sc, const std::string& out_dir)
{
  RunResult result;
  detail::TimingCollector mapping_ms, mno_ms, step_ms;

  std::vector<TcaffState> states(sc.robots.size() * sc.robots.size());
  const std::string maps_dir =
      out_dir.empty() ? "" : (std::filesystem::path(out_dir) / "maps").string();

  detail::drive(sc, maps_dir, mapping_ms, [&](const detail::PairTick& tick) {
    detail::StopWatch sw_mno;
    const auto measurements =
        mno_clipper(*tick.view_i, *tick.view_j, sc.clipper_params, sc.mno_params, tick.now);
    mno_ms.add(sw_mno.ms());

    TcaffState& state = states[tick.i * sc.robots.size() + tick.j];
    detail::StopWatch sw_step;
    state = step(std::move(state), measurements, sc.kalman_model, sc.filter_params);
    step_ms.add(sw_step.ms());

    std::optional<Pose2> est;
    if (state.estimate) est = state.estimate->mean_pose();
    const char* mode = state.mode == TcaffMode::Locked ? "locked" : "exploring";
    result.records.push_back(
        detail::make_record(tick, sc, est, mode, static_cast<int>(measurements.size())));
  });

  result.metrics = compute_metrics(result.records);
  result.timing = {mapping_ms.stats(), mno_ms.stats(), step_ms.stats()};
  detail::write_outputs(out_dir, result);
  return result;
}

inline RunResult run_baseline(const Scenario& sc, BaselineKind kind, int min_assoc,
                              const std::string& out_dir)
{
  if (kind == BaselineKind::ClipperThreshold && min_assoc < 2) {
    throw std::invalid_argument("run_baseline: min_assoc must be at least 2");
  }
  RunResult result;
  detail::TimingCollector mapping_ms, mno_ms, step_ms;

  detail::drive(sc, "", mapping_ms, [&](const detail::PairTick& tick) {
    std::optional<Pose2> est;
    int n_meas = 0;

    detail::StopWatch sw;
    if (kind == BaselineKind::MnoOnly) {
      const auto measurements =
          mno_clipper(*tick.view_i, *tick.view_j, sc.clipper_params, sc.mno_params, tick.now);
      n_meas = static_cast<int>(measurements.size());
      if (!measurements.empty()) est = measurements.front().pose;
    } else {
      const auto& map_i = *tick.view_i;
      const auto& map_j = *tick.view_j;
      if (!map_i.empty() && !map_j.empty()) {
        const auto assocs = putative_associations(map_i, map_j, sc.clipper_params);
        if (!assocs.empty()) {
          const auto sol = solve(build_problem(map_i, map_j, assocs, sc.clipper_params),
                                 sc.clipper_params);
          if (static_cast<int>(sol.inliers.size()) >= min_assoc) {
            std::vector<Correspondence> pairs;
            for (int idx : sol.inliers) {
              const auto& oi = map_i.objects[assocs[idx].idx_i];
              const auto& oj = map_j.objects[assocs[idx].idx_j];
              pairs.push_back({oi.centroid, oj.centroid,
                               recency_weight(object_age(oi, tick.now), object_age(oj, tick.now))});
            }
            try {
              est = weighted_arun_2d(pairs);
              n_meas = 1;
            } catch (const std::invalid_argument&) {
              est.reset();  // degenerate geometry; reject this tick
            }
          }
        }
      }
    }
    mno_ms.add(sw.ms());
    result.records.push_back(detail::make_record(tick, sc, est, "baseline", n_meas));
  });

  result.metrics = compute_metrics(result.records);
  result.timing = {mapping_ms.stats(), mno_ms.stats(), step_ms.stats()};
  detail::write_outputs(out_dir, result);
  return result;
}

/// Wall-time profile of the scenario's three hot paths.
inline TimingReport timing_report(const Scenario& sc)
{
  return run_scenario(sc).timing;
}

}  // namespace tcaff

#endif  // TCAFF_HARNESS_HPP
