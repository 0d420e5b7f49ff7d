// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
// Usage: acceptance [scenario_dir]   (defaults to ../scenarios)

#include <chrono>
#include <climits>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "tcaff/clipper.hpp"
#include "tcaff/filter.hpp"
#include "tcaff/geometry.hpp"
#include "tcaff/harness.hpp"
#include "tcaff/registration.hpp"
#include "tcaff/rng.hpp"
#include "tcaff/scenario.hpp"
#include "tcaff/sim.hpp"
#include "test_support.hpp"

using namespace tcaff;

namespace {

std::string g_scenario_dir = "../scenarios";

double now_ms()
{
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Scenario load(const std::string& name, std::uint64_t seed)
{
  Scenario sc = load_scenario(g_scenario_dir + "/" + name + ".json");
  sc.seed = seed;
  return sc;
}

bool pose_close(const Pose2& a, const Pose2& b, double tol_t, double tol_r)
{
  return std::hypot(a.x - b.x, a.y - b.y) <= tol_t &&
         std::abs(wrap_angle(a.theta - b.theta)) <= tol_r;
}

// ---------------------------------------------------------------------------
// 1. Solver-oracle equivalence
bool criterion_solver_oracle(std::string& detail)
{
  const double t0 = now_ms();
  ClipperParams params;
  int counted = 0, density_ok = 0, set_ok = 0, relaxed_set_ok = 0;
  for (int seed = 0; counted < 200; ++seed) {
    const auto scene = testsupport::random_ambiguous_scene(seed);
    const auto assocs = putative_associations(scene.map_i, scene.map_j, params);
    if (assocs.empty() || assocs.size() > 12) continue;
    ++counted;
    const auto problem = build_problem(scene.map_i, scene.map_j, assocs, params);
    const auto oracle = testsupport::brute_force_densest(problem.affinity);

    const auto matches = [&](const ClipperSolution& s) {
      return s.inliers == oracle.inliers ||
             std::abs(testsupport::subset_density_oracle(problem.affinity, s.inliers) -
                      oracle.density) <= 1e-12;
    };

    const auto sol = solve(problem, params);
    density_ok += std::abs(sol.density - oracle.density) <= 1e-6;
    set_ok += matches(sol);

    ClipperParams forced = params;
    forced.exhaustive_limit = 0;
    relaxed_set_ok += matches(solve(problem, forced));
  }
  const double elapsed_s = (now_ms() - t0) / 1000.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "density %d/200 (need 200); inlier sets %d/200 (relaxation %d/200, need >=190); %.2f s",
                density_ok, set_ok, relaxed_set_ok, elapsed_s);
  detail = buf;
  return density_ok == 200 && set_ok >= 190 && relaxed_set_ok >= 190 && elapsed_s < 10.0;
}

// ---------------------------------------------------------------------------
// 2. MNO disjointness & aliasing on the aliased-room construction
bool criterion_mno_aliasing(std::string& detail)
{
  const Scenario base = load("aliased-room", 1);
  int pass_seeds = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WorldConfig wc = base.world;
    wc.seed = seed;
    const auto world = generate_world(wc);

    SensorConfig probe = base.sensor;
    probe.fov_radius = 8.5;
    probe.fov_half_angle = M_PI;
    probe.detection_prob = 1.0;

    // Robot i maps the left constellation region; robot j moves through two
    // vantages from which both constellations fall inside its map. Odometry
    // frames are anchored at each robot's first pose (drift-free).
    ObjectMap map_i, map_j;
    map_i.robot_id = "i";
    map_j.robot_id = "j";
    const Pose2 world_i{6.0, 6.5, 0.0};
    const Pose2 world_j1{11.5, 8.0, 0.0};
    const Pose2 world_j2{15.0, 8.0, 0.0};
    for (const auto& o : observe(world, world_i, Pose2::identity(), probe, 0.9, seed * 7 + 1, 0)) {
      map_i = upsert(std::move(map_i), o);
    }
    for (const auto& o : observe(world, world_j1, Pose2::identity(), probe, 0.9, seed * 7 + 2, 0)) {
      map_j = upsert(std::move(map_j), o);
    }
    const Pose2 odom_j2 = compose(inverse(world_j1), world_j2);
    for (const auto& o : observe(world, world_j2, odom_j2, probe, 0.9, seed * 7 + 2, 1)) {
      map_j = upsert(std::move(map_j), o);
    }

    const Pose2 gt = gt_alignment(Pose2::identity(), world_i, Pose2::identity(), world_j1);

    const auto measurements =
        mno_clipper(map_i, map_j, base.clipper_params, base.mno_params, 1.0);
    if (measurements.size() < 2) continue;

    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
    bool disjoint = true;
    for (const auto& m : measurements) {
      for (const auto& ids : m.association_ids) disjoint &= seen.insert(ids).second;
    }

    bool pose_distinct = false;
    for (std::size_t a = 0; a < measurements.size() && !pose_distinct; ++a) {
      for (std::size_t b = a + 1; b < measurements.size(); ++b) {
        if (!pose_close(measurements[a].pose, measurements[b].pose, 0.5, 0.2)) {
          pose_distinct = true;
          break;
        }
      }
    }

    bool near_truth = false;
    for (const auto& m : measurements) {
      near_truth |= pose_close(m.pose, gt, 0.1, 1.0 * M_PI / 180.0);
    }

    pass_seeds += disjoint && pose_distinct && near_truth;
  }
  detail = "seeds with >=2 disjoint pose-distinct measurements incl. truth: " +
           std::to_string(pass_seeds) + "/20";
  return pass_seeds == 20;
}

// ---------------------------------------------------------------------------
// 3. Registration exactness
bool criterion_registration_exact(std::string& detail)
{
  int ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_points = 3 + trial % 5;
    const auto scene = testsupport::random_registration_scene(trial, n_points, 0, 0, 0.0);
    std::vector<Correspondence> pairs;
    for (int k = 0; k < n_points; ++k) {
      pairs.push_back({scene.map_i.objects[k].centroid, scene.map_j.objects[k].centroid, 1.0});
    }
    ok += pose_close(weighted_arun_2d(pairs), scene.true_alignment, 1e-6, 1e-6);
  }
  detail = "recovered " + std::to_string(ok) + "/1000 transforms within 1e-6";
  return ok == 1000;
}

// ---------------------------------------------------------------------------
// 4. Windowed MAP equivalence (gating off, unbounded branches)
double enumerate_best_cost(const Gaussian3& belief,
                           const std::vector<std::vector<AlignmentMeasurement>>& sets,
                           std::size_t k, const KalmanModel& model, const FilterParams& params)
{
  if (k == sets.size()) return 0.0;
  const Gaussian3 pred = kalman_predict(belief, model);
  double best = node_cost(pred, std::nullopt, model, params) +
                enumerate_best_cost(pred, sets, k + 1, model, params);
  for (const auto& z : sets[k]) {
    const double c = node_cost(pred, z, model, params) +
                     enumerate_best_cost(kalman_update(pred, z, model), sets, k + 1, model, params);
    best = std::min(best, c);
  }
  return best;
}

bool criterion_windowed_map(std::string& detail)
{
  KalmanModel model;
  FilterParams params;
  params.nu = 1e9;
  params.max_branches = INT_MAX;
  CounterRng rng(20250809);
  int ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int W = 3 + static_cast<int>(rng.uniform_index(3));
    std::vector<std::vector<AlignmentMeasurement>> sets(W);
    for (auto& Z : sets) {
      const int nz = static_cast<int>(rng.uniform_index(4));
      for (int k = 0; k < nz; ++k) {
        AlignmentMeasurement m;
        m.pose = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)};
        m.num_associations = 3;
        Z.push_back(m);
      }
    }
    Gaussian3 root;
    root.mean = {rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0};
    root.cov = Eigen::Matrix3d::Identity() * 0.05;

    HypothesisTree tree = HypothesisTree::with_root(root, TreeKind::Main, 0);
    for (const auto& Z : sets) tree = extend(std::move(tree), Z, model, params);
    const double tree_best = tree.nodes[tree.best_leaf()].cumulative_cost;
    const double oracle = enumerate_best_cost(root, sets, 0, model, params);
    ok += std::abs(tree_best - oracle) <= 1e-9;
  }
  detail = std::to_string(ok) + "/50 windows match exhaustive enumeration within 1e-9";
  return ok == 50;
}

// ---------------------------------------------------------------------------
// 5. Lock-on and accuracy on the overlap scenario
bool criterion_lock_accuracy(std::string& detail)
{
  int ok = 0;
  int worst_lock = -1;
  double worst_err = 0.0, worst_head = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto result = run_scenario(load("parallel-paths", seed));
    int lock_step = -1;
    double terr = 0.0, herr = 0.0;
    int n_est = 0;
    for (const auto& rec : result.records) {
      if (!rec.est) continue;
      if (lock_step < 0) lock_step = rec.step;
      terr += *rec.trans_err_m;
      herr += *rec.head_err_deg;
      ++n_est;
    }
    if (n_est == 0) continue;
    terr /= n_est;
    herr /= n_est;
    worst_lock = std::max(worst_lock, lock_step);
    worst_err = std::max(worst_err, terr);
    worst_head = std::max(worst_head, herr);
    ok += lock_step >= 0 && lock_step <= 16 && terr <= 0.15 && herr <= 2.0;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d/20 seeds; worst lock tick %d (<=16), err %.3f m (<=0.15), %.2f deg (<=2)", ok,
                worst_lock, worst_err, worst_head);
  detail = buf;
  return ok == 20;
}

// ---------------------------------------------------------------------------
// 6. Non-overlap rejection
bool criterion_non_overlap(std::string& detail)
{
  int clean = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto result = run_scenario(load("non-overlap", seed));
    clean += result.metrics.false_accepts == 0;
  }
  detail = "seeds with zero false accepts: " + std::to_string(clean) + "/20 (need >= 19)";
  return clean >= 19;
}

// ---------------------------------------------------------------------------
// 7. Recovery lifecycle on indoor-return
bool criterion_recovery(std::string& detail)
{
  const int grace = 14;  // max_no_meas_steps + window/2
  int ok = 0;
  int worst_delta = -1;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto result = run_scenario(load("indoor-return", seed));
    const auto& recs = result.records;
    const int n = static_cast<int>(recs.size());

    int last_true = -1, strict_ticks = 0, violations = 0;
    for (int k = 0; k < n; ++k) {
      if (recs[k].overlap) {
        last_true = k;
      } else if (k - last_true > grace) {
        ++strict_ticks;
        violations += recs[k].est.has_value();
      }
    }

    int run_false = 0, reoverlap = -1;
    for (int k = 0; k < n; ++k) {
      if (!recs[k].overlap) {
        ++run_false;
      } else {
        if (run_false >= 5 && reoverlap < 0 && k > 30) reoverlap = k;
        run_false = 0;
      }
    }
    int relock = -1;
    if (reoverlap >= 0) {
      for (int k = reoverlap; k < n; ++k) {
        if (recs[k].est) {
          relock = k;
          break;
        }
      }
    }
    const int delta = (relock >= 0 && reoverlap >= 0) ? relock - reoverlap : -1;
    worst_delta = std::max(worst_delta, delta);
    ok += violations == 0 && strict_ticks >= 5 && reoverlap >= 0 && delta >= 0 && delta <= 16;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d/20 seeds; worst re-lock delay %d ticks (<=16)", ok,
                worst_delta);
  detail = buf;
  return ok == 20;
}

// ---------------------------------------------------------------------------
// 8. Baseline dominance on the aliased room.
//
// "Best baseline" is read as the sweep member with the highest
// error-qualified availability (fraction of ticks publishing a correct
// alignment: estimate present, true overlap present, translation error
// under 0.5 m); the comparison runs in alignment-error space as the
// criterion directs. TCAFF must match or beat that baseline on the same
// measure while not exceeding its false-accept count.
struct QualifiedStats {
  double useful{0.0};
  int false_accepts{0};
};

QualifiedStats qualified(const std::vector<RunRecord>& recs)
{
  QualifiedStats q;
  int good = 0;
  for (const auto& r : recs) {
    if (!r.est) continue;
    if (!r.overlap) {
      ++q.false_accepts;
    } else if (*r.trans_err_m < 0.5) {
      ++good;
    }
  }
  if (!recs.empty()) q.useful = static_cast<double>(good) / recs.size();
  return q;
}

bool criterion_baseline_dominance(std::string& detail)
{
  bool all_ok = true;
  std::string lines;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Scenario sc = load("aliased-room", seed);
    QualifiedStats best;
    int best_t = -1;
    for (int t = 2; t <= 10; ++t) {
      const auto q = qualified(run_baseline(sc, BaselineKind::ClipperThreshold, t).records);
      if (best_t < 0 || q.useful > best.useful) {
        best = q;
        best_t = t;
      }
    }
    const auto tq = qualified(run_scenario(sc).records);
    const bool ok = tq.useful >= best.useful && tq.false_accepts <= best.false_accepts;
    all_ok &= ok;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "seed %llu: tcaff %.3f/fa%d vs best(t=%d) %.3f/fa%d%s",
                  static_cast<unsigned long long>(seed), tq.useful, tq.false_accepts, best_t,
                  best.useful, best.false_accepts, ok ? "" : " FAIL");
    if (!lines.empty()) lines += "; ";
    lines += buf;
  }
  detail = lines;
  return all_ok;
}

// ---------------------------------------------------------------------------
// 9. Performance envelope on 50-object maps
bool criterion_performance(std::string& detail)
{
  WorldConfig wc;
  wc.extent = {20.0, 20.0};
  wc.n_objects = 50;
  wc.wh_min = 0.2;
  wc.wh_max = 1.5;
  wc.min_separation = 0.8;
  wc.seed = 99;
  const auto world = generate_world(wc);

  SensorConfig sensor;
  sensor.fov_radius = 40.0;
  sensor.fov_half_angle = M_PI;
  sensor.centroid_sigma = 0.05;
  sensor.wh_sigma = 0.02;

  ObjectMap map_i, map_j;
  map_i.robot_id = "i";
  map_j.robot_id = "j";
  const Pose2 pose_i{2.0, 2.0, 0.3};
  const Pose2 pose_j{18.0, 17.0, -2.0};
  for (const auto& o : observe(world, pose_i, pose_i, sensor, 1.0, 1, 0)) {
    map_i = upsert(std::move(map_i), o);
  }
  for (const auto& o : observe(world, pose_j, pose_j, sensor, 1.0, 2, 0)) {
    map_j = upsert(std::move(map_j), o);
  }

  ClipperParams cparams;
  MnoParams mparams;
  const int m = static_cast<int>(putative_associations(map_i, map_j, cparams).size());

  double mno_ms = 0.0;
  std::vector<AlignmentMeasurement> measurements;
  const int reps = 5;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    measurements = mno_clipper(map_i, map_j, cparams, mparams, 1.0);
    mno_ms += now_ms() - t0;
  }
  mno_ms /= reps;

  KalmanModel model;
  FilterParams fparams;
  TcaffState state;
  CounterRng rng(7);
  auto make_set = [&] {
    std::vector<AlignmentMeasurement> Z;
    for (int k = 0; k < 4; ++k) {
      AlignmentMeasurement z;
      z.pose = {0.5 + 0.02 * rng.normal(), -0.3 + 0.02 * rng.normal(), 0.2 + 0.01 * rng.normal()};
      z.num_associations = 4;
      Z.push_back(z);
    }
    return Z;
  };
  for (int k = 0; k < 12; ++k) state = step(std::move(state), make_set(), model, fparams);
  double step_ms = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto Z = make_set();
    const double t0 = now_ms();
    state = step(std::move(state), Z, model, fparams);
    step_ms += now_ms() - t0;
  }
  step_ms /= 10.0;

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "m=%d putative assocs; mno-clipper %.1f ms (<=500), tcaff step %.2f ms (<=100), %zu meas",
                m, mno_ms, step_ms, measurements.size());
  detail = buf;
  return mno_ms <= 500.0 && step_ms <= 100.0 && !measurements.empty();
}

// ---------------------------------------------------------------------------
// 10. Filter invariant audits
bool criterion_invariants(std::string& detail)
{
  KalmanModel model;
  FilterParams params;
  params.nu = 1e6;
  CounterRng rng(424242);
  long nodes_checked = 0;
  long violations = 0;

  for (int trial = 0; trial < 220; ++trial) {
    Gaussian3 root;
    root.mean = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    root.cov = Eigen::Matrix3d::Identity() * rng.uniform(0.01, 0.5);
    HypothesisTree tree = HypothesisTree::with_root(root, TreeKind::Main, 0);
    const int steps = 3 + static_cast<int>(rng.uniform_index(3));
    for (int s = 0; s < steps; ++s) {
      std::vector<AlignmentMeasurement> Z;
      const int nz = static_cast<int>(rng.uniform_index(4));
      for (int k = 0; k < nz; ++k) {
        AlignmentMeasurement z;
        // occasionally shove theta out of range to check wrap invariance
        const double wrap_shift = rng.bernoulli(0.2) ? 2.0 * M_PI : 0.0;
        z.pose = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1) + wrap_shift};
        z.num_associations = 2;
        Z.push_back(z);
      }
      tree = extend(std::move(tree), Z, model, params);
      tree = prune(std::move(tree), params);
    }

    for (std::size_t n = 1; n < tree.nodes.size(); ++n) {
      const auto& node = tree.nodes[n];
      const auto& parent = tree.nodes[node.parent];
      const Gaussian3 pred = kalman_predict(parent.belief, model);
      ++nodes_checked;

      // covariance health
      if (!node.belief.valid()) ++violations;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(node.belief.cov);
      if (es.eigenvalues().minCoeff() <= 0.0 || es.eigenvalues().maxCoeff() >= 1e12) ++violations;

      // cost additivity against a recomputed step cost
      const double step_cost = node_cost(pred, node.selected_measurement, model, params);
      if (std::abs(node.cumulative_cost - parent.cumulative_cost - step_cost) > 1e-9) ++violations;

      if (node.selected_measurement) {
        // wrap invariance: shifting the measurement angle by 2 pi changes nothing
        AlignmentMeasurement shifted = *node.selected_measurement;
        shifted.pose = Pose2(shifted.pose.x, shifted.pose.y, shifted.pose.theta + 2.0 * M_PI);
        if (std::abs(node_cost(pred, shifted, model, params) - step_cost) > 1e-9) ++violations;
      } else {
        // no-measurement neutrality: mean held exactly, covariance + Q
        if ((node.belief.mean - parent.belief.mean).norm() != 0.0) ++violations;
        if ((node.belief.cov - (parent.belief.cov + model.Q)).norm() > 1e-15) ++violations;
      }
    }
  }
  detail = std::to_string(nodes_checked) + " node checks, " + std::to_string(violations) +
           " violations (need 0, >=10000 checks)";
  return violations == 0 && nodes_checked >= 10000;
}

}  // namespace

int main(int argc, char** argv)
{
  if (argc > 1) g_scenario_dir = argv[1];

  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {"Solver-oracle equivalence", criterion_solver_oracle},
      {"MNO disjointness & aliasing", criterion_mno_aliasing},
      {"Registration exactness", criterion_registration_exact},
      {"Windowed MAP equivalence", criterion_windowed_map},
      {"Lock-on and accuracy", criterion_lock_accuracy},
      {"Non-overlap rejection", criterion_non_overlap},
      {"Recovery lifecycle", criterion_recovery},
      {"Baseline dominance on ambiguity", criterion_baseline_dominance},
      {"Performance envelope", criterion_performance},
      {"Filter invariant suite", criterion_invariants},
  };

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[k].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %zu. %s — %s\n", ok ? "PASS" : "FAIL", k + 1, criteria[k].name,
                detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  return failures;
}
