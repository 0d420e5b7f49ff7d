/**
 * @file filter.hpp
 * @brief Temporally consistent alignment filter: a windowed multiple
 *        hypothesis tree over frame-alignment measurements.
 *
 * Each tree node holds a Gaussian belief over the alignment [x, y, theta]
 * and the cumulative selection cost of its measurement sequence. At every
 * sharing tick leaves are extended with one no-measurement child plus one
 * child per gated measurement; sliding-window and max-branches pruning keep
 * the tree bounded. While no alignment is trusted, exploring trees seeded
 * from lag-W measurements compete for promotion to the main tree.
 */

#ifndef TCAFF_FILTER_HPP
#define TCAFF_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tcaff/geometry.hpp"
#include "tcaff/registration.hpp"

namespace tcaff {

struct KalmanModel {
  Eigen::Matrix3d H{Eigen::Matrix3d::Identity()};  // measurement matrix
  Eigen::Matrix3d Q{(Eigen::Vector3d() << 1e-4, 1e-4, 1e-5).finished().asDiagonal()};
  Eigen::Matrix3d R{(Eigen::Vector3d() << 0.04, 0.04, std::pow(2.0 * M_PI / 180.0, 2)).finished().asDiagonal()};
  static constexpr int d_z = 3;
};

struct FilterParams {
  double p_nm{0.001};        // probability of no measurement
  double nu{3.0};            // Mahalanobis gate radius
  double tau{8.0};           // main-tree acceptance threshold on cumulative cost
  int window{8};             // sliding window W
  int max_branches{200};     // leaf budget B
  int max_no_meas_steps{10}; // locked->exploring reversion patience
};

namespace detail {

inline Eigen::Matrix3d innovation_cov(const Gaussian3& belief, const KalmanModel& model)
{
  return model.H * belief.cov * model.H.transpose() + model.R;
}

inline Eigen::Vector3d innovation(const Gaussian3& belief, const AlignmentMeasurement& z,
                                  const KalmanModel& model)
{
  Eigen::Vector3d r = z.pose.vec() - model.H * belief.mean;
  r[2] = wrap_angle(r[2]);
  return r;
}

inline Eigen::LDLT<Eigen::Matrix3d> factor_innovation_cov(const Eigen::Matrix3d& S)
{
  Eigen::LDLT<Eigen::Matrix3d> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::runtime_error("innovation covariance is not positive definite");
  }
  return ldlt;
}

}  // namespace detail

/**
 * Per-step selection cost. With a measurement this is
 * 0.5 * (||z - Hx||^2_S + log|S|); without one it is
 * -log(p_nm) - 0.5 * d_z * log(2 pi), independent of the belief.
 */
inline double node_cost(const Gaussian3& belief, const std::optional<AlignmentMeasurement>& z,
                        const KalmanModel& model, const FilterParams& params)
{
  if (!z) {
    return -std::log(params.p_nm) - 0.5 * KalmanModel::d_z * std::log(2.0 * M_PI);
  }
  const Eigen::Matrix3d S = detail::innovation_cov(belief, model);
  const auto ldlt = detail::factor_innovation_cov(S);
  const Eigen::Vector3d r = detail::innovation(belief, *z, model);
  const double maha2 = r.dot(ldlt.solve(r));
  const double logdet = ldlt.vectorD().array().log().sum();
  return 0.5 * (maha2 + logdet);
}

/// Random-walk propagation: the mean is kept, process noise widens the
/// covariance.
inline Gaussian3 kalman_predict(const Gaussian3& belief, const KalmanModel& model)
{
  Gaussian3 out = belief;
  out.cov = belief.cov + model.Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Standard Kalman update in Joseph form; the theta innovation and the
/// posterior theta are wrapped.
inline Gaussian3 kalman_update(const Gaussian3& belief, const AlignmentMeasurement& z,
                               const KalmanModel& model)
{
  const Eigen::Matrix3d S = detail::innovation_cov(belief, model);
  const auto ldlt = detail::factor_innovation_cov(S);
  const Eigen::Matrix3d K = belief.cov * model.H.transpose() * ldlt.solve(Eigen::Matrix3d::Identity());
  const Eigen::Vector3d r = detail::innovation(belief, z, model);

  Gaussian3 out;
  out.mean = belief.mean + K * r;
  out.mean[2] = wrap_angle(out.mean[2]);
  const Eigen::Matrix3d IKH = Eigen::Matrix3d::Identity() - K * model.H;
  out.cov = IKH * belief.cov * IKH.transpose() + K * model.R * K.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Mahalanobis gate: accepts z iff (z - Hx)^T S^-1 (z - Hx) <= nu^2
/// (boundary inclusive).
inline bool gate(const Gaussian3& belief, const AlignmentMeasurement& z,
                 const KalmanModel& model, const FilterParams& params)
{
  const Eigen::Matrix3d S = detail::innovation_cov(belief, model);
  const auto ldlt = detail::factor_innovation_cov(S);
  const Eigen::Vector3d r = detail::innovation(belief, z, model);
  return r.dot(ldlt.solve(r)) <= params.nu * params.nu;
}

struct HypothesisNode {
  Gaussian3 belief;
  double cumulative_cost{0.0};
  int parent{-1};  // arena index; -1 for the root
  int depth{0};
  std::optional<AlignmentMeasurement> selected_measurement;
};

enum class TreeKind { Exploring, Main };

/// A measurement-selection tree. Nodes live in an arena in creation order
/// (used for deterministic tie-breaking); `leaves` all share the same depth.
struct HypothesisTree {
  std::vector<HypothesisNode> nodes;
  std::vector<int> leaves;
  TreeKind kind{TreeKind::Exploring};
  int created_at{0};  // step index of the root

  static HypothesisTree with_root(const Gaussian3& root_belief, TreeKind kind, int created_at)
  {
    HypothesisTree tree;
    tree.kind = kind;
    tree.created_at = created_at;
    HypothesisNode root;
    root.belief = root_belief;
    tree.nodes.push_back(std::move(root));
    tree.leaves.push_back(0);
    return tree;
  }

  int root() const { return 0; }
  int leaf_depth() const { return leaves.empty() ? 0 : nodes[leaves.front()].depth; }

  /// Leaf with the minimum cumulative cost; ties go to the earliest-created
  /// node.
  int best_leaf() const
  {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int l : leaves) {
      if (nodes[l].cumulative_cost < best_cost) {
        best_cost = nodes[l].cumulative_cost;
        best = l;
      }
    }
    return best;
  }

  /// Number of measurement (non-empty) selections on the path root -> node.
  int measurement_count(int node) const
  {
    int count = 0;
    for (int n = node; n >= 0; n = nodes[n].parent) {
      if (nodes[n].selected_measurement) ++count;
    }
    return count;
  }

  /// Length of the trailing run of no-measurement selections ending at node.
  int trailing_no_measurement(int node) const
  {
    int count = 0;
    for (int n = node; n >= 0 && nodes[n].parent >= 0; n = nodes[n].parent) {
      if (nodes[n].selected_measurement) break;
      ++count;
    }
    return count;
  }
};

/**
 * Extends every leaf by one tick: always a no-measurement child carrying the
 * predicted belief, plus one Kalman-updated child per measurement that
 * passes the gate against the predicted belief.
 */
inline HypothesisTree extend(HypothesisTree tree, const std::vector<AlignmentMeasurement>& measurements,
                             const KalmanModel& model, const FilterParams& params)
{
  if (tree.nodes.empty()) throw std::invalid_argument("extend: empty tree");
  std::vector<int> new_leaves;
  const double no_meas_cost = node_cost(Gaussian3{}, std::nullopt, model, params);
  for (int leaf : tree.leaves) {
    const Gaussian3 predicted = kalman_predict(tree.nodes[leaf].belief, model);
    const double parent_cost = tree.nodes[leaf].cumulative_cost;
    const int depth = tree.nodes[leaf].depth + 1;

    HypothesisNode skip;
    skip.belief = predicted;
    skip.cumulative_cost = parent_cost + no_meas_cost;
    skip.parent = leaf;
    skip.depth = depth;
    new_leaves.push_back(static_cast<int>(tree.nodes.size()));
    tree.nodes.push_back(std::move(skip));

    for (const auto& z : measurements) {
      if (!gate(predicted, z, model, params)) continue;
      HypothesisNode child;
      child.cumulative_cost = parent_cost + node_cost(predicted, z, model, params);
      child.belief = kalman_update(predicted, z, model);
      child.parent = leaf;
      child.depth = depth;
      child.selected_measurement = z;
      new_leaves.push_back(static_cast<int>(tree.nodes.size()));
      tree.nodes.push_back(std::move(child));
    }
  }
  tree.leaves = std::move(new_leaves);
  return tree;
}

namespace detail {

/// Rebuilds the arena keeping only nodes on paths from new_root to the kept
/// leaves. Relative order (and thus creation-order tie-breaking) is
/// preserved.
inline HypothesisTree rebuild(const HypothesisTree& tree, int new_root,
                              const std::vector<int>& kept_leaves, bool rebase_cost)
{
  std::vector<char> keep(tree.nodes.size(), 0);
  for (int leaf : kept_leaves) {
    for (int n = leaf; n >= 0; n = tree.nodes[n].parent) {
      if (keep[n]) break;
      keep[n] = 1;
      if (n == new_root) break;
    }
  }
  keep[new_root] = 1;

  std::vector<int> remap(tree.nodes.size(), -1);
  HypothesisTree out;
  out.kind = tree.kind;
  out.created_at = tree.created_at;
  const double base = rebase_cost ? tree.nodes[new_root].cumulative_cost : 0.0;
  for (int n = new_root; n < static_cast<int>(tree.nodes.size()); ++n) {
    if (!keep[n]) continue;
    HypothesisNode node = tree.nodes[n];
    node.parent = (n == new_root) ? -1 : remap[node.parent];
    node.cumulative_cost -= base;
    remap[n] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(std::move(node));
  }
  for (int leaf : kept_leaves) out.leaves.push_back(remap[leaf]);
  return out;
}

}  // namespace detail

/**
 * Sliding-window plus max-branches pruning. When the window is exceeded,
 * the lag-W ancestor of the best leaf becomes the new root (its cumulative
 * cost is rebased to zero) and every other branch at that depth is dropped.
 * Then only the max_branches best leaves survive. The best leaf always
 * survives both stages.
 */
inline HypothesisTree prune(HypothesisTree tree, const FilterParams& params)
{
  if (tree.nodes.empty() || tree.leaves.empty()) return tree;

  int new_root = tree.root();
  const int root_depth = tree.nodes[tree.root()].depth;
  const int depth_span = tree.leaf_depth() - root_depth;
  if (depth_span > params.window) {
    const int target_depth = tree.leaf_depth() - params.window;
    int n = tree.best_leaf();
    while (tree.nodes[n].depth > target_depth) n = tree.nodes[n].parent;
    new_root = n;
  }

  // Leaves under the new root, best-cost first (creation order on ties).
  std::vector<int> kept;
  for (int leaf : tree.leaves) {
    int n = leaf;
    while (n >= 0 && n != new_root) n = tree.nodes[n].parent;
    if (n == new_root) kept.push_back(leaf);
  }
  std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) {
    return tree.nodes[a].cumulative_cost < tree.nodes[b].cumulative_cost;
  });
  if (static_cast<int>(kept.size()) > params.max_branches) {
    kept.resize(params.max_branches);
  }
  std::sort(kept.begin(), kept.end());  // back to creation order

  const bool rebase = new_root != tree.root();
  return detail::rebuild(tree, new_root, kept, rebase);
}

enum class TcaffMode { Exploring, Locked };

/// Full filter state for one robot pair.
struct TcaffState {
  TcaffMode mode{TcaffMode::Exploring};
  std::vector<HypothesisTree> exploring_trees;
  std::optional<HypothesisTree> main_tree;
  std::deque<std::vector<AlignmentMeasurement>> measurement_buffer;  // Z_{k-W} ... Z_k
  std::optional<Gaussian3> estimate;
  int step_index{0};  // ticks processed so far
  // Consecutive locked steps whose best leaf absorbed no measurement. The
  // sliding window truncates lineage at depth W, so starvation longer than
  // the window has to be counted across steps.
  int no_meas_streak{0};
};

namespace detail {

/// Builds the exploring tree rooted at a lag-W measurement and replays the
/// buffered sets after it.
inline HypothesisTree grow_exploring_tree(const AlignmentMeasurement& root_meas,
                                          const std::deque<std::vector<AlignmentMeasurement>>& buffer,
                                          int root_step, const KalmanModel& model,
                                          const FilterParams& params)
{
  Gaussian3 root_belief;
  root_belief.mean = root_meas.pose.vec();
  root_belief.cov = model.R;  // the seeding measurement is all we know
  HypothesisTree tree = HypothesisTree::with_root(root_belief, TreeKind::Exploring, root_step);
  tree.nodes[0].selected_measurement = root_meas;  // the seed is a real measurement
  for (std::size_t t = 1; t < buffer.size(); ++t) {
    tree = extend(std::move(tree), buffer[t], model, params);
    tree = prune(std::move(tree), params);
  }
  return tree;
}

}  // namespace detail

/**
 * Advances the filter by one map-sharing tick.
 *
 * Locked: the main tree is extended with the new measurement set and pruned;
 * the estimate is the best leaf's belief. If the best leaf's lineage has
 * gone max_no_meas_steps ticks without absorbing a measurement, the main
 * tree is abandoned and the filter returns to exploring.
 *
 * Exploring: once the buffer spans a full window, every measurement at lag
 * W seeds an exploring tree which is extended with the buffered sets. The
 * best full-window leaf is promoted to a main tree when its cumulative cost
 * beats tau and at least ceil(W/2) of its selections are actual
 * measurements; otherwise no estimate is published.
 */
inline TcaffState step(TcaffState state, const std::vector<AlignmentMeasurement>& measurements,
                       const KalmanModel& model, const FilterParams& params)
{
  state.measurement_buffer.push_back(measurements);
  while (static_cast<int>(state.measurement_buffer.size()) > params.window + 1) {
    state.measurement_buffer.pop_front();
  }
  state.step_index++;

  if (state.mode == TcaffMode::Locked) {
    HypothesisTree main = extend(std::move(*state.main_tree), measurements, model, params);
    main = prune(std::move(main), params);
    const int best = main.best_leaf();
    const int trailing = main.trailing_no_measurement(best);
    state.no_meas_streak = trailing == 0 ? 0 : std::max(state.no_meas_streak + 1, trailing);
    if (state.no_meas_streak >= params.max_no_meas_steps) {
      state.mode = TcaffMode::Exploring;
      state.main_tree.reset();
      state.estimate.reset();
      state.exploring_trees.clear();
      state.no_meas_streak = 0;
    } else {
      state.estimate = main.nodes[best].belief;
      state.main_tree = std::move(main);
    }
    return state;
  }

  // Exploring. Last tick's trees are rooted outside the window now.
  state.exploring_trees.clear();
  state.estimate.reset();
  if (static_cast<int>(state.measurement_buffer.size()) < params.window + 1) {
    return state;
  }

  const int root_step = state.step_index - 1 - params.window;
  for (const auto& seed : state.measurement_buffer.front()) {
    state.exploring_trees.push_back(
        detail::grow_exploring_tree(seed, state.measurement_buffer, root_step, model, params));
  }

  const int min_measurements = (params.window + 1) / 2;
  int best_tree = -1, best_leaf = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < state.exploring_trees.size(); ++t) {
    const auto& tree = state.exploring_trees[t];
    const int leaf = tree.best_leaf();
    if (leaf < 0) continue;
    const double cost = tree.nodes[leaf].cumulative_cost;
    if (cost < params.tau && tree.measurement_count(leaf) >= min_measurements && cost < best_cost) {
      best_cost = cost;
      best_tree = static_cast<int>(t);
      best_leaf = leaf;
    }
  }
  if (best_tree >= 0) {
    HypothesisTree main = std::move(state.exploring_trees[best_tree]);
    main.kind = TreeKind::Main;
    state.mode = TcaffMode::Locked;
    state.estimate = main.nodes[best_leaf].belief;
    state.no_meas_streak = main.trailing_no_measurement(best_leaf);
    state.main_tree = std::move(main);
    state.exploring_trees.clear();
  }
  return state;
}

}  // namespace tcaff

#endif  // TCAFF_FILTER_HPP
