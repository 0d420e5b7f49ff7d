/**
 * @file registration.hpp
 * @brief Weighted rigid alignment of associated object centroids and the
 *        multiple-near-optima association loop that turns one pair of maps
 *        into a set of candidate frame-alignment measurements.
 */

#ifndef TCAFF_REGISTRATION_HPP
#define TCAFF_REGISTRATION_HPP

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tcaff/clipper.hpp"
#include "tcaff/geometry.hpp"
#include "tcaff/object_map.hpp"

namespace tcaff {

/// One candidate frame alignment produced by registering a consistent
/// association set. pose parameterizes T_odomi_odomj.
struct AlignmentMeasurement {
  Pose2 pose;
  int num_associations{0};
  std::vector<std::pair<std::uint64_t, std::uint64_t>> association_ids;  // (id_i, id_j)
  double density{0.0};
};

struct MnoParams {
  int n_solutions{4};      // solver repetitions per map pair
  int min_associations{2};
};

// W(o_i, o_j) = (l_i * l_j)^-1 is singular at l = 0, so ages are floored
// before inversion.
constexpr double kRecencyFloor = 0.1;  // seconds

/// Recency weight of an association; positive and decreasing in both ages.
inline double recency_weight(double l_i, double l_j)
{
  if (l_i < 0.0 || l_j < 0.0) {
    throw std::invalid_argument("recency_weight: negative age");
  }
  return 1.0 / (std::max(l_i, kRecencyFloor) * std::max(l_j, kRecencyFloor));
}

struct Correspondence {
  Eigen::Vector3d point_i{Eigen::Vector3d::Zero()};
  Eigen::Vector3d point_j{Eigen::Vector3d::Zero()};
  double weight{1.0};
};

/**
 * Weighted 2D rigid fit (Arun's method on the xy components): returns the
 * transform T minimizing sum_k w_k ||p_i,k - (R(theta) p_j,k + t)||^2.
 * The rotation comes from the SVD of the weighted cross-covariance with a
 * determinant guard against reflections.
 */
inline Pose2 weighted_arun_2d(const std::vector<Correspondence>& pairs)
{
  if (pairs.size() < 2) {
    throw std::invalid_argument("weighted_arun_2d: need at least 2 correspondences");
  }
  double wsum = 0.0;
  Eigen::Vector2d ci = Eigen::Vector2d::Zero(), cj = Eigen::Vector2d::Zero();
  for (const auto& c : pairs) {
    if (c.weight <= 0.0) throw std::invalid_argument("weighted_arun_2d: non-positive weight");
    wsum += c.weight;
    ci += c.weight * c.point_i.head<2>();
    cj += c.weight * c.point_j.head<2>();
  }
  ci /= wsum;
  cj /= wsum;

  Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
  for (const auto& c : pairs) {
    const Eigen::Vector2d qi = c.point_i.head<2>() - ci;
    const Eigen::Vector2d qj = c.point_j.head<2>() - cj;
    H += c.weight * qj * qi.transpose();
  }
  if (H.norm() < 1e-12) {
    throw std::invalid_argument("weighted_arun_2d: degenerate correspondences, rotation unobservable");
  }

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d U = svd.matrixU(), V = svd.matrixV();
  Eigen::Matrix2d R = V * U.transpose();
  if (R.determinant() < 0.0) {
    V.col(1) *= -1.0;
    R = V * U.transpose();
  }
  const Eigen::Vector2d t = ci - R * cj;
  return {t.x(), t.y(), std::atan2(R(1, 0), R(0, 0))};
}

/**
 * Multiple-near-optima association: repeatedly solve the consistency
 * problem, register the selected associations into an alignment
 * measurement, then zero the selected affinity entries so the next round
 * must pick a disjoint association set. Stops after n_solutions rounds or
 * as soon as a solution falls below min_associations (later rounds can only
 * be sparser).
 */
inline std::vector<AlignmentMeasurement> mno_clipper(const ObjectMap& map_i,
                                                     const ObjectMap& map_j,
                                                     const ClipperParams& cparams,
                                                     const MnoParams& mparams, double now)
{
  std::vector<AlignmentMeasurement> measurements;
  if (map_i.empty() || map_j.empty()) return measurements;

  const auto assocs = putative_associations(map_i, map_j, cparams);
  if (assocs.empty()) return measurements;
  ClipperProblem problem = build_problem(map_i, map_j, assocs, cparams);

  for (int n = 0; n < mparams.n_solutions; ++n) {
    const ClipperSolution sol = solve(problem, cparams);
    if (static_cast<int>(sol.inliers.size()) < std::max(2, mparams.min_associations)) break;

    std::vector<Correspondence> pairs;
    AlignmentMeasurement meas;
    pairs.reserve(sol.inliers.size());
    for (int idx : sol.inliers) {
      const auto& a = assocs[idx];
      const auto& oi = map_i.objects[a.idx_i];
      const auto& oj = map_j.objects[a.idx_j];
      const double w = recency_weight(object_age(oi, now), object_age(oj, now));
      pairs.push_back({oi.centroid, oj.centroid, w});
      meas.association_ids.emplace_back(oi.id, oj.id);
    }

    bool fit_ok = true;
    try {
      meas.pose = weighted_arun_2d(pairs);
    } catch (const std::invalid_argument&) {
      fit_ok = false;  // coincident centroids; consume the round and move on
    }
    if (fit_ok) {
      meas.num_associations = static_cast<int>(sol.inliers.size());
      meas.density = sol.density;
      measurements.push_back(std::move(meas));
    }

    for (int p : sol.inliers) {
      for (int q : sol.inliers) problem.affinity(p, q) = 0.0;
    }
  }
  return measurements;
}

}  // namespace tcaff

#endif  // TCAFF_REGISTRATION_HPP
