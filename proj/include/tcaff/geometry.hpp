/**
 * @file geometry.hpp
 * @brief SE(2) pose algebra and angle arithmetic shared by all modules.
 *
 * Convention: a Pose2 named T_a_b maps points expressed in frame b into
 * frame a, i.e. p_a = R(theta) * p_b + t. Composition follows the group
 * law compose(T_a_b, T_b_c) = T_a_c.
 */

#ifndef TCAFF_GEOMETRY_HPP
#define TCAFF_GEOMETRY_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tcaff {

/// Normalizes an angle to (-pi, pi]. Total on finite inputs.
inline double wrap_angle(double a)
{
  if (!std::isfinite(a)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;
}

/// A 2D rigid transform / robot pose. theta is kept in (-pi, pi].
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  static Pose2 identity() { return Pose2(); }

  Eigen::Vector3d vec() const { return {x, y, theta}; }
  static Pose2 from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

  /// 3x3 homogeneous matrix form.
  Eigen::Matrix3d matrix() const
  {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix3d m;
    m << c, -s, x,
         s,  c, y,
         0,  0, 1;
    return m;
  }
};

/// Group composition: compose(T_a_b, T_b_c) = T_a_c.
inline Pose2 compose(const Pose2& a, const Pose2& b)
{
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y,
          a.y + s * b.x + c * b.y,
          wrap_angle(a.theta + b.theta)};
}

inline Pose2 inverse(const Pose2& a)
{
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.theta};
}

/// Maps a 2D point through the transform: p_out = R(theta) p + t.
inline Eigen::Vector2d transform_point(const Pose2& T, const Eigen::Vector2d& p)
{
  const double c = std::cos(T.theta), s = std::sin(T.theta);
  return {T.x + c * p.x() - s * p.y(), T.y + s * p.x() + c * p.y()};
}

/// Same transform applied to a 3D point; z passes through untouched.
inline Eigen::Vector3d transform_point(const Pose2& T, const Eigen::Vector3d& p)
{
  const Eigen::Vector2d q = transform_point(T, Eigen::Vector2d(p.x(), p.y()));
  return {q.x(), q.y(), p.z()};
}

/**
 * Ground-truth alignment between two robots' odometry frames.
 *
 * Each robot's odom-to-world transform is T_odom_world = T_odom_robot *
 * (T_world_robot)^-1; the alignment is T_odomi_odomj = T_odomi_world *
 * (T_odomj_world)^-1. With drift-free odometry (odom poses equal to world
 * poses) this returns the identity.
 */
inline Pose2 gt_alignment(const Pose2& odom_pose_i, const Pose2& world_pose_i,
                          const Pose2& odom_pose_j, const Pose2& world_pose_j)
{
  const Pose2 odomi_world = compose(odom_pose_i, inverse(world_pose_i));
  const Pose2 odomj_world = compose(odom_pose_j, inverse(world_pose_j));
  return compose(odomi_world, inverse(odomj_world));
}

/// Gaussian belief over a 2D frame alignment [x, y, theta].
struct Gaussian3 {
  Eigen::Vector3d mean{Eigen::Vector3d::Zero()};
  Eigen::Matrix3d cov{Eigen::Matrix3d::Identity()};

  Pose2 mean_pose() const { return Pose2::from_vec(mean); }

  /// Symmetric to 1e-9 with strictly positive eigenvalues.
  bool valid(double sym_tol = 1e-9) const
  {
    if (!mean.allFinite() || !cov.allFinite()) return false;
    if (((cov - cov.transpose()).cwiseAbs().maxCoeff()) > sym_tol) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    return es.eigenvalues().minCoeff() > 0.0;
  }
};

}  // namespace tcaff

#endif  // TCAFF_GEOMETRY_HPP
