#pragma once

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ngdf {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid transform stored as a position in meters and a unit quaternion.
///
/// The quaternion is normalized on construction and kept in the canonical
/// half of the double cover (w >= 0). Raw coefficient order is (w, x, y, z).
class Pose {
 public:
  Pose() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}

  Pose(const Vec3& position, const Quat& orientation)
      : position_(position), orientation_(canonicalize(orientation)) {}

  static Pose identity() { return Pose(); }

  /// Builds a pose from (px, py, pz, qw, qx, qy, qz).
  static Pose from_vector(const Vec7& v) {
    return Pose(v.head<3>(), Quat(v[3], v[4], v[5], v[6]));
  }

  static Pose from_translation(const Vec3& t) { return Pose(t, Quat::Identity()); }

  static Pose from_axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero()) {
    return Pose(t, Quat(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  const Vec3& position() const { return position_; }
  const Quat& orientation() const { return orientation_; }
  Mat3 rotation() const { return orientation_.toRotationMatrix(); }

  /// (px, py, pz, qw, qx, qy, qz)
  Vec7 to_vector() const {
    Vec7 v;
    v << position_, orientation_.w(), orientation_.x(), orientation_.y(), orientation_.z();
    return v;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation();
    m.topRightCorner<3, 1>() = position_;
    return m;
  }

  static Quat canonicalize(Quat q) {
    const double n2 = q.squaredNorm();
    if (!(n2 > 0.0) || !std::isfinite(n2)) return Quat::Identity();
    // Already unit to rounding: leave it, so reconstruction is exact.
    if (std::abs(n2 - 1.0) > 8 * std::numeric_limits<double>::epsilon()) q.coeffs() /= std::sqrt(n2);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return q;
  }

 private:
  Vec3 position_;
  Quat orientation_;
};

inline Vec3 transform_point(const Pose& pose, const Vec3& p) {
  return pose.orientation() * p + pose.position();
}

inline Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.orientation() * b.position() + a.position(), a.orientation() * b.orientation());
}

inline Pose inverse(const Pose& a) {
  const Quat inv = a.orientation().conjugate();
  return Pose(-(inv * a.position()), inv);
}

/// Angle between two rotations, in radians.
inline double rotation_angle(const Quat& a, const Quat& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

/// Derivative of R(q) p with respect to the raw quaternion coefficients
/// (w, x, y, z), using the homogeneous quadratic form of the rotation matrix.
/// Column k is d(R p)/d q_k; exact for unit q.
inline Eigen::Matrix<double, 3, 4> rotate_point_quat_jacobian(const Vec4& wxyz, const Vec3& p) {
  const double w = wxyz[0], x = wxyz[1], y = wxyz[2], z = wxyz[3];
  Eigen::Matrix<double, 3, 4> J;
  // R p = (w^2 - |v|^2) p + 2 (v.p) v + 2 w (v x p)
  const Vec3 v(x, y, z);
  const double vp = v.dot(p);
  const Vec3 vxp = v.cross(p);
  J.col(0) = 2.0 * w * p + 2.0 * vxp;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    J.col(k + 1) = -2.0 * v[k] * p + 2.0 * p[k] * v + 2.0 * vp * e + 2.0 * w * e.cross(p);
  }
  return J;
}

/// Uniform position in the ball of `radius` around `center`, uniform
/// orientation on SO(3) from a normalized Gaussian quaternion.
template <class Engine>
Pose random_pose_in_ball(const Vec3& center, double radius, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 dir(normal(rng), normal(rng), normal(rng));
  while (dir.squaredNorm() < 1e-24) dir = Vec3(normal(rng), normal(rng), normal(rng));
  const double r = radius * std::cbrt(unit(rng));
  Vec3 pos = center + dir.normalized() * r;
  if (radius == 0.0) pos = center;
  Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
  while (q.squaredNorm() < 1e-24) q = Vec4(normal(rng), normal(rng), normal(rng), normal(rng));
  return Pose(pos, Quat(q[0], q[1], q[2], q[3]));
}

inline Pose random_pose_in_ball(const Vec3& center, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_pose_in_ball(center, radius, rng);
}

/// Uniformly distributed rotation.
template <class Engine>
Quat random_rotation(Engine& rng) {
  return random_pose_in_ball(Vec3::Zero(), 0.0, rng).orientation();
}

}  // namespace ngdf
