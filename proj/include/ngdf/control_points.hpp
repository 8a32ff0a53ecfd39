#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "ngdf/se3.hpp"

namespace ngdf {

/// Fixed points in the gripper frame. Two poses are compared by how far each
/// of these points moves between them.
class ControlPointSet {
 public:
  /// Requires at least 4 points, not all on one line.
  explicit ControlPointSet(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.size() < 4) throw std::invalid_argument("control point set needs at least 4 points");
    // Three non-collinear points already pin down a proper rigid motion, so
    // a zero distance vector implies identical poses.
    Eigen::MatrixXd diffs(3, points_.size() - 1);
    for (std::size_t i = 1; i < points_.size(); ++i) diffs.col(i - 1) = points_[i] - points_[0];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(diffs);
    lu.setThreshold(1e-9);
    if (lu.rank() < 2) throw std::invalid_argument("control points are collinear");
  }

  /// Parallel-jaw layout: origin, palm center, finger bases, fingertips.
  static ControlPointSet parallel_jaw() {
    return ControlPointSet({Vec3(0, 0, 0), Vec3(0, 0, 0.066), Vec3(0.04, 0, 0.066),
                            Vec3(-0.04, 0, 0.066), Vec3(0.04, 0, 0.112), Vec3(-0.04, 0, 0.112)});
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vec3>& points() const { return points_; }

  /// Control points mapped into the frame of `pose`, as a 3 x (N+1) matrix.
  Eigen::Matrix3Xd transformed(const Pose& pose) const {
    Eigen::Matrix3Xd out(3, points_.size());
    const Mat3 R = pose.rotation();
    for (std::size_t i = 0; i < points_.size(); ++i) out.col(i) = R * points_[i] + pose.position();
    return out;
  }

 private:
  std::vector<Vec3> points_;
};

/// Per-point L1 displacement between the control points placed at q and at g.
inline Eigen::VectorXd control_point_distance(const Pose& q, const Pose& g, const ControlPointSet& cps) {
  const Eigen::Matrix3Xd a = cps.transformed(q);
  const Eigen::Matrix3Xd b = cps.transformed(g);
  return (a - b).cwiseAbs().colwise().sum().transpose();
}

/// Parses a gripper file: one `x y z` per line, `#` starts a comment.
inline ControlPointSet parse_control_points(std::istream& in) {
  std::vector<Vec3> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> z)) throw std::runtime_error("gripper file line " + std::to_string(lineno) + ": expected x y z");
    std::string extra;
    if (ss >> extra) throw std::runtime_error("gripper file line " + std::to_string(lineno) + ": trailing tokens");
    pts.emplace_back(x, y, z);
  }
  return ControlPointSet(std::move(pts));
}

inline ControlPointSet load_control_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gripper file: " + path);
  return parse_control_points(in);
}

}  // namespace ngdf
