#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include "ngdf/control_points.hpp"
#include "ngdf/se3.hpp"

namespace ngdf {

using JointConfig = Eigen::VectorXd;

/// Revolute joint: a fixed offset from the parent frame, then a rotation
/// about `axis` (expressed in the offset frame).
struct Joint {
  Pose offset;
  Vec3 axis = Vec3::UnitZ();
  double lower = -std::numbers::pi;
  double upper = std::numbers::pi;
};

/// Collision proxy rigidly attached to the frame of joint `joint`.
struct BodySphere {
  int joint = 0;
  Vec3 offset = Vec3::Zero();
  double radius = 0.05;
};

class KinematicChain {
 public:
  KinematicChain() = default;
  KinematicChain(std::vector<Joint> joints, std::vector<BodySphere> spheres, Pose tool,
                 JointConfig home = JointConfig())
      : joints_(std::move(joints)), spheres_(std::move(spheres)), tool_(tool), home_(std::move(home)) {
    for (auto& j : joints_) {
      const double n = j.axis.norm();
      if (!(n > 0)) throw std::invalid_argument("joint axis must be nonzero");
      j.axis /= n;
      if (!(j.lower < j.upper)) throw std::invalid_argument("joint limits must be a nonempty interval");
    }
    for (const auto& s : spheres_) {
      if (s.joint < 0 || s.joint >= dof()) throw std::invalid_argument("body sphere joint index out of range");
      if (!(s.radius > 0)) throw std::invalid_argument("body sphere radius must be positive");
    }
    if (home_.size() == 0) home_ = JointConfig::Zero(dof());
    if (home_.size() != dof()) throw std::invalid_argument("home configuration has wrong length");
  }

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<BodySphere>& spheres() const { return spheres_; }
  const Pose& tool() const { return tool_; }
  const JointConfig& home() const { return home_; }

  JointConfig lower() const {
    JointConfig v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[i].lower;
    return v;
  }
  JointConfig upper() const {
    JointConfig v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints_[i].upper;
    return v;
  }
  JointConfig clamp(const JointConfig& q) const { return q.cwiseMax(lower()).cwiseMin(upper()); }

  void check(const JointConfig& q) const {
    if (q.size() != dof())
      throw std::invalid_argument("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
                                  std::to_string(dof()));
  }

 private:
  std::vector<Joint> joints_;
  std::vector<BodySphere> spheres_;
  Pose tool_;
  JointConfig home_;
};

struct FkResult {
  Pose gripper;
  std::vector<Vec3> sphere_centers;
  std::vector<Pose> frames;       // frame of each joint after its rotation
  std::vector<Vec3> world_axes;   // joint axes in the world frame
};

inline FkResult fk(const KinematicChain& chain, const JointConfig& q) {
  chain.check(q);
  FkResult r;
  Pose T;
  for (int j = 0; j < chain.dof(); ++j) {
    const Joint& joint = chain.joints()[j];
    T = compose(T, joint.offset);
    r.world_axes.push_back(T.orientation() * joint.axis);
    T = compose(T, Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(q[j], joint.axis))));
    r.frames.push_back(T);
  }
  r.gripper = compose(T, chain.tool());
  for (const auto& s : chain.spheres()) r.sphere_centers.push_back(transform_point(r.frames[s.joint], s.offset));
  return r;
}

/// d(world point)/dq for a point attached to the frame of joint `link`.
inline Eigen::Matrix3Xd point_jacobian(const FkResult& f, int link, const Vec3& world_point, int dof) {
  Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, dof);
  for (int j = 0; j <= link; ++j) J.col(j) = f.world_axes[j].cross(world_point - f.frames[j].position());
  return J;
}

/// Jacobian of the gripper's control points in the world frame, one
/// 3-row block per control point: ((N+1) * 3) x dof.
inline Eigen::MatrixXd fk_jacobian(const KinematicChain& chain, const JointConfig& q, const ControlPointSet& cps) {
  const FkResult f = fk(chain, q);
  Eigen::MatrixXd J(3 * cps.size(), chain.dof());
  for (std::size_t i = 0; i < cps.size(); ++i)
    J.middleRows(3 * i, 3) = point_jacobian(f, chain.dof() - 1, transform_point(f.gripper, cps[i]), chain.dof());
  return J;
}

/// Jacobian of the 7 raw pose coordinates (position, canonical quaternion
/// w x y z) of `frame ∘ FK(q)` with respect to q.
inline Eigen::Matrix<double, 7, Eigen::Dynamic> pose_jacobian(const KinematicChain& chain, const JointConfig& q,
                                                              const Pose& frame = Pose()) {
  const FkResult f = fk(chain, q);
  const int n = chain.dof();
  Eigen::Matrix<double, 7, Eigen::Dynamic> J(7, n);
  const Eigen::Matrix3Xd Jp = point_jacobian(f, n - 1, f.gripper.position(), n);
  J.topRows<3>() = frame.rotation() * Jp;
  const Quat qg = f.gripper.orientation();
  const Quat composed = frame.orientation() * qg;
  const double sign = composed.w() < 0.0 ? -1.0 : 1.0;
  for (int j = 0; j < n; ++j) {
    // dq/dt = 1/2 (0, w) ⊗ q for a world-frame angular velocity w.
    const Vec3 w = f.world_axes[j];
    const Quat dq = Quat(0.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z()) * qg;
    const Quat dc = frame.orientation() * dq;
    J.block<4, 1>(3, j) = sign * Vec4(dc.w(), dc.x(), dc.y(), dc.z());
  }
  return J;
}

/// Jacobian of one body sphere center.
inline Eigen::Matrix3Xd sphere_jacobian(const KinematicChain& chain, const FkResult& f, std::size_t sphere) {
  const BodySphere& s = chain.spheres()[sphere];
  return point_jacobian(f, s.joint, f.sphere_centers[sphere], chain.dof());
}

struct IkOptions {
  double damping = 0.05;
  double max_step = 0.2;
};

struct IkResult {
  JointConfig q;
  bool converged = false;
  int iterations = 0;
  double distance = 0.0;
};

/// Position-only damped least squares on the gripper origin until it lies
/// within `radius` of `target`. Each step is capped at `max_step` radians
/// (largest joint) and clamped to the joint limits.
inline IkResult ik_to_ball(const KinematicChain& chain, const Vec3& target, double radius, const JointConfig& q_init,
                           int max_iters, const IkOptions& opt = {}) {
  if (!(radius > 0)) throw std::invalid_argument("ik radius must be positive");
  chain.check(q_init);
  IkResult r;
  r.q = chain.clamp(q_init);
  for (;;) {
    const FkResult f = fk(chain, r.q);
    const Vec3 err = target - f.gripper.position();
    r.distance = err.norm();
    if (r.distance <= radius) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= max_iters) return r;
    const Eigen::Matrix3Xd J = point_jacobian(f, chain.dof() - 1, f.gripper.position(), chain.dof());
    const Mat3 JJt = J * J.transpose() + opt.damping * opt.damping * Mat3::Identity();
    JointConfig dq = J.transpose() * JJt.ldlt().solve(err);
    const double biggest = dq.cwiseAbs().maxCoeff();
    if (biggest > opt.max_step) dq *= opt.max_step / biggest;
    r.q = chain.clamp(r.q + dq);
    ++r.iterations;
  }
}

// Chain file grammar (one directive per line, `#` starts a comment):
//   joint  px py pz  qw qx qy qz  ax ay az  lower upper
//   sphere joint_index  x y z  radius
//   tool   px py pz  qw qx qy qz
//   home   q1 ... qn
// Joints are listed base to tip; `sphere` may only reference earlier joints.

inline KinematicChain parse_chain(std::istream& in) {
  std::vector<Joint> joints;
  std::vector<BodySphere> spheres;
  Pose tool;
  std::vector<double> home;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("chain file line " + std::to_string(lineno) + ": " + msg);
  };
  auto read_pose = [&](std::istringstream& ss) {
    Vec7 v;
    for (int k = 0; k < 7; ++k)
      if (!(ss >> v[k])) fail("expected pose (px py pz qw qx qy qz)");
    return Pose::from_vector(v);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kw;
    if (!(ss >> kw)) continue;
    if (kw == "joint") {
      Joint j;
      j.offset = read_pose(ss);
      if (!(ss >> j.axis.x() >> j.axis.y() >> j.axis.z() >> j.lower >> j.upper)) fail("expected axis and limits");
      joints.push_back(j);
    } else if (kw == "sphere") {
      BodySphere s;
      if (!(ss >> s.joint >> s.offset.x() >> s.offset.y() >> s.offset.z() >> s.radius)) fail("bad sphere");
      if (s.joint < 0 || s.joint >= static_cast<int>(joints.size())) fail("sphere references unknown joint");
      spheres.push_back(s);
    } else if (kw == "tool") {
      tool = read_pose(ss);
    } else if (kw == "home") {
      double v;
      while (ss >> v) home.push_back(v);
    } else {
      fail("unknown directive '" + kw + "'");
    }
    std::string extra;
    if (kw != "home" && (ss >> extra)) fail("trailing tokens");
  }
  if (joints.empty()) throw std::runtime_error("chain file has no joints");
  JointConfig h = Eigen::Map<JointConfig>(home.data(), static_cast<Eigen::Index>(home.size()));
  return KinematicChain(std::move(joints), std::move(spheres), tool, h);
}

inline void write_chain(std::ostream& out, const KinematicChain& chain) {
  char buf[512];
  auto pose_str = [&](const Pose& p) {
    const Vec7 v = p.to_vector();
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g  %.17g %.17g %.17g %.17g", v[0], v[1], v[2], v[3], v[4], v[5],
                  v[6]);
    return std::string(buf);
  };
  out << "# joint px py pz qw qx qy qz ax ay az lower upper\n";
  for (const auto& j : chain.joints()) {
    const std::string p = pose_str(j.offset);
    std::snprintf(buf, sizeof buf, "  %.17g %.17g %.17g  %.17g %.17g", j.axis.x(), j.axis.y(), j.axis.z(), j.lower,
                  j.upper);
    out << "joint " << p << buf << '\n';
  }
  out << "tool " << pose_str(chain.tool()) << '\n';
  out << "home";
  for (Eigen::Index i = 0; i < chain.home().size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.17g", chain.home()[i]);
    out << buf;
  }
  out << '\n';
  for (const auto& s : chain.spheres()) {
    std::snprintf(buf, sizeof buf, "sphere %d %.17g %.17g %.17g %.17g\n", s.joint, s.offset.x(), s.offset.y(),
                  s.offset.z(), s.radius);
    out << buf;
  }
}

inline KinematicChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chain file: " + path);
  return parse_chain(in);
}

/// Seven-joint arm with Franka Panda proportions. Same content as
/// data/franka.chain.
inline const char* default_chain_text() {
  return R"(# 7-DOF arm with Franka Panda link offsets and joint limits.
# joint px py pz  qw qx qy qz  ax ay az  lower upper
joint 0 0 0.333        1 0 0 0                                        0 0 1  -2.8973 2.8973
joint 0 0 0            0.70710678118654757 -0.70710678118654757 0 0   0 0 1  -1.7628 1.7628
joint 0 -0.316 0       0.70710678118654757 0.70710678118654757 0 0    0 0 1  -2.8973 2.8973
joint 0.0825 0 0       0.70710678118654757 0.70710678118654757 0 0    0 0 1  -3.0718 -0.0698
joint -0.0825 0.384 0  0.70710678118654757 -0.70710678118654757 0 0   0 0 1  -2.8973 2.8973
joint 0 0 0            0.70710678118654757 0.70710678118654757 0 0    0 0 1  -0.0175 3.7525
joint 0.088 0 0        0.70710678118654757 0.70710678118654757 0 0    0 0 1  -2.8973 2.8973
# flange (0.107 along link 7) then the hand turned so fingers open along gripper x
tool 0 0 0.107  0.92387953251128674 0 0 0.38268343236508978
home 0 -0.785398 0 -2.356194 0 1.570796 0.785398
# sphere joint  x y z  radius
sphere 0  0 -0.08 0      0.06
sphere 0  0 0 -0.12      0.06
sphere 1  0 0 0.05       0.06
sphere 1  0 -0.14 0      0.06
sphere 2  0 0 -0.08      0.06
sphere 2  0.08 0.04 0    0.055
sphere 3  0 0 0.04       0.055
sphere 3  -0.08 0.08 0   0.055
sphere 4  0 0.06 0       0.06
sphere 4  0 0.03 -0.2    0.055
sphere 4  0 0.07 -0.1    0.04
sphere 5  0 0 0          0.06
sphere 5  0.08 0.01 0    0.055
sphere 6  0 0 0.07       0.05
sphere 6  0.035 0.035 0.16   0.035
sphere 6  -0.035 -0.035 0.16 0.035
)";
}

inline KinematicChain default_chain() {
  std::istringstream in(default_chain_text());
  return parse_chain(in);
}

}  // namespace ngdf
