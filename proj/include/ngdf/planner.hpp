#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ngdf/adam.hpp"
#include "ngdf/field.hpp"
#include "ngdf/kinematics.hpp"
#include "ngdf/se3.hpp"

namespace ngdf {

/// Waypoints x joints. Row 0 is the fixed start; every other row is free,
/// including the goal.
using Trajectory = Eigen::MatrixXd;

inline void check_trajectory(const Trajectory& xi) {
  if (xi.rows() < 3) throw std::invalid_argument("trajectory needs at least 3 waypoints");
}

struct SphereObstacle {
  Vec3 center;
  double radius;
};

struct BoxObstacle {
  Vec3 min;
  Vec3 max;
};

/// Obstacles plus the placement of the object to grasp. The field is queried
/// with the gripper pose expressed in `object_pose`.
struct SceneSpec {
  std::vector<SphereObstacle> spheres;
  std::vector<BoxObstacle> boxes;
  Pose object_pose;
  int object_id = 0;
  std::optional<JointConfig> start;

  const Vec3& object_center() const { return object_pose.position(); }

  void validate() const {
    for (const auto& s : spheres)
      if (!(s.radius > 0)) throw std::invalid_argument("obstacle sphere radius must be positive");
    for (const auto& b : boxes)
      if (!((b.max - b.min).minCoeff() > 0)) throw std::invalid_argument("obstacle box is degenerate");
  }

  bool empty() const { return spheres.empty() && boxes.empty(); }

  /// Signed distance to the nearest obstacle and its gradient. +inf with a
  /// zero gradient when the scene has no obstacles.
  double signed_distance(const Vec3& x, Vec3* grad = nullptr) const {
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_grad = Vec3::Zero();
    for (const auto& s : spheres) {
      const Vec3 d = x - s.center;
      const double n = d.norm();
      const double sd = n - s.radius;
      if (sd < best) {
        best = sd;
        best_grad = n > 0 ? Vec3(d / n) : Vec3::UnitZ();
      }
    }
    for (const auto& b : boxes) {
      const Vec3 c = 0.5 * (b.min + b.max);
      const Vec3 half = 0.5 * (b.max - b.min);
      const Vec3 rel = x - c;
      const Vec3 q = rel.cwiseAbs() - half;
      const Vec3 outside = q.cwiseMax(0.0);
      const double out_n = outside.norm();
      double sd;
      Vec3 g;
      if (out_n > 0) {
        sd = out_n;
        g = outside.cwiseProduct(rel.unaryExpr([](double v) { return v < 0 ? -1.0 : 1.0; })) / out_n;
      } else {
        Eigen::Index k;
        sd = q.maxCoeff(&k);
        g = Vec3::Zero();
        g[k] = rel[k] < 0 ? -1.0 : 1.0;
      }
      if (sd < best) {
        best = sd;
        best_grad = g;
      }
    }
    if (grad) *grad = best_grad;
    return best;
  }
};

enum class StepMode { adam, fixed };
enum class InitMode { ik, constant };

struct PlannerConfig {
  int iterations = 500;
  double learning_rate = 3e-3;
  AdamParams adam;
  double grasp_weight = 10.0;   // lambda_1
  double smooth_weight = 1.0;   // lambda_2
  double obstacle_weight = 1.0; // lambda_3
  double margin = 0.05;         // epsilon, meters
  int waypoints = 30;
  StepMode step_mode = StepMode::adam;
  InitMode init_mode = InitMode::ik;
  double ik_radius = 0.3;
  int ik_iterations = 200;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    if (grasp_weight < 0 || smooth_weight < 0 || obstacle_weight < 0)
      throw std::invalid_argument("cost weights must be >= 0");
    if (!(margin > 0)) throw std::invalid_argument("obstacle margin must be positive");
    if (waypoints < 3) throw std::invalid_argument("waypoint count must be >= 3");
  }
};

struct CostGrad {
  double cost = 0.0;
  Eigen::MatrixXd grad;
};

/// Half squared norm of first differences with the start row fixed.
/// Gradient row 0 is zero.
inline CostGrad smoothness_cost(const Trajectory& xi) {
  check_trajectory(xi);
  const Eigen::Index T = xi.rows();
  const Eigen::MatrixXd diff = xi.bottomRows(T - 1) - xi.topRows(T - 1);
  CostGrad r;
  r.cost = 0.5 * diff.squaredNorm();
  r.grad = Eigen::MatrixXd::Zero(T, xi.cols());
  r.grad.bottomRows(T - 1) += diff;
  r.grad.middleRows(1, T - 2) -= diff.bottomRows(T - 2);
  return r;
}

/// A = K^T K restricted to the free rows: tridiagonal (-1, 2, -1) with a
/// final diagonal entry of 1 because the goal is free.
inline Eigen::MatrixXd smoothness_metric(Eigen::Index waypoints) {
  const Eigen::Index n = waypoints - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = i + 1 < n ? 2.0 : 1.0;
    if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = -1.0;
  }
  return A;
}

/// Piecewise obstacle penalty on clearance s with margin eps.
inline double hinge_cost(double s, double eps) {
  if (s < 0) return -s + 0.5 * eps;
  if (s <= eps) return (s - eps) * (s - eps) / (2.0 * eps);
  return 0.0;
}

inline double hinge_slope(double s, double eps) {
  if (s < 0) return -1.0;
  if (s <= eps) return (s - eps) / eps;
  return 0.0;
}

/// Hinge cost on body-sphere clearance summed over waypoints and spheres.
/// Gradient row 0 is zero.
inline CostGrad obstacle_cost(const Trajectory& xi, const KinematicChain& chain, const SceneSpec& scene, double eps) {
  check_trajectory(xi);
  CostGrad r;
  r.grad = Eigen::MatrixXd::Zero(xi.rows(), xi.cols());
  if (scene.empty()) return r;
  for (Eigen::Index t = 0; t < xi.rows(); ++t) {
    const FkResult f = fk(chain, xi.row(t).transpose());
    for (std::size_t k = 0; k < chain.spheres().size(); ++k) {
      Vec3 n;
      const double s = scene.signed_distance(f.sphere_centers[k], &n) - chain.spheres()[k].radius;
      r.cost += hinge_cost(s, eps);
      const double slope = hinge_slope(s, eps);
      if (t > 0 && slope != 0.0) r.grad.row(t) += slope * (n.transpose() * sphere_jacobian(chain, f, k));
    }
  }
  return r;
}

/// Smallest body-sphere clearance over every waypoint.
inline double min_clearance(const Trajectory& xi, const KinematicChain& chain, const SceneSpec& scene) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < xi.rows(); ++t) {
    const FkResult f = fk(chain, xi.row(t).transpose());
    for (std::size_t k = 0; k < chain.spheres().size(); ++k)
      best = std::min(best, scene.signed_distance(f.sphere_centers[k]) - chain.spheres()[k].radius);
  }
  return best;
}

/// Gripper pose of a configuration expressed in the object frame.
inline Pose gripper_in_object(const KinematicChain& chain, const JointConfig& q, const SceneSpec& scene) {
  return compose(inverse(scene.object_pose), fk(chain, q).gripper);
}

/// Mean field distance at the final waypoint. Only the last gradient row is
/// nonzero: field query gradient chained through the pose Jacobian.
template <DistanceField Field>
CostGrad grasp_cost(const Trajectory& xi, const KinematicChain& chain, const Field& field, const SceneSpec& scene) {
  check_trajectory(xi);
  const JointConfig q = xi.bottomRows(1).transpose();
  const Pose to_object = inverse(scene.object_pose);
  const FieldEval e = field.evaluate(scene.object_id, compose(to_object, fk(chain, q).gripper));
  CostGrad r;
  r.cost = e.value;
  r.grad = Eigen::MatrixXd::Zero(xi.rows(), xi.cols());
  r.grad.bottomRows(1) = e.grad.transpose() * pose_jacobian(chain, q, to_object);
  return r;
}

/// One CHOMP update. The gradient on the free rows is preconditioned by
/// A^-1; in adam mode the moments track the preconditioned gradient.
class ChompStepper {
 public:
  ChompStepper(Eigen::Index waypoints, Eigen::Index dof) : metric_(smoothness_metric(waypoints)) {
    llt_.compute(metric_);
    if (llt_.info() != Eigen::Success) throw std::runtime_error("smoothness metric is not positive definite");
    adam_.reset(waypoints - 1, dof);
  }

  const Eigen::MatrixXd& metric() const { return metric_; }

  Eigen::MatrixXd precondition(const Eigen::MatrixXd& grad) const {
    return llt_.solve(grad.bottomRows(grad.rows() - 1));
  }

  /// Returns the updated trajectory; row 0 is copied through unchanged.
  Trajectory step(const Trajectory& xi, const Eigen::MatrixXd& grad, const PlannerConfig& cfg,
                  const KinematicChain* chain = nullptr) {
    if (grad.rows() != xi.rows() || grad.cols() != xi.cols())
      throw std::invalid_argument("gradient shape does not match trajectory");
    const Eigen::MatrixXd g = precondition(grad);
    Eigen::MatrixXd delta;
    if (cfg.step_mode == StepMode::adam)
      delta = adam_.step(g, cfg.learning_rate, cfg.adam).matrix();
    else
      delta = cfg.learning_rate * g;
    Trajectory out = xi;
    out.bottomRows(xi.rows() - 1) -= delta;
    if (chain)
      for (Eigen::Index t = 1; t < out.rows(); ++t) out.row(t) = chain->clamp(out.row(t).transpose()).transpose();
    return out;
  }

 private:
  Eigen::MatrixXd metric_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  AdamState adam_;
};

/// Straight joint-space line from `start` to `goal` with `waypoints` rows.
inline Trajectory interpolate(const JointConfig& start, const JointConfig& goal, int waypoints) {
  Trajectory xi(waypoints, start.size());
  for (int t = 0; t < waypoints; ++t) {
    const double a = static_cast<double>(t) / (waypoints - 1);
    xi.row(t) = ((1.0 - a) * start + a * goal).transpose();
  }
  return xi;
}

struct IterationLog {
  double total = 0.0;
  double grasp = 0.0;
  double smooth = 0.0;
  double obstacle = 0.0;
};

enum class PlanStatus { ok, ik_not_converged };

struct PlanResult {
  Trajectory trajectory;
  std::vector<IterationLog> log;
  double final_grasp_distance = 0.0;
  int best_iteration = 0;
  PlanStatus status = PlanStatus::ok;
  double wall_time = 0.0;
};

/// Initial trajectory per the init mode. Returns the status as well since an
/// IK failure falls back to the constant trajectory.
inline std::pair<Trajectory, PlanStatus> initial_trajectory(const KinematicChain& chain, const SceneSpec& scene,
                                                            const JointConfig& start, const PlannerConfig& cfg) {
  if (cfg.init_mode == InitMode::ik) {
    const IkResult ik = ik_to_ball(chain, scene.object_center(), cfg.ik_radius, start, cfg.ik_iterations);
    if (ik.converged) return {interpolate(start, ik.q, cfg.waypoints), PlanStatus::ok};
    return {interpolate(start, start, cfg.waypoints), PlanStatus::ik_not_converged};
  }
  return {interpolate(start, start, cfg.waypoints), PlanStatus::ok};
}

/// Goal-set CHOMP: minimizes the weighted sum of grasp, smoothness and
/// obstacle costs from a fixed start; returns the lowest-cost iterate.
template <DistanceField Field>
PlanResult plan(const KinematicChain& chain, const SceneSpec& scene, const Field& field, const PlannerConfig& cfg) {
  cfg.validate();
  scene.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const JointConfig start = scene.start ? *scene.start : chain.home();
  chain.check(start);
  auto [xi, status] = initial_trajectory(chain, scene, start, cfg);

  PlanResult out;
  out.status = status;
  ChompStepper stepper(xi.rows(), xi.cols());
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= cfg.iterations; ++it) {
    const CostGrad g = grasp_cost(xi, chain, field, scene);
    const CostGrad s = smoothness_cost(xi);
    const CostGrad o = obstacle_cost(xi, chain, scene, cfg.margin);
    IterationLog entry{cfg.grasp_weight * g.cost + cfg.smooth_weight * s.cost + cfg.obstacle_weight * o.cost, g.cost,
                       s.cost, o.cost};
    if (entry.total < best) {
      best = entry.total;
      out.trajectory = xi;
      out.best_iteration = it;
      out.final_grasp_distance = g.cost;
    }
    if (it == cfg.iterations) break;
    out.log.push_back(entry);
    const Eigen::MatrixXd total = cfg.grasp_weight * g.grad + cfg.smooth_weight * s.grad + cfg.obstacle_weight * o.grad;
    xi = stepper.step(xi, total, cfg, &chain);
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Scene file grammar (`#` starts a comment):
//   object    px py pz  [qw qx qy qz]
//   object_id k
//   sphere    cx cy cz  r
//   box       minx miny minz  maxx maxy maxz
//   start     q1 ... qn

inline SceneSpec parse_scene(std::istream& in) {
  SceneSpec s;
  std::string line;
  int lineno = 0;
  bool have_object = false;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("scene file line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kw;
    if (!(ss >> kw)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) fail("non-numeric token");
    if (kw == "object") {
      if (v.size() == 3)
        s.object_pose = Pose::from_translation(Vec3(v[0], v[1], v[2]));
      else if (v.size() == 7)
        s.object_pose = Pose(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]));
      else
        fail("object expects 3 or 7 numbers");
      have_object = true;
    } else if (kw == "object_id") {
      if (v.size() != 1 || v[0] < 0 || v[0] != std::floor(v[0])) fail("object_id expects a nonnegative integer");
      s.object_id = static_cast<int>(v[0]);
    } else if (kw == "sphere") {
      if (v.size() != 4) fail("sphere expects cx cy cz r");
      s.spheres.push_back({Vec3(v[0], v[1], v[2]), v[3]});
    } else if (kw == "box") {
      if (v.size() != 6) fail("box expects min and max corners");
      s.boxes.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])});
    } else if (kw == "start") {
      if (v.empty()) fail("start expects joint values");
      s.start = Eigen::Map<JointConfig>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      fail("unknown directive '" + kw + "'");
    }
  }
  if (!have_object) throw std::runtime_error("scene file has no object line");
  s.validate();
  return s;
}

inline void write_scene(std::ostream& out, const SceneSpec& s) {
  char buf[256];
  const Vec7 o = s.object_pose.to_vector();
  std::snprintf(buf, sizeof buf, "object %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", o[0], o[1], o[2], o[3], o[4],
                o[5], o[6]);
  out << buf << "object_id " << s.object_id << '\n';
  for (const auto& sp : s.spheres) {
    std::snprintf(buf, sizeof buf, "sphere %.17g %.17g %.17g %.17g\n", sp.center.x(), sp.center.y(), sp.center.z(),
                  sp.radius);
    out << buf;
  }
  for (const auto& b : s.boxes) {
    std::snprintf(buf, sizeof buf, "box %.17g %.17g %.17g %.17g %.17g %.17g\n", b.min.x(), b.min.y(), b.min.z(),
                  b.max.x(), b.max.y(), b.max.z());
    out << buf;
  }
  if (s.start) {
    out << "start";
    for (Eigen::Index i = 0; i < s.start->size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", (*s.start)[i]);
      out << buf;
    }
    out << '\n';
  }
}

inline SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  return parse_scene(in);
}

/// One row per waypoint, space separated.
inline void write_trajectory(std::ostream& out, const Trajectory& xi) {
  char buf[32];
  for (Eigen::Index t = 0; t < xi.rows(); ++t) {
    for (Eigen::Index j = 0; j < xi.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%s%.17g", j ? " " : "", xi(t, j));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ngdf
