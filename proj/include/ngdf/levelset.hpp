#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ngdf/adam.hpp"
#include "ngdf/control_points.hpp"
#include "ngdf/field.hpp"
#include "ngdf/grasp_oracle.hpp"
#include "ngdf/parallel.hpp"
#include "ngdf/se3.hpp"

namespace ngdf {

struct LevelSetConfig {
  int steps = 3000;
  double learning_rate = 1e-4;
  AdamParams adam;
  double success_threshold = 0.05;  // oracle mean distance, meters
  double start_radius = 0.5;        // starts are drawn in this ball around the centroid
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("level-set steps must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("level-set learning rate must be positive");
    if (!(start_radius >= 0)) throw std::invalid_argument("start radius must be >= 0");
  }
};

struct PoseOptimization {
  Pose pose;
  std::vector<Pose> path;  // start pose followed by every iterate
  double final_value = 0.0;
};

/// Adam descent of the mean field output over the 7 raw pose coordinates.
/// The quaternion is renormalized and put back in canonical form after
/// every update.
template <DistanceField Field>
PoseOptimization optimize_pose(const Field& field, int object_id, const Pose& q0, const LevelSetConfig& cfg) {
  cfg.validate();
  PoseOptimization out;
  out.path.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  out.path.push_back(q0);
  Vec7 x = q0.to_vector();
  AdamState adam;
  for (int k = 0; k < cfg.steps; ++k) {
    const FieldEval e = field.evaluate(object_id, Pose::from_vector(x));
    x -= adam.step(e.grad, cfg.learning_rate, cfg.adam).matrix();
    x = Pose::from_vector(x).to_vector();
    out.path.push_back(Pose::from_vector(x));
  }
  out.pose = out.path.back();
  out.final_value = field.value(object_id, out.pose);
  return out;
}

struct LevelSetTrial {
  Pose start;
  Pose final_pose;
  double final_field = 0.0;
  double oracle_distance = 0.0;
  bool success = false;
};

struct LevelSetMetrics {
  int trials = 0;
  double mean_oracle_distance = 0.0;  // train-set-error analog
  double std_oracle_distance = 0.0;
  double success_rate = 0.0;
  double mean_final_field = 0.0;
  double field_below_1e3 = 0.0;  // fraction of runs whose final field value < 1e-3
  std::vector<LevelSetTrial> per_trial;
};

/// Runs optimize_pose from `num_trials` random starts and scores the final
/// poses against the exact oracle. Trial i uses derive_seed(cfg.seed, i).
template <DistanceField Field>
LevelSetMetrics evaluate_levelset(const Field& field, int object_id, const GraspManifold& manifold,
                                  const ControlPointSet& cps, int num_trials, const LevelSetConfig& cfg,
                                  int oracle_density = 100000) {
  if (num_trials < 1) throw std::invalid_argument("num_trials must be >= 1");
  cfg.validate();
  const GraspOracle oracle(manifold, cps, oracle_density);
  LevelSetMetrics m;
  m.trials = num_trials;
  m.per_trial.resize(static_cast<std::size_t>(num_trials));
  parallel_for(m.per_trial.size(), [&](std::size_t i) {
    LevelSetTrial& t = m.per_trial[i];
    t.start = random_pose_in_ball(manifold.centroid(), cfg.start_radius, derive_seed(cfg.seed, i));
    const PoseOptimization r = optimize_pose(field, object_id, t.start, cfg);
    t.final_pose = r.pose;
    t.final_field = r.final_value;
    t.oracle_distance = oracle.nearest(r.pose).mean();
    t.success = t.oracle_distance < cfg.success_threshold;
  });
  Eigen::ArrayXd d(num_trials);
  for (int i = 0; i < num_trials; ++i) {
    const auto& t = m.per_trial[i];
    d[i] = t.oracle_distance;
    m.success_rate += t.success ? 1.0 : 0.0;
    m.mean_final_field += t.final_field;
    m.field_below_1e3 += t.final_field < 1e-3 ? 1.0 : 0.0;
  }
  m.success_rate /= num_trials;
  m.mean_final_field /= num_trials;
  m.field_below_1e3 /= num_trials;
  m.mean_oracle_distance = d.mean();
  m.std_oracle_distance = std::sqrt((d - d.mean()).square().mean());
  return m;
}

/// One pose per line: px py pz qw qx qy qz.
inline void write_path(std::ostream& out, const std::vector<Pose>& path) {
  char buf[256];
  for (const auto& p : path) {
    const Vec7 v = p.to_vector();
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", v[0], v[1], v[2], v[3], v[4], v[5],
                  v[6]);
    out << buf;
  }
}

}  // namespace ngdf
