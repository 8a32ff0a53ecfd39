#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ngdf/grasp_oracle.hpp"
#include "ngdf/kinematics.hpp"
#include "ngdf/parallel.hpp"
#include "ngdf/planner.hpp"

namespace ngdf {

struct SuiteConfig {
  int scenes = 30;
  std::uint64_t seed = 0;
  Vec3 object_center = Vec3(0.5, 0.0, 0.3);
  double center_jitter = 0.05;     // half-width of the uniform offset per axis
  double obstacle_radius = 0.05;
  double obstacle_distance = 0.2;  // from the object center, in a random horizontal direction
  double success_threshold = 0.05; // oracle mean distance, meters
  int oracle_density = 100000;
};

/// Scene `index` of a suite: the object at a jittered center with a uniform
/// random orientation, and one sphere obstacle beside it. The obstacle is
/// redrawn until the start configuration clears it by the planner margin.
inline SceneSpec make_suite_scene(const KinematicChain& chain, const SuiteConfig& cfg, int index, double margin) {
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SceneSpec s;
  const Vec3 center = cfg.object_center + cfg.center_jitter * Vec3(u(rng), u(rng), u(rng));
  s.object_pose = Pose(center, random_rotation(rng));
  s.object_id = 0;
  s.start = chain.home();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double a = std::numbers::pi * u(rng);
    const Vec3 c = center + cfg.obstacle_distance * Vec3(std::cos(a), std::sin(a), 0.0) + Vec3(0, 0, 0.05 * u(rng));
    s.spheres = {{c, cfg.obstacle_radius}};
    if (min_clearance(interpolate(*s.start, *s.start, 3), chain, s) > margin) break;
  }
  return s;
}

struct SceneOutcome {
  SceneSpec scene;
  PlanResult result;
  double oracle_distance = 0.0;
  double min_clearance = 0.0;
  bool start_unchanged = false;
  bool success = false;
};

struct SuiteReport {
  std::vector<SceneOutcome> scenes;
  double success_rate = 0.0;
};

/// Plans every scene of the suite with `field` and scores the final gripper
/// pose against the exact oracle of `manifold` placed at the object pose.
template <DistanceField Field>
SuiteReport run_plan_suite(const KinematicChain& chain, const Field& field, const GraspManifold& manifold,
                           const ControlPointSet& cps, const PlannerConfig& pcfg, const SuiteConfig& scfg) {
  const GraspOracle oracle(manifold, cps, scfg.oracle_density);
  SuiteReport rep;
  rep.scenes.resize(static_cast<std::size_t>(scfg.scenes));
  parallel_for(rep.scenes.size(), [&](std::size_t i) {
    SceneOutcome& o = rep.scenes[i];
    o.scene = make_suite_scene(chain, scfg, static_cast<int>(i), pcfg.margin);
    o.result = plan(chain, o.scene, field, pcfg);
    const Trajectory& xi = o.result.trajectory;
    o.oracle_distance = oracle.nearest(gripper_in_object(chain, xi.bottomRows(1).transpose(), o.scene)).mean();
    o.min_clearance = min_clearance(xi, chain, o.scene);
    o.start_unchanged = xi.row(0).transpose() == *o.scene.start;
    o.success = o.oracle_distance < scfg.success_threshold && o.min_clearance >= 0.0 && o.start_unchanged;
  });
  for (const auto& o : rep.scenes) rep.success_rate += o.success ? 1.0 : 0.0;
  rep.success_rate /= std::max(1, scfg.scenes);
  return rep;
}

struct AblationRow {
  std::string name;
  StepMode step_mode;
  InitMode init_mode;
  double success_rate = 0.0;
  double mean_oracle_distance = 0.0;
};

/// Reruns the plan suite under {adam, fixed} x {ik, constant} on identical
/// scenes.
template <DistanceField Field>
std::vector<AblationRow> run_ablation(const KinematicChain& chain, const Field& field, const GraspManifold& manifold,
                                      const ControlPointSet& cps, PlannerConfig pcfg, const SuiteConfig& scfg) {
  std::vector<AblationRow> rows = {{"adam+ik", StepMode::adam, InitMode::ik},
                                   {"fixed+ik", StepMode::fixed, InitMode::ik},
                                   {"adam+constant", StepMode::adam, InitMode::constant},
                                   {"fixed+constant", StepMode::fixed, InitMode::constant}};
  for (auto& r : rows) {
    pcfg.step_mode = r.step_mode;
    pcfg.init_mode = r.init_mode;
    const SuiteReport rep = run_plan_suite(chain, field, manifold, cps, pcfg, scfg);
    r.success_rate = rep.success_rate;
    for (const auto& o : rep.scenes) r.mean_oracle_distance += o.oracle_distance;
    r.mean_oracle_distance /= std::max<std::size_t>(1, rep.scenes.size());
  }
  return rows;
}

}  // namespace ngdf
