#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ngdf/levelset.hpp"
#include "ngdf/suite.hpp"

// Plain-text metrics records shared by the CLI and the acceptance suite.
// Every number is printed with 17 significant digits so reruns can be
// compared byte for byte. Wall times never appear here.

namespace ngdf {

namespace detail {
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_levelset_metrics(std::ostream& out, const LevelSetMetrics& m) {
  using detail::num;
  out << "trials " << m.trials << '\n'
      << "mean_oracle_distance " << num(m.mean_oracle_distance) << '\n'
      << "std_oracle_distance " << num(m.std_oracle_distance) << '\n'
      << "success_rate " << num(m.success_rate) << '\n'
      << "mean_final_field " << num(m.mean_final_field) << '\n'
      << "field_below_1e-3 " << num(m.field_below_1e3) << '\n'
      << "# trial oracle_distance final_field success px py pz qw qx qy qz\n";
  for (std::size_t i = 0; i < m.per_trial.size(); ++i) {
    const auto& t = m.per_trial[i];
    out << i << ' ' << num(t.oracle_distance) << ' ' << num(t.final_field) << ' ' << int(t.success);
    const Vec7 v = t.final_pose.to_vector();
    for (int k = 0; k < 7; ++k) out << ' ' << num(v[k]);
    out << '\n';
  }
}

inline void write_suite_metrics(std::ostream& out, const SuiteReport& r) {
  using detail::num;
  out << "scenes " << r.scenes.size() << '\n' << "success_rate " << num(r.success_rate) << '\n'
      << "# scene oracle_distance field_distance min_clearance smoothness iterations best_iteration start_unchanged "
         "ik_ok success\n";
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    const auto& o = r.scenes[i];
    const double smooth = smoothness_cost(o.result.trajectory).cost;
    out << i << ' ' << num(o.oracle_distance) << ' ' << num(o.result.final_grasp_distance) << ' '
        << num(o.min_clearance) << ' ' << num(smooth) << ' ' << o.result.log.size() << ' ' << o.result.best_iteration
        << ' ' << int(o.start_unchanged) << ' ' << int(o.result.status == PlanStatus::ok) << ' ' << int(o.success)
        << '\n';
  }
}

inline void write_ablation(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "# mode success_rate mean_oracle_distance\n";
  for (const auto& r : rows)
    out << r.name << ' ' << detail::num(r.success_rate) << ' ' << detail::num(r.mean_oracle_distance) << '\n';
}

/// Summary of one planned trajectory: final grasp distance, min clearance,
/// smoothness cost and iteration count.
inline void write_plan_record(std::ostream& out, const PlanResult& r, double min_clear) {
  using detail::num;
  out << "final_grasp_distance " << num(r.final_grasp_distance) << '\n'
      << "min_clearance " << num(min_clear) << '\n'
      << "smoothness_cost " << num(smoothness_cost(r.trajectory).cost) << '\n'
      << "iterations " << r.log.size() << '\n'
      << "best_iteration " << r.best_iteration << '\n'
      << "ik_status " << (r.status == PlanStatus::ok ? "ok" : "not_converged") << '\n';
}

/// Per-iteration costs: `iteration total grasp smooth obstacle`.
inline void write_cost_log(std::ostream& out, const std::vector<IterationLog>& log) {
  using detail::num;
  out << "# iteration total grasp smooth obstacle\n";
  for (std::size_t i = 0; i < log.size(); ++i)
    out << i << ' ' << num(log[i].total) << ' ' << num(log[i].grasp) << ' ' << num(log[i].smooth) << ' '
        << num(log[i].obstacle) << '\n';
}

}  // namespace ngdf
