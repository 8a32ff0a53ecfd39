#pragma once

#include <memory>
#include <vector>

#include "ngdf/field.hpp"
#include "ngdf/grasp_oracle.hpp"

namespace ngdf {

/// Exact nearest-grasp distance wired in place of a learned field.
///
/// The gradient holds the nearest sample fixed and differentiates the L1
/// control-point distance, so it is exact wherever the argmin is unique.
class OracleField {
 public:
  OracleField(const std::vector<GraspManifold>& manifolds, const ControlPointSet& cps, int density) {
    for (const auto& m : manifolds) oracles_.push_back(std::make_shared<const GraspOracle>(m, cps, density));
  }

  double value(int object_id, const Pose& q) const { return oracle(object_id).nearest(q).mean(); }

  FieldEval evaluate(int object_id, const Pose& q) const {
    const GraspOracle& o = oracle(object_id);
    const NearestGrasp ng = o.nearest(q);
    const ControlPointSet& cps = o.control_points();
    const Eigen::Matrix3Xd a = cps.transformed(q);
    const Eigen::Matrix3Xd b = cps.transformed(ng.grasp);
    const Vec4 wxyz(q.orientation().w(), q.orientation().x(), q.orientation().y(), q.orientation().z());
    const double inv_n = 1.0 / static_cast<double>(cps.size());
    FieldEval e;
    e.value = ng.mean();
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const Vec3 s = (a.col(i) - b.col(i)).unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
      e.grad.head<3>() += inv_n * s;
      e.grad.tail<4>() += inv_n * (rotate_point_quat_jacobian(wxyz, cps[i]).transpose() * s);
    }
    return e;
  }

 private:
  const GraspOracle& oracle(int object_id) const {
    if (object_id < 0 || object_id >= static_cast<int>(oracles_.size()))
      throw std::out_of_range("unknown object id " + std::to_string(object_id));
    return *oracles_[object_id];
  }

  std::vector<std::shared_ptr<const GraspOracle>> oracles_;
};

}  // namespace ngdf
