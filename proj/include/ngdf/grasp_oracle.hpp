#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ngdf/control_points.hpp"
#include "ngdf/parallel.hpp"
#include "ngdf/se3.hpp"

namespace ngdf {

/// Grasps around a cylinder whose axis is the z axis of `axis_pose`.
///
/// For ring angle phi the gripper origin sits at (ring_radius + standoff)
/// along the radial direction and approaches the axis. Roll turns the grasp
/// about its approach direction; an empty roll interval (lo == hi) gives a
/// one-parameter ring.
struct AnalyticRing {
  Pose axis_pose;
  double ring_radius = 0.05;
  double standoff = 0.06;
  double roll_lo = 0.0;
  double roll_hi = 0.0;

  bool two_dimensional() const { return roll_hi > roll_lo; }

  /// Grasp at ring angle phi and roll psi.
  Pose grasp(double phi, double psi) const {
    const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 tangent(-std::sin(phi), std::cos(phi), 0.0);
    const Vec3 axis = Vec3::UnitZ();
    const Vec3 approach = -radial;
    const Vec3 fingers = std::cos(psi) * tangent + std::sin(psi) * axis;
    Mat3 R;
    R.col(0) = fingers;
    R.col(1) = approach.cross(fingers);
    R.col(2) = approach;
    const Pose local((ring_radius + standoff) * radial, Quat(R));
    return compose(axis_pose, local);
  }
};

struct DiscreteSet {
  std::vector<Pose> grasps;
};

class GraspManifold {
 public:
  GraspManifold(AnalyticRing ring) : rep_(std::move(ring)) {}
  GraspManifold(DiscreteSet set) : rep_(std::move(set)) {
    if (std::get<DiscreteSet>(rep_).grasps.empty()) throw std::invalid_argument("discrete grasp set is empty");
  }

  /// Canonical test object: 1-D ring around a cylinder at the origin.
  static GraspManifold ring(double roll = 0.0) {
    AnalyticRing r;
    r.roll_lo = r.roll_hi = roll;
    return GraspManifold(r);
  }
  /// Ring with roll in [-pi/6, pi/6].
  static GraspManifold ring2d() {
    AnalyticRing r;
    r.roll_lo = -std::numbers::pi / 6.0;
    r.roll_hi = std::numbers::pi / 6.0;
    return GraspManifold(r);
  }

  bool is_ring() const { return std::holds_alternative<AnalyticRing>(rep_); }
  const AnalyticRing& as_ring() const { return std::get<AnalyticRing>(rep_); }
  const DiscreteSet& as_discrete() const { return std::get<DiscreteSet>(rep_); }

  Vec3 centroid() const {
    if (is_ring()) return as_ring().axis_pose.position();
    Vec3 c = Vec3::Zero();
    for (const auto& g : as_discrete().grasps) c += g.position();
    return c / static_cast<double>(as_discrete().grasps.size());
  }

  /// Axis about which the grasp set is invariant, if any.
  std::optional<Vec3> symmetry_axis() const {
    if (!is_ring()) return std::nullopt;
    return as_ring().axis_pose.rotation().col(2);
  }

  /// Same grasps, rigidly moved by `t` (applied on the left).
  GraspManifold transformed(const Pose& t) const {
    if (is_ring()) {
      AnalyticRing r = as_ring();
      r.axis_pose = compose(t, r.axis_pose);
      return GraspManifold(r);
    }
    DiscreteSet s;
    for (const auto& g : as_discrete().grasps) s.grasps.push_back(compose(t, g));
    return GraspManifold(std::move(s));
  }

 private:
  std::variant<AnalyticRing, DiscreteSet> rep_;
};

/// Stratified samples of the manifold. A 1-D ring yields `count` poses at
/// phi = 2 pi k / count. A 2-D ring uses an n_phi x n_roll grid with at most
/// `count` poses and the roll endpoints included. Discrete sets are returned
/// verbatim. `jitter` in [0, 1) perturbs each grid parameter by that fraction
/// of a cell, seeded by `seed`.
inline std::vector<Pose> sample_manifold(const GraspManifold& m, int count, std::uint64_t seed = 0,
                                         double jitter = 0.0) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (!m.is_ring()) return m.as_discrete().grasps;
  const AnalyticRing& r = m.as_ring();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Pose> out;
  const double two_pi = 2.0 * std::numbers::pi;
  if (!r.two_dimensional()) {
    out.reserve(count);
    const double dphi = two_pi / count;
    for (int k = 0; k < count; ++k) {
      const double phi = dphi * k + (jitter > 0 ? jitter * dphi * u(rng) : 0.0);
      out.push_back(r.grasp(phi, r.roll_lo));
    }
    return out;
  }
  const double span = r.roll_hi - r.roll_lo;
  const int n_roll = std::clamp(static_cast<int>(std::lround(std::sqrt(count * span / two_pi))), 2, count);
  const int n_phi = std::max(1, count / n_roll);
  const double dphi = two_pi / n_phi;
  const double droll = span / (n_roll - 1);
  out.reserve(static_cast<std::size_t>(n_phi) * n_roll);
  for (int i = 0; i < n_phi; ++i) {
    for (int j = 0; j < n_roll; ++j) {
      double phi = dphi * i;
      double psi = r.roll_lo + droll * j;
      if (jitter > 0) {
        phi += jitter * dphi * u(rng);
        psi = std::clamp(psi + jitter * droll * u(rng), r.roll_lo, r.roll_hi);
      }
      out.push_back(r.grasp(phi, psi));
    }
  }
  return out;
}

struct NearestGrasp {
  Pose grasp;
  Eigen::VectorXd distances;
  std::size_t index = 0;

  double mean() const { return distances.mean(); }
};

/// Brute-force nearest grasp over a fixed sampling of a manifold. The
/// control points of every sample are cached so a query is a single scan.
class GraspOracle {
 public:
  GraspOracle(const GraspManifold& m, const ControlPointSet& cps, int density)
      : cps_(cps), grasps_(sample_manifold(m, density)) {
    if (grasps_.empty()) throw std::invalid_argument("manifold has no grasps");
    const std::size_t n = grasps_.size();
    table_.resize(3 * cps_.size(), static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
      const Eigen::Matrix3Xd pts = cps_.transformed(grasps_[s]);
      for (std::size_t i = 0; i < cps_.size(); ++i)
        for (int k = 0; k < 3; ++k) table_(3 * i + k, s) = pts(k, i);
    }
  }

  std::size_t size() const { return grasps_.size(); }
  const std::vector<Pose>& grasps() const { return grasps_; }
  const ControlPointSet& control_points() const { return cps_; }

  /// Argmin of the mean control-point distance; ties go to the lowest index.
  NearestGrasp nearest(const Pose& q) const {
    const Eigen::Matrix3Xd a = cps_.transformed(q);
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(table_.cols());
    for (std::size_t i = 0; i < cps_.size(); ++i)
      for (int k = 0; k < 3; ++k) acc += (table_.row(3 * i + k).transpose().array() - a(k, i)).abs();
    Eigen::Index best = 0;
    double best_val = acc[0];
    for (Eigen::Index s = 1; s < acc.size(); ++s) {
      if (acc[s] < best_val) {
        best_val = acc[s];
        best = s;
      }
    }
    NearestGrasp out;
    out.index = static_cast<std::size_t>(best);
    out.grasp = grasps_[out.index];
    out.distances = control_point_distance(q, out.grasp, cps_);
    return out;
  }

 private:
  ControlPointSet cps_;
  std::vector<Pose> grasps_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> table_;
};

inline NearestGrasp nearest_grasp(const Pose& q, const GraspManifold& m, const ControlPointSet& cps, int density) {
  if (density < 1) throw std::invalid_argument("density must be >= 1");
  return GraspOracle(m, cps, density).nearest(q);
}

struct DatasetRecord {
  Pose query;
  Eigen::VectorXd target_distances;
  int object_id = 0;
};

/// Queries uniform in a ball around the manifold centroid, labelled with the
/// nearest grasp's per-point distances. Queries are drawn sequentially from
/// `seed`; labelling runs in parallel and is order-independent.
inline std::vector<DatasetRecord> generate_dataset(const GraspManifold& m, const ControlPointSet& cps,
                                                   int num_queries, double ball_radius, std::uint64_t seed,
                                                   int density = 10000, int object_id = 0) {
  if (num_queries < 1) throw std::invalid_argument("num_queries must be >= 1");
  if (!(ball_radius >= 0.0)) throw std::invalid_argument("ball radius must be >= 0");
  const GraspOracle oracle(m, cps, density);
  std::mt19937_64 rng(seed);
  std::vector<DatasetRecord> out(static_cast<std::size_t>(num_queries));
  for (auto& rec : out) {
    rec.query = random_pose_in_ball(m.centroid(), ball_radius, rng);
    rec.object_id = object_id;
  }
  parallel_for(out.size(), [&](std::size_t i) { out[i].target_distances = oracle.nearest(out[i].query).distances; });
  return out;
}

inline void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records, std::size_t ncp) {
  out << "# ngdf-dataset v1 ncp=" << ncp << '\n';
  char buf[64];
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.target_distances.size()) != ncp)
      throw std::invalid_argument("record distance count does not match ncp");
    out << r.object_id;
    const Vec7 v = r.query.to_vector();
    for (int k = 0; k < 7; ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", v[k]);
      out << buf;
    }
    for (Eigen::Index k = 0; k < r.target_distances.size(); ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", r.target_distances[k]);
      out << buf;
    }
    out << '\n';
  }
}

inline void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records, std::size_t ncp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  write_dataset(out, records, ncp);
}

inline std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header");
  const std::string prefix = "# ngdf-dataset v1 ncp=";
  if (line.rfind(prefix, 0) != 0) throw std::runtime_error("dataset: bad header");
  const int ncp = std::stoi(line.substr(prefix.size()));
  if (ncp < 1) throw std::runtime_error("dataset: bad ncp");
  std::vector<DatasetRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    DatasetRecord r;
    Vec7 v;
    if (!(ss >> r.object_id)) throw std::runtime_error("dataset: bad record");
    for (int k = 0; k < 7; ++k)
      if (!(ss >> v[k])) throw std::runtime_error("dataset: short record");
    r.query = Pose::from_vector(v);
    r.target_distances.resize(ncp);
    for (int k = 0; k < ncp; ++k)
      if (!(ss >> r.target_distances[k])) throw std::runtime_error("dataset: short record");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return read_dataset(in);
}

}  // namespace ngdf
