#include <chrono>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ngdf/control_points.hpp"
#include "ngdf/se3.hpp"
#include "test_util.hpp"

using namespace ngdf;
using ngdf::testutil::oracle_apply;
using ngdf::testutil::oracle_matrix;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(Pose, NormalizesAndCanonicalizes) {
  const Pose p(Vec3(1, 2, 3), Quat(-2.0, 0.5, -1.0, 0.25));
  EXPECT_NEAR(p.orientation().norm(), 1.0, 1e-12);
  EXPECT_GE(p.orientation().w(), 0.0);
}

TEST(Pose, CanonicalizationKeepsRotation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 200; ++i) {
    Quat raw(n(rng), n(rng), n(rng), n(rng));
    raw.normalize();
    const Vec3 p(n(rng), n(rng), n(rng));
    const Vec3 before = raw * p;
    const Pose pose(Vec3::Zero(), raw);
    EXPECT_LE((transform_point(pose, p) - before).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TransformPoint, Identity) {
  EXPECT_EQ(transform_point(Pose(), Vec3(1, 2, 3)), Vec3(1, 2, 3));
}

TEST(TransformPoint, QuarterTurnAboutZ) {
  const Pose p = Pose::from_axis_angle(Vec3::UnitZ(), kPi / 2);
  EXPECT_TRUE(transform_point(p, Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST(TransformPoint, MatchesHomogeneousOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Pose pose = testutil::random_pose(rng);
    const Vec3 p = testutil::random_pose(rng).position();
    EXPECT_LE((transform_point(pose, p) - oracle_apply(oracle_matrix(pose), p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Compose, IdentityAndInverse) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Pose a = testutil::random_pose(rng);
    const Pose b = testutil::random_pose(rng);
    const Pose ib = compose(Pose(), b);
    EXPECT_LE((ib.to_vector() - b.to_vector()).cwiseAbs().maxCoeff(), 1e-12);
    const Pose e = compose(a, inverse(a));
    EXPECT_LE(e.position().norm(), 1e-9);
    EXPECT_LE(rotation_angle(e.orientation(), Quat::Identity()), 1e-7);  // acos amplifies 1e-15 round-off
    EXPECT_NEAR(std::abs(e.orientation().w()), 1.0, 1e-12);
  }
}

TEST(Compose, MatchesMatrixProduct) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const Pose a = testutil::random_pose(rng);
    const Pose b = testutil::random_pose(rng);
    const Eigen::Matrix4d expected = oracle_matrix(a) * oracle_matrix(b);
    EXPECT_LE((oracle_matrix(compose(a, b)) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((oracle_matrix(inverse(a)) - oracle_matrix(a).inverse()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RandomPose, ZeroRadiusIsCenter) {
  const Vec3 c(0.3, -0.2, 0.1);
  EXPECT_EQ(random_pose_in_ball(c, 0.0, std::uint64_t{4}).position(), c);
}

TEST(RandomPose, BallStatistics) {
  std::mt19937_64 rng(17);
  const Vec3 c(1.0, -2.0, 0.5);
  Vec3 sum = Vec3::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Pose p = random_pose_in_ball(c, 0.5, rng);
    ASSERT_LE((p.position() - c).norm(), 0.5 + 1e-12);
    ASSERT_GE(p.orientation().w(), 0.0);
    sum += p.position();
  }
  EXPECT_LE((sum / n - c).norm(), 0.01);
}

TEST(RandomPose, SeedDeterminism) {
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const Vec7 va = random_pose_in_ball(Vec3::Zero(), 0.5, a).to_vector();
    const Vec7 vb = random_pose_in_ball(Vec3::Zero(), 0.5, b).to_vector();
    ASSERT_EQ(va, vb);
  }
}

TEST(QuatJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const Pose pose = testutil::random_pose(rng);
    const Vec3 p = testutil::random_pose(rng).position();
    const Vec4 q(pose.orientation().w(), pose.orientation().x(), pose.orientation().y(), pose.orientation().z());
    const Eigen::Matrix<double, 3, 4> J = rotate_point_quat_jacobian(q, p);
    for (int k = 0; k < 4; ++k) {
      // Unnormalized quadratic form, as used by the jacobian.
      auto rot = [&](const Vec4& v) {
        const Vec3 u = v.tail<3>();
        return Vec3((v[0] * v[0] - u.squaredNorm()) * p + 2 * u.dot(p) * u + 2 * v[0] * u.cross(p));
      };
      Vec4 hp = q, hm = q;
      hp[k] += 1e-6;
      hm[k] -= 1e-6;
      const Vec3 fd = (rot(hp) - rot(hm)) / 2e-6;
      EXPECT_LE((J.col(k) - fd).norm(), 1e-8);
    }
  }
}

TEST(ControlPoints, DistanceIdentityIsZero) {
  const auto cps = ControlPointSet::parallel_jaw();
  std::mt19937_64 rng(1);
  const Pose q = testutil::random_pose(rng);
  EXPECT_EQ(control_point_distance(q, q, cps), Eigen::VectorXd::Zero(6));
}

TEST(ControlPoints, RigidOffset) {
  const auto cps = ControlPointSet::parallel_jaw();
  std::mt19937_64 rng(2);
  const Pose g = testutil::random_pose(rng);
  const Pose q(g.position() + Vec3(0.1, 0, 0), g.orientation());
  const Eigen::VectorXd d = control_point_distance(q, g, cps);
  for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], 0.1, 1e-12);
}

TEST(ControlPoints, QuarterTurnMatchesPerPointOracle) {
  const auto cps = ControlPointSet::parallel_jaw();
  const Pose g;
  const Pose q = Pose::from_axis_angle(Vec3::UnitZ(), kPi / 2);
  const Eigen::VectorXd d = control_point_distance(q, g, cps);
  // (x, 0, z) -> (0, x, z): L1 displacement is 2|x|.
  const double expected[] = {0, 0, 0.08, 0.08, 0.08, 0.08};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(d[i], expected[i], 1e-12);
}

TEST(ControlPoints, SymmetricAndMatchesMatrixOracle) {
  const auto cps = ControlPointSet::parallel_jaw();
  std::mt19937_64 rng(4);
  for (int n = 0; n < 1000; ++n) {
    const Pose q = testutil::random_pose(rng);
    const Pose g = testutil::random_pose(rng);
    const Eigen::VectorXd d = control_point_distance(q, g, cps);
    ASSERT_EQ(d, control_point_distance(g, q, cps));
    const Eigen::Matrix4d mq = oracle_matrix(q), mg = oracle_matrix(g);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const double ref = (oracle_apply(mq, cps[i]) - oracle_apply(mg, cps[i])).cwiseAbs().sum();
      ASSERT_NEAR(d[i], ref, 1e-9);
      ASSERT_GE(d[i], 0.0);
    }
  }
}

TEST(ControlPoints, ZeroOnlyForSamePose) {
  const auto cps = ControlPointSet::parallel_jaw();
  std::mt19937_64 rng(6);
  for (int n = 0; n < 200; ++n) {
    const Pose g = testutil::random_pose(rng);
    const Pose roundtrip = compose(compose(g, testutil::random_pose(rng)), Pose());
    const Pose same = Pose::from_vector(g.to_vector());
    EXPECT_LE(control_point_distance(same, g, cps).maxCoeff(), 1e-12);
    EXPECT_GT(control_point_distance(roundtrip, g, cps).maxCoeff(), 0.0);
  }
}

TEST(ControlPoints, RejectsDegenerateSets) {
  EXPECT_THROW(ControlPointSet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}), std::invalid_argument);
  EXPECT_THROW(ControlPointSet({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)}), std::invalid_argument);
}

TEST(ControlPoints, ParsesGripperFile) {
  std::istringstream in("# comment\n0 0 0\n0 0 0.066  # palm\n\n0.04 0 0.066\n-0.04 0 0.066\n0.04 0 0.112\n-0.04 0 0.112\n");
  const ControlPointSet cps = parse_control_points(in);
  ASSERT_EQ(cps.size(), 6u);
  EXPECT_EQ(cps[5], Vec3(-0.04, 0, 0.112));
  const auto file = load_control_points(std::string(NGDF_DATA_DIR) + "/gripper.txt");
  EXPECT_EQ(file.points(), ControlPointSet::parallel_jaw().points());
  std::istringstream bad("0 0\n");
  EXPECT_THROW(parse_control_points(bad), std::runtime_error);
}

}  // namespace
