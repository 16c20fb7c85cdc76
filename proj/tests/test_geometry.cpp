#include <doctest.h>

#include <random>

#include "airseg/geometry.hpp"
#include "oracles.hpp"

using namespace airseg;

namespace {

double near_zero(const Vec3& a, const Vec3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("pose_apply basics") {
  CHECK(near_zero(pose_apply(Pose::Identity(), Vec3(1, 2, 3)), Vec3(1, 2, 3)) == 0.0);
  const Pose rz(Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ())), Vec3::Zero());
  CHECK(near_zero(pose_apply(rz, Vec3(1, 0, 0)), Vec3(0, 1, 0)) < 1e-15);
}

TEST_CASE("pose_apply matches a homogeneous matrix multiply") {
  std::mt19937_64 g(1);
  for (int i = 0; i < 200; ++i) {
    const Pose p = oracle::random_pose(g);
    const Vec3 x = oracle::random_point(g, -100, 100);
    const auto m = oracle::homogeneous(p.rotation(), p.translation());
    CHECK(near_zero(pose_apply(p, x), oracle::apply(m, x)) < 1e-9);
    CHECK(oracle::max_abs_diff(m, p.matrix()) < 1e-12);
  }
}

TEST_CASE("pose_compose") {
  std::mt19937_64 g(2);
  for (int i = 0; i < 100; ++i) {
    const Pose a = oracle::random_pose(g), b = oracle::random_pose(g), c = oracle::random_pose(g);
    const Vec3 x = oracle::random_point(g, -100, 100);
    CHECK(near_zero(pose_apply(pose_compose(a, b), x), pose_apply(a, pose_apply(b, x))) < 1e-9);

    const auto ab = oracle::matmul(oracle::homogeneous(a.rotation(), a.translation()),
                                   oracle::homogeneous(b.rotation(), b.translation()));
    CHECK(oracle::max_abs_diff(ab, pose_compose(a, b).matrix()) < 1e-9);

    CHECK((pose_compose(a, Pose::Identity()).matrix() - a.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pose_compose(a, pose_inverse(a)).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    const Mat4 left = pose_compose(pose_compose(a, b), c).matrix();
    const Mat4 right = pose_compose(a, pose_compose(b, c)).matrix();
    CHECK((left - right).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("pose_inverse") {
  CHECK((pose_inverse(Pose::Identity()).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() == 0);
  const Pose t(Quat::Identity(), Vec3(1, 2, 3));
  CHECK(near_zero(pose_inverse(t).translation(), Vec3(-1, -2, -3)) == 0.0);

  std::mt19937_64 g(3);
  const Pose p = oracle::random_pose(g);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = oracle::random_point(g, -100, 100);
    worst = std::max(worst, near_zero(pose_apply(pose_inverse(p), pose_apply(p, x)), x));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("similarity_apply") {
  const Vec3 x(1, 1, 1);
  CHECK(near_zero(similarity_apply(SimilarityTransform::Identity(), x), x) == 0.0);
  const SimilarityTransform s2(2.0, Quat::Identity(), Vec3::Zero());
  CHECK(near_zero(similarity_apply(s2, x), Vec3(2, 2, 2)) == 0.0);

  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> su(0.5, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Quat q = oracle::random_quat(g);
    const double s = su(g);
    const Vec3 t = oracle::random_point(g, -50, 50);
    const SimilarityTransform sim(s, q, t);
    const Vec3 y = oracle::random_point(g, -50, 50);
    const auto r = oracle::quat_matrix(q.w(), q.x(), q.y(), q.z());
    Vec3 expect;
    for (int k = 0; k < 3; ++k) expect[k] = s * (r[k][0] * y[0] + r[k][1] * y[1] + r[k][2] * y[2]) + t[k];
    CHECK(near_zero(similarity_apply(sim, y), expect) < 1e-9);

    const Vec3 z = oracle::random_point(g, -50, 50);
    const double d0 = (y - z).norm();
    CHECK(std::abs((sim * y - sim * z).norm() - s * d0) < 1e-9);
    CHECK(near_zero(sim.inverse() * (sim * y), y) < 1e-9);
  }
}

TEST_CASE("rotation matrices are orthonormal with det +1") {
  std::mt19937_64 g(5);
  for (int i = 0; i < 500; ++i) {
    const Pose p = oracle::random_pose(g);
    const Mat3 r = p.rotation_matrix();
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
    CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("rigid transforms preserve distances") {
  std::mt19937_64 g(6);
  for (int i = 0; i < 200; ++i) {
    const Pose p = oracle::random_pose(g);
    const Vec3 x = oracle::random_point(g, -100, 100), y = oracle::random_point(g, -100, 100);
    CHECK(std::abs((p * x - p * y).norm() - (x - y).norm()) < 1e-9);
  }
}

TEST_CASE("invalid transforms are rejected") {
  CHECK_THROWS_AS(Pose(Quat(0, 0, 0, 0), Vec3::Zero()), ValidationError);
  CHECK_THROWS_AS(Pose(Quat::Identity(), Vec3(NAN, 0, 0)), ValidationError);
  CHECK_THROWS_AS(SimilarityTransform(0.0, Quat::Identity(), Vec3::Zero()), ValidationError);
  CHECK_THROWS_AS(SimilarityTransform(-1.0, Quat::Identity(), Vec3::Zero()), ValidationError);
}

TEST_CASE("labeled cloud helpers") {
  LabeledPointCloud c;
  c.push_back({0, 0, 0}, PointLabel::kBackground);
  c.push_back({1, 0, 0}, PointLabel::kObstruction);
  c.push_back({2, 0, 0}, PointLabel::kObstruction);
  CHECK(c.count(PointLabel::kObstruction) == 2);
  const auto tum = select_label(c, PointLabel::kObstruction);
  REQUIRE(tum.size() == 2);
  CHECK(tum.points[0].x() == 1.0);
  const auto moved = transformed(c, SimilarityTransform(2.0, Quat::Identity(), Vec3(0, 1, 0)));
  CHECK(near_zero(moved.points[2], Vec3(4, 1, 0)) == 0.0);
  CHECK(moved.labels == c.labels);
  c.labels.pop_back();
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
