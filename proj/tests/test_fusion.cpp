#include <doctest.h>

#include <random>

#include "airseg/fusion.hpp"
#include "airseg/synth.hpp"
#include "oracles.hpp"

using namespace airseg;

namespace {

KeyframeRecord plane_frame(int w, int h, double d, std::int64_t id = 0) {
  KeyframeRecord r;
  r.frame_id = id;
  r.intrinsics = {50, 50, (w - 1) / 2.0, (h - 1) / 2.0, w, h, DistortionModel::kNone, {}};
  r.inv_depth = InverseDepthMap(w, h, d);
  r.mask = SegmentationMask(w, h, 0);
  return r;
}

FusionFilter no_margin() {
  FusionFilter f;
  f.border_margin = 0;
  return f;
}

}  // namespace

TEST_CASE("backproject_pixel") {
  const CameraIntrinsics k{300, 300, 256, 192, 512, 384, DistortionModel::kNone, {}};
  const Vec3 a = backproject_pixel(256, 192, 1.0, k, Pose::Identity());
  CHECK((a - Vec3(0, 0, 1)).norm() == 0.0);
  const Vec3 b = backproject_pixel(256, 192, 0.5, k, Pose::Identity());
  CHECK((b - Vec3(0, 0, 2)).norm() == 0.0);
  const Vec3 c = backproject_pixel(316, 192, 0.1, k, Pose::Identity());
  CHECK((c - Vec3(2, 0, 10)).norm() < 1e-12);
  CHECK_THROWS_AS(backproject_pixel(1, 1, 0.0, k, Pose::Identity()), ValidationError);
  CHECK_THROWS_AS(backproject_pixel(1, 1, -1.0, k, Pose::Identity()), ValidationError);
  CHECK_THROWS_AS(backproject_pixel(1, 1, NAN, k, Pose::Identity()), ValidationError);
}

TEST_CASE("fuse_keyframe simple frames") {
  const KeyframeRecord empty = plane_frame(20, 10, 0.0);
  FusionStats st;
  CHECK(fuse_keyframe(empty, no_margin(), &st).empty());
  CHECK(st.invalid_depth == 200);

  const LabeledPointCloud plane = fuse_keyframe(plane_frame(20, 10, 1.0 - 1e-12), no_margin());
  CHECK(plane.size() == 200);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    CHECK(std::abs(plane.points[i].z() - 1.0) < 1e-9);
    CHECK(plane.labels[i] == PointLabel::kBackground);
  }

  // Bounds are exclusive: d == max_inv_depth is rejected.
  CHECK(fuse_keyframe(plane_frame(20, 10, 1.0), no_margin()).empty());
}

TEST_CASE("fuse_keyframe round trip and label invariants") {
  std::mt19937_64 g(20);
  std::uniform_real_distribution<double> du(0.01, 0.5);
  KeyframeRecord r = plane_frame(48, 36, 0.1, 7);
  r.pose = oracle::random_pose(g);
  // Mask at twice the depth resolution.
  r.mask = SegmentationMask(96, 72, 0);
  for (auto& m : r.mask.data) m = std::uint8_t(g() % 3 == 0);
  r.intrinsics = {100, 100, 47.5, 35.5, 96, 72, DistortionModel::kNone, {}};
  for (auto& d : r.inv_depth.data) d = du(g);
  r.inv_depth(3, 4) = 0.0;
  r.inv_depth(10, 10) = -1.0;
  r.inv_depth(11, 10) = NAN;

  FusionFilter f;
  f.border_margin = 2;
  f.pixel_stride = 1;
  FusionStats st;
  const LabeledPointCloud cloud = fuse_keyframe(r, f, &st);
  REQUIRE(cloud.has_source_frames());

  const CameraIntrinsics k = r.intrinsics.rescaled(48, 36);
  const SegmentationMask m = rescale_mask_nearest(r.mask, 48, 36);
  std::size_t i = 0, expected_obstruction = 0;
  for (int v = 2; v < 34; ++v) {
    for (int u = 2; u < 46; ++u) {
      const double d = r.inv_depth(u, v);
      if (!(d > f.min_inv_depth && d < f.max_inv_depth)) continue;
      REQUIRE(i < cloud.size());
      const Vec3 x = r.pose.inverse() * cloud.points[i];
      const Eigen::Vector2d px = project_pinhole(k, x);
      CHECK(std::abs(px.x() - u) < 1e-6);
      CHECK(std::abs(px.y() - v) < 1e-6);
      CHECK(std::abs(1.0 / x.z() - d) < 1e-9);
      CHECK((cloud.labels[i] == PointLabel::kObstruction) == (m(u, v) == 1));
      CHECK(cloud.source_frames[i] == 7);
      expected_obstruction += m(u, v);
      ++i;
    }
  }
  CHECK(i == cloud.size());
  CHECK(st.obstruction == expected_obstruction);
  CHECK(st.invalid_depth == 3);
}

TEST_CASE("pixel stride keeps a subset of the same points") {
  KeyframeRecord r = plane_frame(30, 20, 0.2);
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> du(0.05, 0.5);
  for (auto& d : r.inv_depth.data) d = du(g);
  FusionFilter f1 = no_margin(), f2 = no_margin();
  f2.pixel_stride = 2;
  const LabeledPointCloud all = fuse_keyframe(r, f1);
  const LabeledPointCloud half = fuse_keyframe(r, f2);
  CHECK(half.size() == 15 * 10);
  std::size_t j = 0;
  for (int v = 0; v < 20; v += 2) {
    for (int u = 0; u < 30; u += 2) {
      CHECK(half.points[j] == all.points[std::size_t(v) * 30 + u]);
      ++j;
    }
  }
}

TEST_CASE("fuse_keyframe on a rendered airway stays on the analytic surfaces") {
  const AirwayScene scene;
  const CameraIntrinsics k{80, 80, 63.5, 47.5, 128, 96, DistortionModel::kNone, {}};
  TrajectorySpec t;
  t.n_frames = 6;
  const auto frames = generate_sequence(scene, t, k);
  FusionFilter f = no_margin();
  std::size_t tumor = 0;
  for (const auto& rec : frames) {
    const LabeledPointCloud c = fuse_keyframe(rec, f);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec3& p = c.points[i];
      if (c.labels[i] == PointLabel::kObstruction) {
        ++tumor;
        CHECK(std::abs((p - scene.tumor_center).norm() - scene.tumor_radius) < 1e-6);
      } else {
        CHECK(std::abs(std::hypot(p.x(), p.y()) - scene.cylinder_radius) < 1e-6);
      }
    }
  }
  CHECK(tumor > 0);
}

TEST_CASE("fuse_sequence") {
  std::vector<KeyframeRecord> one{plane_frame(16, 12, 0.25, 1)};
  one[0].mask(5, 5) = 1;
  const FusionFilter f = no_margin();
  const LabeledPointCloud a = fuse_sequence(one, f);
  const LabeledPointCloud b = fuse_keyframe(one[0], f);
  CHECK(a.points == b.points);
  CHECK(a.labels == b.labels);

  std::vector<KeyframeRecord> two{one[0], plane_frame(16, 12, 0.5, 2)};
  two[1].pose = Pose(Quat::Identity(), Vec3(100, 0, 0));
  CHECK(fuse_sequence(two, f).size() == 2 * b.size());

  std::vector<KeyframeRecord> same{one[0], one[0]};
  const LabeledPointCloud dup = fuse_sequence(same, f);
  REQUIRE(dup.size() == 2 * b.size());
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(dup.points[i] == dup.points[i + b.size()]);

  std::vector<KeyframeRecord> many;
  std::mt19937_64 g(22);
  for (int i = 0; i < 9; ++i) {
    many.push_back(plane_frame(16, 12, 0.1 + 0.05 * i, i));
    many.back().pose = oracle::random_pose(g);
  }
  const LabeledPointCloud serial = fuse_sequence(many, f, 1);
  const LabeledPointCloud parallel = fuse_sequence(many, f, 4);
  CHECK(serial.points == parallel.points);
  CHECK(serial.labels == parallel.labels);
  CHECK(serial.source_frames == parallel.source_frames);

  CHECK_THROWS_AS(fuse_sequence({}, f), ValidationError);
}

TEST_CASE("voxel_downsample") {
  LabeledPointCloud sparse;
  sparse.push_back({0.1, 0.1, 0.1}, PointLabel::kBackground);
  sparse.push_back({5.1, 0.1, 0.1}, PointLabel::kObstruction);
  sparse.push_back({0.1, 5.1, 0.1}, PointLabel::kBackground);
  const LabeledPointCloud same = voxel_downsample(sparse, 1.0);
  CHECK(same.points == sparse.points);
  CHECK(same.labels == sparse.labels);

  LabeledPointCloud tie;
  tie.push_back({1, 1, 1}, PointLabel::kBackground);
  tie.push_back({1, 1, 1}, PointLabel::kObstruction);
  const LabeledPointCloud t = voxel_downsample(tie, 0.5);
  REQUIRE(t.size() == 1);
  CHECK(t.labels[0] == PointLabel::kObstruction);

  std::mt19937_64 g(23);
  LabeledPointCloud cube;
  for (const auto& p : oracle::random_points(g, 1000, 0.0, 10.0)) {
    cube.push_back(p, PointLabel::kBackground);
  }
  CHECK(voxel_downsample(cube, 1.0).size() == oracle::occupied_voxels(cube.points, 1.0));
  CHECK_THROWS_AS(voxel_downsample(cube, 0.0), ValidationError);
}

TEST_CASE("filter validation") {
  FusionFilter f;
  f.min_inv_depth = 2.0;
  CHECK_THROWS_AS(f.validate(), ValidationError);
  f = FusionFilter{};
  f.pixel_stride = 0;
  CHECK_THROWS_AS(f.validate(), ValidationError);
  f = FusionFilter{};
  f.border_margin = -1;
  CHECK_THROWS_AS(f.validate(), ValidationError);
}
