#include <doctest.h>

#include <algorithm>
#include <random>

#include "airseg/metrics.hpp"
#include "airseg/synth.hpp"
#include "oracles.hpp"

using namespace airseg;

namespace {

std::vector<Vec3> cylinder_points(std::mt19937_64& g, std::size_t n, double theta_max) {
  std::uniform_real_distribution<double> th(0.0, theta_max), z(0.0, 20.0);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = th(g);
    out.emplace_back(5 * std::cos(t), 5 * std::sin(t), z(g));
  }
  return out;
}

KeyframeRecord disk_frame() {
  KeyframeRecord r;
  r.frame_id = 3;
  r.intrinsics = {40, 40, 31.5, 23.5, 64, 48, DistortionModel::kNone, {}};
  r.inv_depth = InverseDepthMap(64, 48, 0.1);
  r.mask = SegmentationMask(64, 48, 0);
  for (int v = 0; v < 48; ++v)
    for (int u = 0; u < 64; ++u)
      if ((u - 30) * (u - 30) + (v - 20) * (v - 20) < 100) r.mask(u, v) = 1;
  return r;
}

}  // namespace

TEST_CASE("closest distances") {
  const std::vector<Vec3> to{Vec3(1, 0, 0), Vec3(0, 2, 0)};
  const auto d = closest_distances(std::vector<Vec3>{Vec3::Zero()}, KdTree(to));
  REQUIRE(d.size() == 1);
  CHECK(d[0] == 1.0);

  std::mt19937_64 g(50);
  const auto a = oracle::random_points(g, 1000, -5, 5);
  const auto b = oracle::random_points(g, 1000, -5, 5);
  const auto kd = closest_distances(a, KdTree(b));
  const auto bf = oracle::brute_distances(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(kd[i] - bf[i]) <= 1e-12);

  const std::vector<Vec3> sub(b.begin(), b.begin() + 100);
  for (double x : closest_distances(sub, KdTree(b))) CHECK(x == 0.0);
}

TEST_CASE("chamfer, hausdorff and median hand cases") {
  const std::vector<Vec3> recon{Vec3(0, 0, 0), Vec3(0, 0, 2)};
  const KdTree ct(std::vector<Vec3>{Vec3::Zero()});
  CHECK(chamfer_one_sided(recon, ct) == 1.0);
  CHECK(hausdorff_one_sided(recon, ct) == 2.0);
  CHECK(median_closest(recon, ct) == 1.0);
  CHECK(median_of({0.0, 1.0, 2.0}) == 1.0);
  CHECK(median_of({3.0, 0.0, 2.0, 1.0}) == 1.5);
  CHECK(mean_of(std::vector<double>{1.0, 2.0, 6.0}) == 3.0);
  CHECK(max_of(std::vector<double>{1.0, 7.0, 6.0}) == 7.0);
  CHECK_THROWS_AS(median_of({}), ValidationError);

  std::mt19937_64 g(51);
  const auto pts = oracle::random_points(g, 300, -5, 5);
  const KdTree self(pts);
  CHECK(chamfer_one_sided(pts, self) == 0.0);
  CHECK(hausdorff_one_sided(pts, self) == 0.0);
  CHECK(median_closest(pts, self) == 0.0);
}

TEST_CASE("coverage") {
  std::mt19937_64 g(52);
  const auto ct = cylinder_points(g, 20000, 2 * M_PI);
  CHECK(coverage(ct, KdTree(ct), 1.0) == 100.0);

  // Reconstruction covering half the circumference densely.
  std::vector<Vec3> half;
  for (int i = 0; i <= 800; ++i) {
    for (int j = 0; j <= 400; ++j) {
      const double t = M_PI * i / 800.0;
      half.emplace_back(5 * std::cos(t), 5 * std::sin(t), 0.05 * j);
    }
  }
  const double c = coverage(ct, KdTree(half), 0.05);
  CHECK(c == doctest::Approx(50.0).epsilon(0.02));

  const KdTree hi(half);
  const auto d = closest_distances(ct, hi);
  double prev = 0.0;
  for (double thr : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 20.0}) {
    const double cv = coverage_from_distances(d, thr);
    CHECK(cv >= prev);
    CHECK(cv == coverage(ct, hi, thr));
    prev = cv;
  }
  CHECK(prev == 100.0);
}

TEST_CASE("metric ordering invariants") {
  std::mt19937_64 g(53);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = oracle::random_points(g, 400, -5, 5);
    const auto b = oracle::random_points(g, 300, -6, 6);
    const KdTree kb(b);
    const auto d = closest_distances(a, kb);
    const double med = median_closest(a, kb);
    CHECK(*std::min_element(d.begin(), d.end()) <= med);
    CHECK(med <= hausdorff_one_sided(a, kb));
    CHECK(chamfer_one_sided(a, kb) <= hausdorff_one_sided(a, kb));
  }
}

TEST_CASE("metrics are invariant under a common rigid motion") {
  std::mt19937_64 g(54);
  const auto a = oracle::random_points(g, 500, -5, 5);
  const auto b = oracle::random_points(g, 500, -5, 5);
  const Pose p = oracle::random_pose(g);
  std::vector<Vec3> pa, pb;
  for (const auto& x : a) pa.push_back(p * x);
  for (const auto& x : b) pb.push_back(p * x);
  const KdTree kb(b), kpb(pb);
  CHECK(std::abs(chamfer_one_sided(a, kb) - chamfer_one_sided(pa, kpb)) < 1e-9);
  CHECK(std::abs(hausdorff_one_sided(a, kb) - hausdorff_one_sided(pa, kpb)) < 1e-9);
  CHECK(std::abs(median_closest(a, kb) - median_closest(pa, kpb)) < 1e-9);
  CHECK(coverage(b, KdTree(a), 1.0) == coverage(pb, KdTree(pa), 1.0));
}

TEST_CASE("segmentation precision round trip") {
  const KeyframeRecord r = disk_frame();
  FusionFilter f;
  f.border_margin = 0;
  const LabeledPointCloud cloud = fuse_keyframe(r, f);
  const std::vector<KeyframeRecord> frames{r};
  const auto [pct, counts] = segmentation_precision(cloud, frames, PrecisionPolicy::kAllKeyframes);
  CHECK(pct == 100.0);
  CHECK(counts.tumor_points == cloud.count(PointLabel::kObstruction));
  CHECK(counts.valid == counts.tumor_points);
  CHECK(counts.excluded == 0);
  const auto src = segmentation_precision(cloud, frames, PrecisionPolicy::kSourceFrameOnly);
  CHECK(src.first == 100.0);
}

TEST_CASE("segmentation precision counting") {
  KeyframeRecord r = disk_frame();
  LabeledPointCloud cloud;
  // Camera looks down +z from the origin; pixel (30,20) is inside the disk.
  const Vec3 hit((30 - 31.5) / 40 * 10, (20 - 23.5) / 40 * 10, 10);
  const Vec3 miss((60 - 31.5) / 40 * 10, (40 - 23.5) / 40 * 10, 10);
  const Vec3 outside(100, 0, 10);
  const Vec3 behind(0, 0, -5);
  for (const auto& p : {hit, miss, outside, behind}) cloud.push_back(p, PointLabel::kObstruction);
  cloud.push_back(miss, PointLabel::kBackground);
  const auto res = segmentation_precision_counts(cloud, {r}, PrecisionPolicy::kAllKeyframes);
  CHECK(res.counts.tumor_points == 4);
  CHECK(res.counts.valid == 2);
  CHECK(res.counts.hits == 1);
  CHECK(res.counts.excluded == 2);
  REQUIRE(res.precision_pct);
  CHECK(*res.precision_pct == 50.0);

  // u exactly at width - 0.5 rounds out of bounds.
  LabeledPointCloud edge;
  edge.push_back(Vec3((63.5 - 31.5) / 40 * 10, 0, 10), PointLabel::kObstruction);
  const auto e = segmentation_precision_counts(edge, {r}, PrecisionPolicy::kAllKeyframes);
  CHECK(e.counts.excluded == 1);
  CHECK_FALSE(e.precision_pct);

  LabeledPointCloud back;
  back.push_back(behind, PointLabel::kObstruction);
  CHECK_THROWS_AS(segmentation_precision(back, {r}, PrecisionPolicy::kAllKeyframes),
                  NumericalError);
  LabeledPointCloud none;
  none.push_back(hit, PointLabel::kBackground);
  CHECK_THROWS_AS(segmentation_precision(none, {r}, PrecisionPolicy::kAllKeyframes),
                  ValidationError);
}

TEST_CASE("source-frame policy only uses the recorded frame") {
  KeyframeRecord a = disk_frame();
  KeyframeRecord b = disk_frame();
  b.frame_id = 9;
  b.mask = SegmentationMask(64, 48, 0);
  FusionFilter f;
  f.border_margin = 0;
  const LabeledPointCloud cloud = fuse_keyframe(a, f);
  const auto all = segmentation_precision(cloud, {a, b}, PrecisionPolicy::kAllKeyframes);
  CHECK(all.first == 50.0);
  const auto own = segmentation_precision(cloud, {a, b}, PrecisionPolicy::kSourceFrameOnly);
  CHECK(own.first == 100.0);
  CHECK(own.second.valid == cloud.count(PointLabel::kObstruction));
}

TEST_CASE("heat colors") {
  CHECK(heat_color(0.0, 5.0) == Rgb{0, 0, 255});
  CHECK(heat_color(5.0, 5.0) == Rgb{255, 0, 0});
  CHECK(heat_color(50.0, 5.0) == Rgb{255, 0, 0});
  CHECK(heat_color(2.5, 5.0) == Rgb{127, 0, 128});
  for (int i = 0; i <= 100; ++i) {
    const Rgb c = heat_color(i * 0.05, 5.0);
    CHECK(int(c[0]) + int(c[2]) == 255);
    CHECK(c[1] == 0);
  }
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0, 0, 10)};
  const HeatmapCloud h = heatmap(pts, KdTree(std::vector<Vec3>{Vec3::Zero()}), 5.0);
  CHECK(h.distances == std::vector<double>{0.0, 10.0});
  CHECK(h.colors[1] == Rgb{255, 0, 0});
}

TEST_CASE("evaluate") {
  const AirwayScene scene;
  const LabeledPointCloud ct = sample_surface(scene, 20000, 55);
  const KeyframeRecord r = disk_frame();
  const std::vector<KeyframeRecord> frames{r};
  FusionFilter f;
  f.border_margin = 0;
  const LabeledPointCloud recon = fuse_keyframe(r, f);

  EvaluationInputs in;
  in.recon = &ct;
  in.ct = &ct;
  in.keyframes = &frames;
  HeatmapCloud heat;
  MetricsReport rep = evaluate(in, &heat);
  CHECK(rep.coverage_pct == 100.0);
  CHECK(rep.chamfer_one_sided_mm == 0.0);
  CHECK(rep.hausdorff_one_sided_mm == 0.0);
  CHECK(heat.points.size() == ct.size());

  in.recon = &recon;
  rep = evaluate(in);
  REQUIRE(rep.seg_precision_pct);
  CHECK(*rep.seg_precision_pct == 100.0);
  CHECK(rep.recon_points == recon.size());
  CHECK(rep.ct_points == ct.size());
}
