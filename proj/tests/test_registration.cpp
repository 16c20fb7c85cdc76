#include <doctest.h>

#include <random>

#include "airseg/kdtree.hpp"
#include "airseg/registration.hpp"
#include "airseg/synth.hpp"
#include "oracles.hpp"

using namespace airseg;

namespace {

std::vector<Vec3> airway_points(std::size_t n, std::uint64_t seed) {
  return sample_surface(AirwayScene{}, n, seed).points;
}

std::vector<Vec3> apply_all(const SimilarityTransform& s, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(s * p);
  return out;
}

// Rotation by `deg` about a random axis through `center`, then a shift of
// `shift_mm` in a random direction.
SimilarityTransform perturbation(std::mt19937_64& g, double deg, double shift_mm,
                                 const Vec3& center) {
  const Vec3 axis = oracle::random_point(g, -1, 1).normalized();
  const Vec3 dir = oracle::random_point(g, -1, 1).normalized();
  const Quat q(Eigen::AngleAxisd(deg * M_PI / 180.0, axis));
  return SimilarityTransform(1.0, q, center - (q * center) + shift_mm * dir);
}

void check_monotone(const IcpResult& r) {
  for (std::size_t i = 1; i < r.rms_history.size(); ++i) {
    CHECK(r.rms_history[i] <= r.rms_history[i - 1] + 1e-12);
  }
}

}  // namespace

TEST_CASE("kd-tree trivial queries") {
  const KdTree one({Vec3(1, 2, 3)});
  std::mt19937_64 g(30);
  for (int i = 0; i < 20; ++i) CHECK(one.nearest(oracle::random_point(g, -9, 9)).index == 0);

  const auto pts = oracle::random_points(g, 500, -10, 10);
  const KdTree tree(pts);
  for (std::size_t i = 0; i < pts.size(); i += 37) {
    const Neighbor n = tree.nearest(pts[i]);
    CHECK(n.distance == 0.0);
    CHECK(n.index == i);
  }
  CHECK_THROWS_AS(KdTree(std::vector<Vec3>{}), ValidationError);
  CHECK_THROWS_AS(KdTree({Vec3(NAN, 0, 0)}), ValidationError);
}

TEST_CASE("kd-tree agrees with brute force") {
  std::mt19937_64 g(31);
  const auto pts = oracle::random_points(g, 2000, -50, 50);
  const KdTree tree(pts);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q = oracle::random_point(g, -60, 60);
    const Neighbor a = tree.nearest(q);
    const Neighbor b = oracle::brute_nearest(pts, q);
    CHECK(a.index == b.index);
    CHECK(a.distance == b.distance);
  }
}

TEST_CASE("kd-tree ties resolve to the lowest index") {
  // Integer lattice with duplicates: many equidistant candidates.
  std::vector<Vec3> pts;
  for (int rep = 0; rep < 3; ++rep)
    for (int x = 0; x < 6; ++x)
      for (int y = 0; y < 6; ++y)
        for (int z = 0; z < 6; ++z) pts.emplace_back(x, y, z);
  const KdTree tree(pts, 4);
  std::mt19937_64 g(32);
  std::uniform_int_distribution<int> h(-1, 11);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q(h(g) * 0.5, h(g) * 0.5, h(g) * 0.5);
    const Neighbor a = tree.nearest(q);
    const Neighbor b = oracle::brute_nearest(pts, q);
    CHECK(a.index == b.index);
    CHECK(a.distance == b.distance);
    CHECK(a.index < 216);
  }
}

TEST_CASE("kabsch_umeyama closed-form cases") {
  std::mt19937_64 g(33);
  const auto src = oracle::random_points(g, 50, -10, 10);
  const SimilarityTransform id = kabsch_umeyama(src, src, true);
  CHECK(std::abs(id.scale() - 1.0) < 1e-12);
  CHECK((id.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  std::vector<Vec3> shifted;
  for (const auto& p : src) shifted.push_back(p + Vec3(5, 0, 0));
  const SimilarityTransform tr = kabsch_umeyama(src, shifted, false);
  CHECK(tr.scale() == 1.0);
  CHECK((tr.translation() - Vec3(5, 0, 0)).norm() < 1e-12);
  CHECK((tr.rotation_matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  const Quat r45(Eigen::AngleAxisd(M_PI / 4, Vec3(1, 2, 3).normalized()));
  const SimilarityTransform truth(1.7, r45, Vec3(3, -4, 12));
  const SimilarityTransform est = kabsch_umeyama(src, apply_all(truth, src), true);
  CHECK(std::abs(est.scale() - 1.7) < 1e-9);
  CHECK((est.rotation_matrix() - truth.rotation_matrix()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((est.translation() - truth.translation()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("kabsch_umeyama is equivariant under a common rigid motion") {
  std::mt19937_64 g(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto src = oracle::random_points(g, 40, -10, 10);
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back(p * 1.3 + oracle::random_point(g, -0.1, 0.1));
    const SimilarityTransform t = kabsch_umeyama(src, dst, true);
    const SimilarityTransform h(oracle::random_pose(g));
    const SimilarityTransform th = kabsch_umeyama(apply_all(h, src), apply_all(h, dst), true);
    const Mat4 expect = h.matrix() * t.matrix() * h.inverse().matrix();
    CHECK((th.matrix() - expect).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(kabsch_umeyama(src, dst, false).scale() == 1.0);
  }
}

TEST_CASE("kabsch_umeyama degenerate input") {
  std::vector<Vec3> line;
  for (int i = 0; i < 10; ++i) line.emplace_back(i, 2 * i, 3 * i);
  CHECK_THROWS_AS(kabsch_umeyama(line, line, true), NumericalError);
  const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(kabsch_umeyama(two, two, true), NumericalError);
}

TEST_CASE("pca_coarse_align") {
  const auto dst = airway_points(5000, 35);
  const CoarseAlignment same = pca_coarse_align(dst, dst, true);
  CHECK((same.transform.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937_64 g(36);
  const SimilarityTransform truth(oracle::random_pose(g, 20));
  const auto src = apply_all(truth.inverse(), dst);
  const KdTree index(dst);
  const CoarseAlignment ca = pca_coarse_align(src, dst, false, &index);
  CHECK(nearest_rms(src, index, ca.transform) < 1e-6);
  REQUIRE(ca.candidate_rms.size() == 4);
  int lowest = 0;
  for (int i = 0; i < 4; ++i) {
    if (ca.candidate_rms[i] <= ca.rms) ++lowest;
    CHECK(std::abs(ca.candidate_rms[i] - nearest_rms(src, index, ca.candidates[i])) < 1e-12);
  }
  CHECK(lowest == 1);

  CHECK_THROWS_AS(pca_coarse_align(std::vector<Vec3>(5, Vec3::Zero()), dst, true),
                  ValidationError);
}

TEST_CASE("icp identity") {
  const auto pts = airway_points(4000, 37);
  const IcpResult r = icp(pts, pts, SimilarityTransform::Identity(), IcpParams{});
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.rms < 1e-9);
  CHECK((r.transform.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("icp recovers a small perturbation") {
  const auto dst = airway_points(20000, 38);
  const KdTree index(dst);
  std::mt19937_64 g(39);
  const Vec3 center(0, 0, 40);
  for (int trial = 0; trial < 3; ++trial) {
    const SimilarityTransform p = perturbation(g, 5.0, 2.0, center);
    const auto src = apply_all(p, dst);
    // Full overlap: nothing to trim, and trimming would drop the tumor, the only feature
    // that pins sliding along and rolling about the tube axis.
    IcpParams params;
    params.trim_fraction = 0.0;
    params.max_iterations = 200;
    const IcpResult r = icp(src, index, SimilarityTransform::Identity(), params);
    const SimilarityTransform truth = p.inverse();
    CHECK(oracle::rotation_angle_deg(r.transform.rotation_matrix(), truth.rotation_matrix()) <
          0.1);
    CHECK((r.transform.translation() - truth.translation()).norm() < 0.05);
    check_monotone(r);
  }
}

TEST_CASE("trimmed icp on a partial view") {
  const auto dst = airway_points(20000, 40);
  std::vector<Vec3> part;
  for (const auto& p : dst) {
    if (p.z() < 48.0) part.push_back(p);
  }
  CHECK(double(part.size()) / dst.size() == doctest::Approx(0.6).epsilon(0.02));
  std::mt19937_64 g(41);
  const SimilarityTransform p = perturbation(g, 3.0, 1.0, Vec3(0, 0, 24));
  IcpParams params;
  params.trim_fraction = 0.2;
  params.with_scale = false;
  params.max_iterations = 200;
  const IcpResult r = icp(apply_all(p, part), dst, SimilarityTransform::Identity(), params);
  CHECK(r.converged);
  CHECK(r.rms < 0.05);
  CHECK(r.transform.scale() == 1.0);
  check_monotone(r);
}

TEST_CASE("icp reports too few correspondences") {
  const auto dst = airway_points(1000, 42);
  std::vector<Vec3> far;
  for (const auto& p : dst) far.push_back(p + Vec3(500, 0, 0));
  CHECK_THROWS_AS(icp(far, dst, SimilarityTransform::Identity(), IcpParams{}), NumericalError);
  IcpParams bad;
  bad.trim_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("stride_subsample") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(i, 0, 0);
  const auto s = stride_subsample(pts, 4);
  REQUIRE(s.size() == 4);
  CHECK(s[1].x() == 3.0);
  CHECK(stride_subsample(pts, 0).size() == 10);
  CHECK(stride_subsample(pts, 20).size() == 10);
}
