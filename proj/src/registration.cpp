#include "airseg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "airseg/error.hpp"

namespace airseg {

namespace {

// Matched RMS at or below this is treated as an exact fit.
constexpr double kExactFitRms = 1e-12;

Vec3 centroid(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / double(pts.size());
}

Mat3 covariance(std::span<const Vec3> pts, const Vec3& mean) {
  Mat3 c = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    c.noalias() += d * d.transpose();
  }
  return c / double(pts.size());
}

// Principal axes as columns, eigenvalues descending, right-handed.
Mat3 principal_axes(const Mat3& cov, Vec3* eigenvalues) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("principal axes: eigen solve failed");
  Mat3 axes = es.eigenvectors().rowwise().reverse();
  *eigenvalues = es.eigenvalues().reverse();
  if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
  return axes;
}

}  // namespace

void IcpParams::validate() const {
  if (max_iterations < 1) throw ValidationError("icp: max_iterations must be >= 1");
  if (!(rel_tol >= 0.0)) throw ValidationError("icp: rel_tol must be >= 0");
  if (!(max_corr_dist > 0.0)) throw ValidationError("icp: max_corr_dist must be > 0");
  if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) {
    throw ValidationError("icp: trim_fraction must be in [0, 1)");
  }
}

std::vector<Vec3> stride_subsample(std::span<const Vec3> points, std::size_t max_points) {
  if (max_points == 0 || points.size() <= max_points) {
    return {points.begin(), points.end()};
  }
  const std::size_t step = (points.size() + max_points - 1) / max_points;
  std::vector<Vec3> out;
  out.reserve(points.size() / step + 1);
  for (std::size_t i = 0; i < points.size(); i += step) out.push_back(points[i]);
  return out;
}

SimilarityTransform kabsch_umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                                   bool with_scale) {
  if (src.size() != dst.size()) {
    throw ValidationError("kabsch_umeyama: point lists differ in length");
  }
  if (src.size() < 3) throw NumericalError("kabsch_umeyama: need at least 3 correspondences");

  const Vec3 mu_s = centroid(src);
  const Vec3 mu_d = centroid(dst);
  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s;
    const Vec3 b = dst[i] - mu_d;
    cov.noalias() += b * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= double(src.size());
  var_s /= double(src.size());

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0) || !(var_s > 0.0)) {
    throw NumericalError("kabsch_umeyama: degenerate configuration (covariance rank < 2)");
  }
  Vec3 signs = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs(2) = -1.0;
  const Mat3 r = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  const double scale = with_scale ? sv.dot(signs) / var_s : 1.0;
  return SimilarityTransform::FromMatrix(scale, r, mu_d - scale * r * mu_s);
}

double nearest_rms(std::span<const Vec3> src, const KdTree& dst_index,
                   const SimilarityTransform& s, std::size_t max_points) {
  const std::vector<Vec3> pts = stride_subsample(src, max_points);
  const Mat3 sr = s.scale() * s.rotation_matrix();
  double sum = 0.0;
  for (const auto& p : pts) {
    const double d = dst_index.nearest(sr * p + s.translation()).distance;
    sum += d * d;
  }
  return std::sqrt(sum / double(pts.size()));
}

CoarseAlignment pca_coarse_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                                 bool with_scale, const KdTree* dst_index,
                                 std::size_t max_eval_points) {
  if (src.size() < 10 || dst.size() < 10) {
    throw ValidationError("pca_coarse_align: each cloud needs at least 10 points");
  }
  const Vec3 mu_s = centroid(src);
  const Vec3 mu_d = centroid(dst);
  const Mat3 cov_s = covariance(src, mu_s);
  const Mat3 cov_d = covariance(dst, mu_d);
  Vec3 ev_s, ev_d;
  const Mat3 axes_s = principal_axes(cov_s, &ev_s);
  const Mat3 axes_d = principal_axes(cov_d, &ev_d);
  for (const Vec3* ev : {&ev_s, &ev_d}) {
    if (!((*ev)(0) > 0.0) || (*ev)(1) <= 1e-12 * (*ev)(0)) {
      throw NumericalError(
          "pca_coarse_align: degenerate covariance; supply a manual initial transform");
    }
  }
  const double scale =
      with_scale ? std::sqrt(cov_d.trace()) / std::sqrt(cov_s.trace()) : 1.0;

  std::optional<KdTree> own_index;
  if (!dst_index) {
    own_index.emplace(std::vector<Vec3>(dst.begin(), dst.end()));
    dst_index = &*own_index;
  }

  static const Vec3 kSigns[4] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  CoarseAlignment out;
  out.rms = std::numeric_limits<double>::infinity();
  for (const Vec3& sg : kSigns) {
    const Mat3 r = axes_d * sg.asDiagonal() * axes_s.transpose();
    const auto cand = SimilarityTransform::FromMatrix(scale, r, mu_d - scale * r * mu_s);
    const double rms = nearest_rms(src, *dst_index, cand, max_eval_points);
    out.candidates.push_back(cand);
    out.candidate_rms.push_back(rms);
    if (rms < out.rms) {
      out.rms = rms;
      out.transform = cand;
    }
  }
  return out;
}

IcpResult icp(std::span<const Vec3> src, std::span<const Vec3> dst,
              const SimilarityTransform& init, const IcpParams& params) {
  if (dst.empty()) throw ValidationError("icp: target cloud is empty");
  const KdTree index(std::vector<Vec3>(dst.begin(), dst.end()));
  return icp(src, index, init, params);
}

IcpResult icp(std::span<const Vec3> src, const KdTree& dst_index,
              const SimilarityTransform& init, const IcpParams& params) {
  params.validate();
  if (src.empty()) throw ValidationError("icp: source cloud is empty");
  const std::vector<Vec3> pts = stride_subsample(src, params.max_points);
  const std::vector<Vec3>& target = dst_index.points();

  struct Pair {
    double distance;
    std::size_t src;
    std::size_t dst;
  };
  std::vector<Pair> pairs;
  pairs.reserve(pts.size());
  std::vector<Vec3> moved(pts.size());
  std::vector<Vec3> a, b;

  IcpResult result;
  result.transform = init;

  // Matches under the current transform and leaves survivors in `pairs`.
  auto match = [&]() -> double {
    const Mat3 sr = result.transform.scale() * result.transform.rotation_matrix();
    const Vec3 t = result.transform.translation();
    pairs.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      moved[i] = sr * pts[i] + t;
      const Neighbor nn = dst_index.nearest(moved[i]);
      if (nn.distance <= params.max_corr_dist) pairs.push_back({nn.distance, i, nn.index});
    }
    const std::size_t within = pairs.size();
    const auto keep = within - std::size_t(std::floor(params.trim_fraction * double(within)));
    if (keep < 3) {
      std::ostringstream msg;
      msg << "icp: only " << keep << " correspondences survive (source points " << pts.size()
          << ", within " << params.max_corr_dist << " mm: " << within << ", trim "
          << params.trim_fraction << ") at iteration " << result.iterations;
      throw NumericalError(msg.str());
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
      return x.distance < y.distance || (x.distance == y.distance && x.src < y.src);
    });
    pairs.resize(keep);
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.distance * p.distance;
    return std::sqrt(sum / double(keep));
  };

  std::optional<double> previous;
  for (int it = 1; it <= params.max_iterations; ++it) {
    result.iterations = it;
    const double rms = match();
    result.rms = rms;
    result.correspondences = pairs.size();
    result.rms_history.push_back(rms);
    if (rms <= kExactFitRms ||
        (previous && std::abs(*previous - rms) <= params.rel_tol * rms)) {
      result.converged = true;
      return result;
    }
    previous = rms;
    a.resize(pairs.size());
    b.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      a[k] = moved[pairs[k].src];
      b[k] = target[pairs[k].dst];
    }
    result.transform = kabsch_umeyama(a, b, params.with_scale) * result.transform;
  }
  result.rms = match();
  result.correspondences = pairs.size();
  result.rms_history.push_back(result.rms);
  return result;
}

}  // namespace airseg
