#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "airseg/geometry.hpp"
#include "airseg/kdtree.hpp"

namespace airseg {

struct IcpParams {
  int max_iterations = 60;
  double rel_tol = 1e-7;       // relative RMS change
  double max_corr_dist = 10.0;  // mm
  double trim_fraction = 0.2;  // worst correspondences dropped
  bool with_scale = true;
  // Source points used per iteration (0 = all). Subsampling is a fixed
  // stride over the input order.
  std::size_t max_points = 0;

  void validate() const;
};

struct IcpResult {
  SimilarityTransform transform;
  double rms = 0.0;  // mm, over surviving correspondences
  int iterations = 0;
  bool converged = false;
  // Matched RMS at the start of every iteration followed by the final RMS.
  std::vector<double> rms_history;
  std::size_t correspondences = 0;
};

// Least-squares similarity (or rigid, with_scale = false) mapping src onto
// dst. Throws NumericalError for degenerate configurations.
SimilarityTransform kabsch_umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                                   bool with_scale);

struct CoarseAlignment {
  SimilarityTransform transform;
  double rms = 0.0;
  // All four candidates with their one-pass nearest-neighbor RMS.
  std::vector<SimilarityTransform> candidates;
  std::vector<double> candidate_rms;
};

// Centroid + principal-axis alignment, disambiguated over the four proper
// sign assignments by nearest-neighbor RMS. `max_eval_points` bounds the
// number of source points used to score candidates (0 = all).
CoarseAlignment pca_coarse_align(std::span<const Vec3> src, std::span<const Vec3> dst,
                                 bool with_scale, const KdTree* dst_index = nullptr,
                                 std::size_t max_eval_points = 0);

// RMS of nearest-neighbor distances from transformed src to the index.
double nearest_rms(std::span<const Vec3> src, const KdTree& dst_index,
                   const SimilarityTransform& s, std::size_t max_points = 0);

// Trimmed point-to-point ICP. Throws NumericalError when fewer than three
// correspondences survive an iteration.
IcpResult icp(std::span<const Vec3> src, std::span<const Vec3> dst,
              const SimilarityTransform& init, const IcpParams& params);
IcpResult icp(std::span<const Vec3> src, const KdTree& dst_index,
              const SimilarityTransform& init, const IcpParams& params);

// Every ceil(n / max_points)-th point, in order.
std::vector<Vec3> stride_subsample(std::span<const Vec3> points, std::size_t max_points);

}  // namespace airseg
