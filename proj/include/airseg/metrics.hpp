#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airseg/fusion.hpp"
#include "airseg/geometry.hpp"
#include "airseg/kdtree.hpp"

namespace airseg {

// Distance from every `from` point to its nearest indexed point (mm).
std::vector<double> closest_distances(std::span<const Vec3> from, const KdTree& to_index);

// Percentage of CT points with a reconstructed point within `threshold` mm.
double coverage(std::span<const Vec3> ct, const KdTree& recon_index, double threshold = 1.0);
double coverage_from_distances(std::span<const double> ct_to_recon, double threshold);

// One-sided reconstruction -> CT distances (mm).
double chamfer_one_sided(std::span<const Vec3> recon, const KdTree& ct_index);
double hausdorff_one_sided(std::span<const Vec3> recon, const KdTree& ct_index);
double median_closest(std::span<const Vec3> recon, const KdTree& ct_index);

// Reductions over precomputed distances; summation is in input order.
double mean_of(std::span<const double> d);
double max_of(std::span<const double> d);
double median_of(std::vector<double> d);

enum class PrecisionPolicy { kAllKeyframes, kSourceFrameOnly };

const char* to_string(PrecisionPolicy policy);
PrecisionPolicy precision_policy_from_string(const std::string& name);

struct PrecisionCounts {
  std::size_t tumor_points = 0;
  std::size_t hits = 0;
  std::size_t valid = 0;
  std::size_t excluded = 0;  // behind camera or outside the mask
};

struct PrecisionResult {
  std::optional<double> precision_pct;  // empty when no projection was valid
  PrecisionCounts counts;
};

// Projects Obstruction points into keyframe masks without occlusion testing.
// Never throws on zero valid projections; see segmentation_precision.
PrecisionResult segmentation_precision_counts(const LabeledPointCloud& cloud,
                                              const std::vector<KeyframeRecord>& keyframes,
                                              PrecisionPolicy policy);

// As above; throws NumericalError when no projection is valid. Requires at
// least one Obstruction point and one keyframe (ValidationError otherwise).
std::pair<double, PrecisionCounts> segmentation_precision(
    const LabeledPointCloud& cloud, const std::vector<KeyframeRecord>& keyframes,
    PrecisionPolicy policy);

using Rgb = std::array<std::uint8_t, 3>;

// Blue (d = 0) to red (d >= d_max); red byte rounds half down.
Rgb heat_color(double distance, double d_max);

struct HeatmapCloud {
  std::vector<Vec3> points;
  std::vector<double> distances;
  std::vector<Rgb> colors;
};

HeatmapCloud heatmap(std::span<const Vec3> recon, const KdTree& ct_index, double d_max = 5.0);

struct RegistrationSummary {
  SimilarityTransform transform;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MetricsReport {
  double coverage_pct = 0.0;
  double coverage_threshold_mm = 1.0;
  double median_closest_mm = 0.0;
  double chamfer_one_sided_mm = 0.0;
  double hausdorff_one_sided_mm = 0.0;
  std::optional<double> seg_precision_pct;
  PrecisionPolicy precision_policy = PrecisionPolicy::kAllKeyframes;
  std::size_t recon_points = 0;
  std::size_t ct_points = 0;
  PrecisionCounts precision;
  RegistrationSummary registration;
};

struct EvaluationInputs {
  const LabeledPointCloud* recon = nullptr;  // reconstruction frame (SLAM poses)
  const LabeledPointCloud* ct = nullptr;
  const std::vector<KeyframeRecord>* keyframes = nullptr;
  RegistrationSummary registration;  // maps recon into the CT frame
  double coverage_threshold = 1.0;
  PrecisionPolicy policy = PrecisionPolicy::kAllKeyframes;
  double heatmap_d_max = 5.0;
};

// Every distance and precision metric plus the distance heatmap of the registered cloud.
MetricsReport evaluate(const EvaluationInputs& in, HeatmapCloud* heat = nullptr);

}  // namespace airseg
