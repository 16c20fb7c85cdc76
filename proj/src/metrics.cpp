#include "airseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "airseg/error.hpp"

namespace airseg {

std::vector<double> closest_distances(std::span<const Vec3> from, const KdTree& to_index) {
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = to_index.nearest(from[i]).distance;
  return d;
}

double coverage_from_distances(std::span<const double> ct_to_recon, double threshold) {
  if (ct_to_recon.empty()) throw ValidationError("coverage: CT cloud is empty");
  const auto hits = std::count_if(ct_to_recon.begin(), ct_to_recon.end(),
                                  [&](double d) { return d <= threshold; });
  return 100.0 * double(hits) / double(ct_to_recon.size());
}

double coverage(std::span<const Vec3> ct, const KdTree& recon_index, double threshold) {
  return coverage_from_distances(closest_distances(ct, recon_index), threshold);
}

double mean_of(std::span<const double> d) {
  if (d.empty()) throw ValidationError("distance reduction over an empty cloud");
  double sum = 0.0;
  for (double x : d) sum += x;
  return sum / double(d.size());
}

double max_of(std::span<const double> d) {
  if (d.empty()) throw ValidationError("distance reduction over an empty cloud");
  return *std::max_element(d.begin(), d.end());
}

double median_of(std::vector<double> d) {
  if (d.empty()) throw ValidationError("distance reduction over an empty cloud");
  const std::size_t n = d.size();
  const std::size_t mid = n / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  const double upper = d[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(d.begin(), d.begin() + mid);
  return 0.5 * (lower + upper);
}

double chamfer_one_sided(std::span<const Vec3> recon, const KdTree& ct_index) {
  return mean_of(closest_distances(recon, ct_index));
}

double hausdorff_one_sided(std::span<const Vec3> recon, const KdTree& ct_index) {
  return max_of(closest_distances(recon, ct_index));
}

double median_closest(std::span<const Vec3> recon, const KdTree& ct_index) {
  return median_of(closest_distances(recon, ct_index));
}

const char* to_string(PrecisionPolicy policy) {
  return policy == PrecisionPolicy::kAllKeyframes ? "all_keyframes" : "source_frame_only";
}

PrecisionPolicy precision_policy_from_string(const std::string& name) {
  if (name == "all_keyframes" || name == "all") return PrecisionPolicy::kAllKeyframes;
  if (name == "source_frame_only" || name == "source") return PrecisionPolicy::kSourceFrameOnly;
  throw ValidationError("unknown precision policy '" + name + "'");
}

namespace {

struct ProjectionView {
  std::int64_t frame_id;
  Mat3 r_wc;  // world -> camera rotation
  Vec3 t_wc;
  CameraIntrinsics k;
  const SegmentationMask* mask;
};

}  // namespace

PrecisionResult segmentation_precision_counts(const LabeledPointCloud& cloud,
                                              const std::vector<KeyframeRecord>& keyframes,
                                              PrecisionPolicy policy) {
  cloud.validate();
  if (keyframes.empty()) throw ValidationError("segmentation_precision: no keyframes");
  if (policy == PrecisionPolicy::kSourceFrameOnly && !cloud.has_source_frames()) {
    throw ValidationError(
        "segmentation_precision: source-frame policy needs per-point source frames");
  }
  std::vector<ProjectionView> views;
  views.reserve(keyframes.size());
  for (const auto& kf : keyframes) {
    validate_mask(kf.mask);
    const Pose inv = kf.pose.inverse();
    views.push_back({kf.frame_id, inv.rotation_matrix(), inv.translation(),
                     kf.intrinsics.rescaled(kf.mask.width, kf.mask.height), &kf.mask});
  }

  PrecisionResult res;
  auto project = [&](const Vec3& p, const ProjectionView& view) {
    const Vec3 x = view.r_wc * p + view.t_wc;
    if (!(x.z() > 0.0)) {
      ++res.counts.excluded;
      return;
    }
    const Eigen::Vector2d px = project_pinhole(view.k, x);
    const double fu = std::floor(px.x() + 0.5);
    const double fv = std::floor(px.y() + 0.5);
    if (!(fu >= 0.0 && fv >= 0.0 && fu < view.mask->width && fv < view.mask->height)) {
      ++res.counts.excluded;
      return;
    }
    ++res.counts.valid;
    if ((*view.mask)(int(fu), int(fv)) == 1) ++res.counts.hits;
  };

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] != PointLabel::kObstruction) continue;
    ++res.counts.tumor_points;
    if (policy == PrecisionPolicy::kAllKeyframes) {
      for (const auto& view : views) project(cloud.points[i], view);
    } else {
      for (const auto& view : views) {
        if (view.frame_id == cloud.source_frames[i]) project(cloud.points[i], view);
      }
    }
  }
  if (res.counts.valid > 0) {
    res.precision_pct = 100.0 * double(res.counts.hits) / double(res.counts.valid);
  }
  return res;
}

std::pair<double, PrecisionCounts> segmentation_precision(
    const LabeledPointCloud& cloud, const std::vector<KeyframeRecord>& keyframes,
    PrecisionPolicy policy) {
  if (cloud.count(PointLabel::kObstruction) == 0) {
    throw ValidationError("segmentation_precision: cloud has no Obstruction points");
  }
  const PrecisionResult r = segmentation_precision_counts(cloud, keyframes, policy);
  if (!r.precision_pct) {
    throw NumericalError("segmentation_precision: zero valid projections (" +
                         std::to_string(r.counts.excluded) + " excluded)");
  }
  return {*r.precision_pct, r.counts};
}

Rgb heat_color(double distance, double d_max) {
  double t = d_max > 0.0 ? distance / d_max : 1.0;
  if (!(t >= 0.0)) t = 0.0;  // also catches NaN
  t = std::min(t, 1.0);
  const double red = std::ceil(255.0 * t - 0.5);
  const auto r = std::uint8_t(std::clamp(red, 0.0, 255.0));
  return {r, 0, std::uint8_t(255 - r)};
}

HeatmapCloud heatmap(std::span<const Vec3> recon, const KdTree& ct_index, double d_max) {
  HeatmapCloud heat;
  heat.points.assign(recon.begin(), recon.end());
  heat.distances = closest_distances(recon, ct_index);
  heat.colors.reserve(recon.size());
  for (double d : heat.distances) heat.colors.push_back(heat_color(d, d_max));
  return heat;
}

MetricsReport evaluate(const EvaluationInputs& in, HeatmapCloud* heat) {
  if (!in.recon || !in.ct || !in.keyframes) {
    throw ValidationError("evaluate: missing inputs");
  }
  if (in.recon->empty() || in.ct->empty()) {
    throw ValidationError("evaluate: reconstruction and CT clouds must be nonempty");
  }
  MetricsReport report;
  report.coverage_threshold_mm = in.coverage_threshold;
  report.precision_policy = in.policy;
  report.registration = in.registration;
  report.recon_points = in.recon->size();
  report.ct_points = in.ct->size();

  const LabeledPointCloud aligned = transformed(*in.recon, in.registration.transform);
  const KdTree ct_index(in.ct->points);
  const std::vector<double> recon_to_ct = closest_distances(aligned.points, ct_index);
  report.chamfer_one_sided_mm = mean_of(recon_to_ct);
  report.hausdorff_one_sided_mm = max_of(recon_to_ct);
  report.median_closest_mm = median_of(recon_to_ct);

  const KdTree recon_index(aligned.points);
  report.coverage_pct =
      coverage_from_distances(closest_distances(in.ct->points, recon_index), in.coverage_threshold);

  if (in.recon->count(PointLabel::kObstruction) > 0 && !in.keyframes->empty()) {
    const PrecisionResult pr = segmentation_precision_counts(*in.recon, *in.keyframes, in.policy);
    report.seg_precision_pct = pr.precision_pct;
    report.precision = pr.counts;
  }

  if (heat) {
    heat->points = aligned.points;
    heat->distances = recon_to_ct;
    heat->colors.clear();
    heat->colors.reserve(recon_to_ct.size());
    for (double d : recon_to_ct) heat->colors.push_back(heat_color(d, in.heatmap_d_max));
  }
  return report;
}

}  // namespace airseg
