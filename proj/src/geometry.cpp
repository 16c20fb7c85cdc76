#include "airseg/geometry.hpp"

#include <algorithm>
#include <string>

namespace airseg {

std::size_t LabeledPointCloud::count(PointLabel label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledPointCloud::validate() const {
  if (points.size() != labels.size()) {
    throw ValidationError("point cloud: " + std::to_string(points.size()) + " points but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (!source_frames.empty() && source_frames.size() != points.size()) {
    throw ValidationError("point cloud: source frame list length mismatch");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw ValidationError("point cloud: point " + std::to_string(i) + " is not finite");
    }
  }
}

void LabeledPointCloud::append(const LabeledPointCloud& other) {
  const bool keep_frames = (empty() || has_source_frames()) && other.has_source_frames();
  if (!keep_frames) source_frames.clear();
  points.insert(points.end(), other.points.begin(), other.points.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  if (keep_frames) {
    source_frames.insert(source_frames.end(), other.source_frames.begin(),
                         other.source_frames.end());
  }
}

LabeledPointCloud transformed(const LabeledPointCloud& cloud, const SimilarityTransform& s) {
  LabeledPointCloud out = cloud;
  const Mat3 sr = s.scale() * s.rotation_matrix();
  for (auto& p : out.points) p = sr * p + s.translation();
  return out;
}

LabeledPointCloud select_label(const LabeledPointCloud& cloud, PointLabel label) {
  LabeledPointCloud out;
  const bool frames = cloud.has_source_frames();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] != label) continue;
    out.push_back(cloud.points[i], label);
    if (frames) out.source_frames.push_back(cloud.source_frames[i]);
  }
  return out;
}

}  // namespace airseg
