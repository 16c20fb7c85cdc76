#pragma once

#include <cstdint>
#include <vector>

#include "airseg/camera.hpp"
#include "airseg/geometry.hpp"
#include "airseg/image.hpp"

namespace airseg {

// One SLAM keyframe. `intrinsics` describe the undistorted frame; the
// inverse-depth map may be sampled at a different resolution than the mask.
struct KeyframeRecord {
  std::int64_t frame_id = 0;
  CameraIntrinsics intrinsics;
  Pose pose;  // camera-to-world, mm
  InverseDepthMap inv_depth;
  SegmentationMask mask;
};

struct FusionFilter {
  double min_inv_depth = 1.0 / 300.0;  // 1/mm, exclusive
  double max_inv_depth = 1.0;          // 1/mm, exclusive
  int border_margin = 8;               // px
  int pixel_stride = 1;

  void validate() const;
};

struct FusionStats {
  std::size_t emitted = 0;
  std::size_t obstruction = 0;
  std::size_t invalid_depth = 0;  // on-grid, in-margin pixels rejected by the depth bounds
};

// X_cam = (1/d) * ((u - cx)/fx, (v - cy)/fy, 1), mapped through the pose.
// Throws ValidationError for d <= 0 or non-finite.
Vec3 backproject_pixel(double u, double v, double inv_depth, const CameraIntrinsics& k,
                       const Pose& pose);

LabeledPointCloud fuse_keyframe(const KeyframeRecord& rec, const FusionFilter& filter,
                                FusionStats* stats = nullptr);

// Concatenation in input order. `threads` > 1 fuses keyframes concurrently;
// the output does not depend on it.
LabeledPointCloud fuse_sequence(const std::vector<KeyframeRecord>& recs,
                                const FusionFilter& filter, int threads = 1);

// One point per occupied voxel at the member centroid; majority label with
// ties going to Obstruction. Output order follows first occupancy.
LabeledPointCloud voxel_downsample(const LabeledPointCloud& cloud, double voxel);

}  // namespace airseg
