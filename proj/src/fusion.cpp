#include "airseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <unordered_map>

namespace airseg {

void FusionFilter::validate() const {
  if (!(min_inv_depth >= 0.0) || !(min_inv_depth < max_inv_depth)) {
    throw ValidationError("fusion filter: require 0 <= min_inv_depth < max_inv_depth");
  }
  if (pixel_stride < 1) throw ValidationError("fusion filter: pixel_stride must be >= 1");
  if (border_margin < 0) throw ValidationError("fusion filter: border_margin must be >= 0");
}

Vec3 backproject_pixel(double u, double v, double inv_depth, const CameraIntrinsics& k,
                       const Pose& pose) {
  if (!(inv_depth > 0.0) || !std::isfinite(inv_depth)) {
    throw ValidationError("backproject_pixel: invalid inverse depth " + std::to_string(inv_depth));
  }
  const double z = 1.0 / inv_depth;
  const Vec3 x_cam((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z);
  return pose * x_cam;
}

LabeledPointCloud fuse_keyframe(const KeyframeRecord& rec, const FusionFilter& filter,
                                FusionStats* stats) {
  filter.validate();
  const InverseDepthMap& depth = rec.inv_depth;
  if (depth.width <= 0 || depth.height <= 0 ||
      depth.data.size() != std::size_t(depth.width) * depth.height) {
    throw ValidationError("fuse_keyframe: frame " + std::to_string(rec.frame_id) +
                          " has an inconsistent inverse-depth map");
  }
  if (rec.intrinsics.distortion_model != DistortionModel::kNone) {
    throw ValidationError("fuse_keyframe: intrinsics must describe undistorted frames");
  }
  validate_mask(rec.mask);

  const CameraIntrinsics k = rec.intrinsics.rescaled(depth.width, depth.height);
  const SegmentationMask mask = rescale_mask_nearest(rec.mask, depth.width, depth.height);

  // Camera-frame direction per pixel is separable: ((u - cx)/fx, (v - cy)/fy, 1).
  std::vector<double> xs(depth.width);
  for (int u = 0; u < depth.width; ++u) xs[u] = (u - k.cx) / k.fx;
  const Mat3 r = rec.pose.rotation_matrix();
  const Vec3 t = rec.pose.translation();

  LabeledPointCloud cloud;
  FusionStats st;
  const int m = filter.border_margin;
  const int stride = filter.pixel_stride;
  for (int v = 0; v < depth.height; v += stride) {
    if (v < m || v >= depth.height - m) continue;
    const double y = (v - k.cy) / k.fy;
    for (int u = 0; u < depth.width; u += stride) {
      if (u < m || u >= depth.width - m) continue;
      const double d = depth(u, v);
      if (!std::isfinite(d) || !(d > filter.min_inv_depth) || !(d < filter.max_inv_depth)) {
        ++st.invalid_depth;
        continue;
      }
      const double z = 1.0 / d;
      const Vec3 x_cam(xs[u] * z, y * z, z);
      const PointLabel label = mask(u, v) ? PointLabel::kObstruction : PointLabel::kBackground;
      cloud.push_back(r * x_cam + t, label);
      cloud.source_frames.push_back(rec.frame_id);
      if (label == PointLabel::kObstruction) ++st.obstruction;
    }
  }
  st.emitted = cloud.size();
  if (stats) *stats = st;
  return cloud;
}

LabeledPointCloud fuse_sequence(const std::vector<KeyframeRecord>& recs,
                                const FusionFilter& filter, int threads) {
  if (recs.empty()) throw ValidationError("fuse_sequence: no keyframes");
  filter.validate();
  std::vector<LabeledPointCloud> parts(recs.size());
  const std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(threads, 1)), 1,
                                                      recs.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < recs.size(); ++i) parts[i] = fuse_keyframe(recs[i], filter);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < recs.size(); i += workers) {
            parts[i] = fuse_keyframe(recs[i], filter);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  LabeledPointCloud out;
  out.points.reserve(total);
  out.labels.reserve(total);
  out.source_frames.reserve(total);
  for (const auto& p : parts) out.append(p);
  return out;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = std::uint64_t(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= std::uint64_t(k.y) + 0xBF58476D1CE4E5B9ULL + (h << 6) + (h >> 2);
    h ^= std::uint64_t(k.z) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return std::size_t(h);
  }
};

}  // namespace

LabeledPointCloud voxel_downsample(const LabeledPointCloud& cloud, double voxel) {
  if (!(voxel > 0.0) || !std::isfinite(voxel)) {
    throw ValidationError("voxel_downsample: voxel size must be positive");
  }
  cloud.validate();
  struct Cell {
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    std::size_t obstruction = 0;
  };
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slots;
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const VoxelKey key{std::int64_t(std::floor(p.x() / voxel)),
                       std::int64_t(std::floor(p.y() / voxel)),
                       std::int64_t(std::floor(p.z() / voxel))};
    auto [it, inserted] = slots.try_emplace(key, cells.size());
    if (inserted) cells.emplace_back();
    Cell& c = cells[it->second];
    c.sum += p;
    ++c.count;
    if (cloud.labels[i] == PointLabel::kObstruction) ++c.obstruction;
  }
  LabeledPointCloud out;
  out.points.reserve(cells.size());
  out.labels.reserve(cells.size());
  for (const Cell& c : cells) {
    out.push_back(c.sum / double(c.count), 2 * c.obstruction >= c.count
                                               ? PointLabel::kObstruction
                                               : PointLabel::kBackground);
  }
  return out;
}

}  // namespace airseg
