#include "airseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace airseg {

void validate_mask(const SegmentationMask& mask) {
  if (mask.width <= 0 || mask.height <= 0 || mask.data.size() != mask.size() ||
      mask.data.size() != std::size_t(mask.width) * mask.height) {
    throw ValidationError("mask: data length does not match dimensions");
  }
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] > 1) {
      throw ValidationError("mask: non-binary value " + std::to_string(mask.data[i]) +
                            " at index " + std::to_string(i));
    }
  }
}

PixelMap identity_map(int width, int height) {
  PixelMap map;
  map.width = width;
  map.height = height;
  const std::size_t n = std::size_t(width) * height;
  map.src_x.resize(n);
  map.src_y.resize(n);
  map.valid.assign(n, 1);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      map.src_x[map.index(u, v)] = u;
      map.src_y[map.index(u, v)] = v;
    }
  }
  return map;
}

PixelMap build_undistort_map(const CameraIntrinsics& src, const CameraIntrinsics& dst) {
  src.validate();
  dst.validate();
  if (dst.distortion_model != DistortionModel::kNone) {
    throw ValidationError("build_undistort_map: destination must have no distortion");
  }
  PixelMap map;
  map.width = dst.width;
  map.height = dst.height;
  const std::size_t n = std::size_t(dst.width) * dst.height;
  map.src_x.assign(n, 0.0);
  map.src_y.assign(n, 0.0);
  map.valid.assign(n, 0);
  const double max_x = src.width - 1;
  const double max_y = src.height - 1;
  for (int v = 0; v < dst.height; ++v) {
    for (int u = 0; u < dst.width; ++u) {
      const std::size_t i = map.index(u, v);
      const Eigen::Vector2d xn = dst.normalize({double(u), double(v)});
      DistortionResult<double> d;
      try {
        d = distort_point<double>(xn, src.distortion_model, src.coefficients);
      } catch (const ValidationError&) {
        continue;
      }
      const Eigen::Vector2d px = src.denormalize(d.point);
      // Round-off from the normalize/denormalize pair can land a hair outside the border.
      constexpr double eps = 1e-9;
      map.valid[i] = d.in_model && px.allFinite() && px.x() >= -eps && px.x() <= max_x + eps &&
                     px.y() >= -eps && px.y() <= max_y + eps;
      map.src_x[i] = std::clamp(px.x(), 0.0, max_x);
      map.src_y[i] = std::clamp(px.y(), 0.0, max_y);
    }
  }
  return map;
}

ImageGray remap_bilinear(const ImageGray& img, const PixelMap& map) {
  ImageGray out(map.width, map.height, 0.0);
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      const std::size_t i = map.index(u, v);
      if (!map.valid[i]) continue;
      const double sx = map.src_x[i];
      const double sy = map.src_y[i];
      const int x0 = std::clamp(int(std::floor(sx)), 0, img.width - 1);
      const int y0 = std::clamp(int(std::floor(sy)), 0, img.height - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double ax = sx - x0;
      const double ay = sy - y0;
      const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
      const double bottom = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
      out.data[i] = (1.0 - ay) * top + ay * bottom;
    }
  }
  return out;
}

SegmentationMask remap_nearest(const SegmentationMask& mask, const PixelMap& map) {
  SegmentationMask out(map.width, map.height, 0);
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      const std::size_t i = map.index(u, v);
      if (!map.valid[i]) continue;
      const int x = int(std::floor(map.src_x[i] + 0.5));
      const int y = int(std::floor(map.src_y[i] + 0.5));
      if (!mask.contains(x, y)) continue;
      out.data[i] = mask(x, y) != 0 ? 1 : 0;
    }
  }
  return out;
}

CropWindow crop_window(const CameraIntrinsics& k, int crop_w, int crop_h) {
  if (crop_w <= 0 || crop_h <= 0) throw ValidationError("crop: size must be positive");
  if (crop_w > k.width || crop_h > k.height) {
    throw ValidationError("crop: " + std::to_string(crop_w) + "x" + std::to_string(crop_h) +
                          " exceeds image " + std::to_string(k.width) + "x" +
                          std::to_string(k.height));
  }
  CropWindow w;
  w.width = crop_w;
  w.height = crop_h;
  w.x0 = std::clamp(int(std::floor(k.cx - crop_w / 2.0 + 0.5)), 0, k.width - crop_w);
  w.y0 = std::clamp(int(std::floor(k.cy - crop_h / 2.0 + 0.5)), 0, k.height - crop_h);
  return w;
}

CameraIntrinsics crop_intrinsics(const CameraIntrinsics& k, int crop_w, int crop_h) {
  const CropWindow w = crop_window(k, crop_w, crop_h);
  CameraIntrinsics out = k;
  out.cx = k.cx - w.x0;
  out.cy = k.cy - w.y0;
  out.width = crop_w;
  out.height = crop_h;
  return out;
}

SegmentationMask rescale_mask_nearest(const SegmentationMask& mask, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw ValidationError("rescale: size must be positive");
  if (out_w == mask.width && out_h == mask.height) return mask;
  // floor((dst + 0.5) * in / out) in exact integer arithmetic.
  std::vector<int> xs(out_w);
  std::vector<int> ys(out_h);
  for (int u = 0; u < out_w; ++u) {
    xs[u] = int((std::int64_t(2 * u + 1) * mask.width) / (2 * std::int64_t(out_w)));
  }
  for (int v = 0; v < out_h; ++v) {
    ys[v] = int((std::int64_t(2 * v + 1) * mask.height) / (2 * std::int64_t(out_h)));
  }
  SegmentationMask out(out_w, out_h, 0);
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) out(u, v) = mask(xs[u], ys[v]);
  }
  return out;
}

}  // namespace airseg
