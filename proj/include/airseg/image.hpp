#pragma once

#include <cstdint>
#include <vector>

#include "airseg/camera.hpp"

namespace airseg {

// Row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * h, fill) {}

  T& operator()(int u, int v) { return data[std::size_t(v) * width + u]; }
  const T& operator()(int u, int v) const { return data[std::size_t(v) * width + u]; }
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Image&) const = default;
};

// Intensities in [0, 1].
using ImageGray = Image<double>;
// 0 = background, 1 = obstruction.
using SegmentationMask = Image<std::uint8_t>;
// Inverse pinhole depth in 1/mm; values <= 0 or non-finite are invalid.
using InverseDepthMap = Image<double>;

void validate_mask(const SegmentationMask& mask);

// For each output pixel, the source pixel coordinate it samples.
struct PixelMap {
  int width = 0;
  int height = 0;
  std::vector<double> src_x;
  std::vector<double> src_y;
  std::vector<std::uint8_t> valid;

  std::size_t index(int u, int v) const { return std::size_t(v) * width + u; }
};

PixelMap identity_map(int width, int height);

// Output pixel (u,v) is normalized by `dst`, distorted with `src`'s model and
// denormalized by `src`. Entries outside [0, w-1] x [0, h-1] of the source or
// out of the distortion model are invalid. Requires dst without distortion.
PixelMap build_undistort_map(const CameraIntrinsics& src, const CameraIntrinsics& dst);

// Bilinear sampling; invalid entries become 0.
ImageGray remap_bilinear(const ImageGray& img, const PixelMap& map);

// Nearest sampling with round-half-up; invalid entries become 0.
SegmentationMask remap_nearest(const SegmentationMask& mask, const PixelMap& map);

// Integer crop window centered on the principal point, clamped to the image.
struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

CropWindow crop_window(const CameraIntrinsics& k, int crop_w, int crop_h);
CameraIntrinsics crop_intrinsics(const CameraIntrinsics& k, int crop_w, int crop_h);

// Nearest-neighbor resize with pixel-center alignment,
// src = (dst + 0.5) * in / out - 0.5, rounded half up.
SegmentationMask rescale_mask_nearest(const SegmentationMask& mask, int out_w, int out_h);

}  // namespace airseg
