#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "airseg/error.hpp"
#include "airseg/geometry.hpp"

namespace airseg {

enum class DistortionModel { kNone, kRadTan, kFisheyeEquidistant };

std::string to_string(DistortionModel model);
DistortionModel distortion_model_from_string(const std::string& name);
std::size_t coefficient_count(DistortionModel model);

// Pinhole intrinsics in pixels. Pixel (0,0) is the center of the top-left
// pixel. Coefficients: RadTan k1,k2,p1,p2,k3; FisheyeEquidistant k1..k4.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  DistortionModel distortion_model = DistortionModel::kNone;
  std::vector<double> coefficients;

  void validate() const;

  Eigen::Vector2d normalize(const Eigen::Vector2d& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
  }
  Eigen::Vector2d denormalize(const Eigen::Vector2d& xn) const {
    return {fx * xn.x() + cx, fy * xn.y() + cy};
  }

  // Same pinhole parameters, no distortion.
  CameraIntrinsics undistorted() const;

  // Intrinsics for the same camera sampled at another resolution, keeping
  // pixel centers aligned: c' = (c + 0.5) * out / in - 0.5.
  CameraIntrinsics rescaled(int out_width, int out_height) const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// Camera-frame point to pixel. No bounds test; caller checks z > 0.
inline Eigen::Vector2d project_pinhole(const CameraIntrinsics& k, const Vec3& x_cam) {
  return {k.fx * x_cam.x() / x_cam.z() + k.cx, k.fy * x_cam.y() / x_cam.z() + k.cy};
}

// ---------------------------------------------------------------------------
// Lens distortion on normalized coordinates.

template <typename Scalar>
struct DistortionResult {
  Eigen::Matrix<Scalar, 2, 1> point;
  bool in_model = true;
};

// Forward distortion. Throws ValidationError for non-finite input or a
// coefficient count that does not match the model. A fisheye incidence angle
// at or beyond 90 degrees is reported through `in_model`.
template <typename Scalar>
DistortionResult<Scalar> distort_point(const Eigen::Matrix<Scalar, 2, 1>& xn,
                                       DistortionModel model,
                                       const std::vector<double>& c) {
  if (!xn.allFinite()) throw ValidationError("distort_point: non-finite input");
  if (c.size() != coefficient_count(model)) {
    throw ValidationError("distort_point: coefficient count does not match model");
  }
  const Scalar x = xn.x();
  const Scalar y = xn.y();
  switch (model) {
    case DistortionModel::kNone:
      return {xn, true};
    case DistortionModel::kRadTan: {
      const Scalar k1 = c[0], k2 = c[1], p1 = c[2], p2 = c[3], k3 = c[4];
      const Scalar r2 = x * x + y * y;
      const Scalar radial = Scalar(1) + r2 * (k1 + r2 * (k2 + r2 * k3));
      const Scalar xd = x * radial + Scalar(2) * p1 * x * y + p2 * (r2 + Scalar(2) * x * x);
      const Scalar yd = y * radial + p1 * (r2 + Scalar(2) * y * y) + Scalar(2) * p2 * x * y;
      return {{xd, yd}, true};
    }
    case DistortionModel::kFisheyeEquidistant: {
      const Scalar r = std::hypot(x, y);
      if (r == Scalar(0)) return {xn, true};
      const Scalar theta = std::atan(r);
      const Scalar t2 = theta * theta;
      const Scalar theta_d =
          theta * (Scalar(1) + t2 * (c[0] + t2 * (c[1] + t2 * (c[2] + t2 * c[3]))));
      const Scalar f = theta_d / r;
      return {{x * f, y * f}, theta < Scalar(M_PI / 2)};
    }
  }
  return {xn, false};
}

struct UndistortStatus {
  int iterations = 0;
  double residual = 0.0;
};

inline constexpr int kUndistortMaxIterations = 50;
inline constexpr double kUndistortTolerance = 1e-10;

// Inverts distort_point by Newton iteration. Throws NumericalError carrying
// the final residual when it does not converge.
Eigen::Vector2d undistort_point(const Eigen::Vector2d& xd, DistortionModel model,
                                const std::vector<double>& coefficients,
                                UndistortStatus* status = nullptr);

}  // namespace airseg
