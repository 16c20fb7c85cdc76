#include "airseg/camera.hpp"

#include <cmath>
#include <sstream>

namespace airseg {

std::string to_string(DistortionModel model) {
  switch (model) {
    case DistortionModel::kNone:
      return "none";
    case DistortionModel::kRadTan:
      return "radtan";
    case DistortionModel::kFisheyeEquidistant:
      return "fisheye";
  }
  return "none";
}

DistortionModel distortion_model_from_string(const std::string& name) {
  if (name == "none") return DistortionModel::kNone;
  if (name == "radtan") return DistortionModel::kRadTan;
  if (name == "fisheye" || name == "fisheye_equidistant") {
    return DistortionModel::kFisheyeEquidistant;
  }
  throw ValidationError("unknown distortion model '" + name + "'");
}

std::size_t coefficient_count(DistortionModel model) {
  switch (model) {
    case DistortionModel::kNone:
      return 0;
    case DistortionModel::kRadTan:
      return 5;
    case DistortionModel::kFisheyeEquidistant:
      return 4;
  }
  return 0;
}

void CameraIntrinsics::validate() const {
  std::ostringstream why;
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    why << "focal lengths must be positive; ";
  }
  if (width <= 0 || height <= 0) why << "image size must be positive; ";
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    why << "principal point (" << cx << ", " << cy << ") outside " << width << "x" << height
        << "; ";
  }
  if (coefficients.size() != coefficient_count(distortion_model)) {
    why << "model " << to_string(distortion_model) << " expects "
        << coefficient_count(distortion_model) << " coefficients, got " << coefficients.size()
        << "; ";
  }
  for (double c : coefficients) {
    if (!std::isfinite(c)) why << "non-finite distortion coefficient; ";
  }
  const std::string msg = why.str();
  if (!msg.empty()) throw ValidationError("intrinsics: " + msg.substr(0, msg.size() - 2));
}

CameraIntrinsics CameraIntrinsics::undistorted() const {
  CameraIntrinsics k = *this;
  k.distortion_model = DistortionModel::kNone;
  k.coefficients.clear();
  return k;
}

CameraIntrinsics CameraIntrinsics::rescaled(int out_width, int out_height) const {
  if (out_width <= 0 || out_height <= 0) {
    throw ValidationError("intrinsics: rescale target must be positive");
  }
  if (out_width == width && out_height == height) return *this;
  const double sx = double(out_width) / width;
  const double sy = double(out_height) / height;
  CameraIntrinsics k = *this;
  k.fx = fx * sx;
  k.fy = fy * sy;
  k.cx = (cx + 0.5) * sx - 0.5;
  k.cy = (cy + 0.5) * sy - 0.5;
  k.width = out_width;
  k.height = out_height;
  return k;
}

namespace {

// Solves theta * (1 + k1 t^2 + k2 t^4 + k3 t^6 + k4 t^8) = theta_d for theta.
double invert_fisheye_angle(double theta_d, const std::vector<double>& c, UndistortStatus& st) {
  double theta = theta_d;
  for (st.iterations = 1; st.iterations <= kUndistortMaxIterations; ++st.iterations) {
    const double t2 = theta * theta;
    const double f = theta * (1.0 + t2 * (c[0] + t2 * (c[1] + t2 * (c[2] + t2 * c[3])))) -
                     theta_d;
    const double df =
        1.0 + t2 * (3.0 * c[0] + t2 * (5.0 * c[1] + t2 * (7.0 * c[2] + t2 * 9.0 * c[3])));
    st.residual = std::abs(f);
    if (st.residual < kUndistortTolerance) return theta;
    if (df == 0.0 || !std::isfinite(df)) break;
    theta -= f / df;
  }
  throw NumericalError("undistort_point: fisheye inversion did not converge (residual " +
                       std::to_string(st.residual) + ")");
}

}  // namespace

Eigen::Vector2d undistort_point(const Eigen::Vector2d& xd, DistortionModel model,
                                const std::vector<double>& c, UndistortStatus* status) {
  if (!xd.allFinite()) throw ValidationError("undistort_point: non-finite input");
  if (c.size() != coefficient_count(model)) {
    throw ValidationError("undistort_point: coefficient count does not match model");
  }
  UndistortStatus st;
  Eigen::Vector2d result = xd;
  switch (model) {
    case DistortionModel::kNone:
      break;
    case DistortionModel::kFisheyeEquidistant: {
      const double rd = xd.norm();
      if (rd == 0.0) break;
      const double theta = invert_fisheye_angle(rd, c, st);
      if (!(theta < M_PI / 2)) {
        throw NumericalError("undistort_point: fisheye angle beyond 90 degrees");
      }
      result = xd * (std::tan(theta) / rd);
      break;
    }
    case DistortionModel::kRadTan: {
      const double k1 = c[0], k2 = c[1], p1 = c[2], p2 = c[3], k3 = c[4];
      const auto jacobian = [&](const Eigen::Vector2d& x) {
        const double u = x.x(), v = x.y();
        const double r2 = u * u + v * v;
        const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        const double dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);  // d radial / d r2
        Eigen::Matrix2d j;
        j(0, 0) = radial + 2.0 * u * u * dradial + 2.0 * p1 * v + 6.0 * p2 * u;
        j(0, 1) = 2.0 * u * v * dradial + 2.0 * p1 * u + 2.0 * p2 * v;
        j(1, 0) = j(0, 1);
        j(1, 1) = radial + 2.0 * v * v * dradial + 6.0 * p1 * v + 2.0 * p2 * u;
        return j;
      };
      Eigen::Vector2d x = xd;
      bool done = false;
      for (st.iterations = 1; st.iterations <= kUndistortMaxIterations; ++st.iterations) {
        const Eigen::Vector2d f = distort_point<double>(x, model, c).point - xd;
        st.residual = f.norm();
        if (st.residual < kUndistortTolerance) {
          done = true;
          break;
        }
        const Eigen::Matrix2d j = jacobian(x);
        const double det = j.determinant();
        if (det == 0.0 || !std::isfinite(det)) break;
        x -= j.inverse() * f;
        if (!x.allFinite()) break;
      }
      if (!done) {
        throw NumericalError("undistort_point: radtan inversion did not converge (residual " +
                             std::to_string(st.residual) + ")");
      }
      // A root past the fold of the radial polynomial is not the physical preimage:
      // r * radial(r^2) must still be increasing there, with a positive factor.
      const double r2 = x.squaredNorm();
      const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
      const double slope = radial + 2.0 * r2 * (k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2));
      if (!(radial > 0.0 && slope > 0.0)) {
        throw NumericalError("undistort_point: radtan solution lies beyond the distortion fold");
      }
      result = x;
      break;
    }
  }
  if (status) *status = st;
  return result;
}

}  // namespace airseg
