#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "airseg/error.hpp"

namespace airseg {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Mat4 = Matrix4<double>;
using Quat = Eigen::Quaternion<double>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// Rigid camera-to-world transform: X_world = R * X_cam + t (millimeters).
// The rotation is stored as a unit quaternion; matrices are derived on demand.
template <typename Scalar>
class RigidTransform {
 public:
  using Vector = Vector3<Scalar>;
  using Rotation = Eigen::Quaternion<Scalar>;

  RigidTransform() : rotation_(Rotation::Identity()), translation_(Vector::Zero()) {}

  // Normalizes `q`; throws when it is not finite or close to zero.
  RigidTransform(const Rotation& q, const Vector& t) : rotation_(q), translation_(t) {
    const Scalar n = q.norm();
    if (!std::isfinite(n) || n < Scalar(1e-12) || !t.allFinite()) {
      throw ValidationError("pose: rotation or translation is not finite/valid");
    }
    rotation_.coeffs() /= n;
  }

  static RigidTransform Identity() { return {}; }

  static RigidTransform FromMatrix(const Matrix3<Scalar>& r, const Vector& t) {
    return RigidTransform(Rotation(r), t);
  }

  const Rotation& rotation() const { return rotation_; }
  const Vector& translation() const { return translation_; }
  Matrix3<Scalar> rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_matrix();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vector operator*(const Vector& x) const { return rotation_ * x + translation_; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return RigidTransform(rotation_ * rhs.rotation_,
                          rotation_ * rhs.translation_ + translation_);
  }

  RigidTransform inverse() const {
    const Rotation inv = rotation_.conjugate();
    return RigidTransform(inv, -(inv * translation_));
  }

 private:
  Rotation rotation_;
  Vector translation_;
};

// x -> scale * R * x + t
template <typename Scalar>
class Similarity {
 public:
  using Vector = Vector3<Scalar>;
  using Rotation = Eigen::Quaternion<Scalar>;

  Similarity() : scale_(1), rotation_(Rotation::Identity()), translation_(Vector::Zero()) {}

  Similarity(Scalar scale, const Rotation& q, const Vector& t)
      : scale_(scale), rotation_(q), translation_(t) {
    const Scalar n = q.norm();
    if (!(scale > Scalar(0)) || !std::isfinite(scale) || !std::isfinite(n) ||
        n < Scalar(1e-12) || !t.allFinite()) {
      throw ValidationError("similarity: scale must be positive and all parameters finite");
    }
    rotation_.coeffs() /= n;
  }

  explicit Similarity(const RigidTransform<Scalar>& rigid)
      : Similarity(Scalar(1), rigid.rotation(), rigid.translation()) {}

  static Similarity Identity() { return {}; }

  static Similarity FromMatrix(Scalar scale, const Matrix3<Scalar>& r, const Vector& t) {
    return Similarity(scale, Rotation(r), t);
  }

  Scalar scale() const { return scale_; }
  const Rotation& rotation() const { return rotation_; }
  const Vector& translation() const { return translation_; }
  Matrix3<Scalar> rotation_matrix() const { return rotation_.toRotationMatrix(); }

  // Homogeneous 4x4 with the scale folded into the upper-left block.
  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = scale_ * rotation_matrix();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vector operator*(const Vector& x) const { return scale_ * (rotation_ * x) + translation_; }

  Similarity operator*(const Similarity& rhs) const {
    return Similarity(scale_ * rhs.scale_, rotation_ * rhs.rotation_,
                      scale_ * (rotation_ * rhs.translation_) + translation_);
  }

  Similarity inverse() const {
    const Rotation inv = rotation_.conjugate();
    const Scalar s = Scalar(1) / scale_;
    return Similarity(s, inv, -s * (inv * translation_));
  }

 private:
  Scalar scale_;
  Rotation rotation_;
  Vector translation_;
};

using Pose = RigidTransform<double>;
using SimilarityTransform = Similarity<double>;

template <typename Scalar>
Vector3<Scalar> pose_apply(const RigidTransform<Scalar>& p, const Vector3<Scalar>& x) {
  return p * x;
}

template <typename Scalar>
RigidTransform<Scalar> pose_compose(const RigidTransform<Scalar>& a,
                                    const RigidTransform<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
RigidTransform<Scalar> pose_inverse(const RigidTransform<Scalar>& p) {
  return p.inverse();
}

template <typename Scalar>
Vector3<Scalar> similarity_apply(const Similarity<Scalar>& s, const Vector3<Scalar>& x) {
  return s * x;
}

enum class PointLabel : std::uint8_t { kBackground = 0, kObstruction = 1 };

// Points in millimeters with a parallel label channel. `source_frames` is
// optional provenance (frame id per point) filled in by fusion.
struct LabeledPointCloud {
  std::vector<Vec3> points;
  std::vector<PointLabel> labels;
  std::vector<std::int64_t> source_frames;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_source_frames() const { return source_frames.size() == points.size(); }

  void push_back(const Vec3& p, PointLabel label) {
    points.push_back(p);
    labels.push_back(label);
  }

  std::size_t count(PointLabel label) const;
  // Throws ValidationError on length mismatch or non-finite points.
  void validate() const;
  void append(const LabeledPointCloud& other);
};

LabeledPointCloud transformed(const LabeledPointCloud& cloud, const SimilarityTransform& s);
LabeledPointCloud select_label(const LabeledPointCloud& cloud, PointLabel label);

}  // namespace airseg
