#include "airseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "airseg/error.hpp"

namespace airseg {

namespace {

// Real roots of a t^2 + b t + c = 0 in ascending order (stable form).
int solve_quadratic(double a, double b, double c, std::array<double, 2>& roots) {
  if (a == 0.0) return 0;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + std::copysign(sq, b));
  if (q == 0.0) {
    roots[0] = roots[1] = 0.0;
    return 2;
  }
  const double r0 = q / a;
  const double r1 = c / q;
  roots[0] = std::min(r0, r1);
  roots[1] = std::max(r0, r1);
  return 2;
}

}  // namespace

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * M_PI * u2);
  return mag * std::cos(2.0 * M_PI * u2);
}

void AirwayScene::validate() const {
  if (!(cylinder_radius > 0.0) || !(cylinder_length > 0.0)) {
    throw ValidationError("scene: cylinder radius and length must be positive");
  }
  if (!has_tumor) return;
  if (!(tumor_radius > 0.0 && tumor_radius < cylinder_radius)) {
    throw ValidationError("scene: require 0 < tumor_radius < cylinder_radius");
  }
  const double rho = std::hypot(tumor_center.x(), tumor_center.y());
  if (std::abs(rho - cylinder_radius) > 1e-9 * cylinder_radius) {
    throw ValidationError("scene: tumor center must lie on the wall");
  }
  if (!(tumor_center.z() >= 0.0 && tumor_center.z() <= cylinder_length)) {
    throw ValidationError("scene: tumor center outside the axial extent");
  }
}

bool AirwayScene::inside_lumen(const Vec3& p) const {
  if (!p.allFinite()) return false;
  if (!(p.z() > 0.0 && p.z() < cylinder_length)) return false;
  if (!(std::hypot(p.x(), p.y()) < cylinder_radius)) return false;
  return !has_tumor || (p - tumor_center).norm() > tumor_radius;
}

void TrajectorySpec::validate() const {
  if (n_frames < 2) throw ValidationError("trajectory: n_frames must be >= 2");
  if (!std::isfinite(start_z) || !std::isfinite(end_z) || !std::isfinite(lateral_amplitude) ||
      !(look_ahead > 0.0)) {
    throw ValidationError("trajectory: parameters must be finite, look_ahead positive");
  }
}

std::optional<double> ray_cylinder(const Vec3& o, const Vec3& d, double radius, double length) {
  std::array<double, 2> roots{};
  const double a = d.x() * d.x() + d.y() * d.y();
  const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
  const double c = o.x() * o.x() + o.y() * o.y() - radius * radius;
  const int n = solve_quadratic(a, b, c, roots);
  for (int i = 0; i < n; ++i) {
    const double t = roots[i];
    if (!(t > 0.0)) continue;
    const double z = o.z() + t * d.z();
    if (z >= 0.0 && z <= length) return t;
  }
  return std::nullopt;
}

std::optional<double> ray_sphere(const Vec3& o, const Vec3& d, const Vec3& center,
                                 double radius) {
  std::array<double, 2> roots{};
  const Vec3 oc = o - center;
  const int n = solve_quadratic(d.squaredNorm(), 2.0 * oc.dot(d),
                                oc.squaredNorm() - radius * radius, roots);
  for (int i = 0; i < n; ++i) {
    if (roots[i] > 0.0) return roots[i];
  }
  return std::nullopt;
}

std::optional<SceneHit> ray_scene(const AirwayScene& scene, const Vec3& origin,
                                  const Vec3& dir) {
  const auto wall = ray_cylinder(origin, dir, scene.cylinder_radius, scene.cylinder_length);
  if (scene.has_tumor) {
    const auto tumor = ray_sphere(origin, dir, scene.tumor_center, scene.tumor_radius);
    if (tumor && (!wall || *tumor < *wall)) {
      const double z = origin.z() + *tumor * dir.z();
      if (z >= 0.0 && z <= scene.cylinder_length) return SceneHit{*tumor, true};
    }
  }
  if (wall) return SceneHit{*wall, false};
  return std::nullopt;
}

RenderedFrame render_keyframe(const AirwayScene& scene, const Pose& pose,
                              const CameraIntrinsics& k, double depth_noise_sigma,
                              std::uint64_t noise_seed) {
  scene.validate();
  k.validate();
  if (k.distortion_model != DistortionModel::kNone) {
    throw ValidationError("render_keyframe: synthetic frames are rendered undistorted");
  }
  const Vec3 origin = pose.translation();
  if (!scene.inside_lumen(origin)) {
    throw ValidationError("render_keyframe: camera outside the lumen");
  }
  const Mat3 r = pose.rotation_matrix();
  Rng rng(noise_seed);
  RenderedFrame out{InverseDepthMap(k.width, k.height, 0.0),
                    SegmentationMask(k.width, k.height, 0)};
  for (int v = 0; v < k.height; ++v) {
    const double y = (v - k.cy) / k.fy;
    for (int u = 0; u < k.width; ++u) {
      // Camera-frame direction has unit z, so the hit parameter is z_cam.
      const Vec3 dir = r * Vec3((u - k.cx) / k.fx, y, 1.0);
      const auto hit = ray_scene(scene, origin, dir);
      if (!hit) continue;
      double z = hit->t;
      if (depth_noise_sigma > 0.0) z += depth_noise_sigma * rng.normal();
      if (!(z > 0.0)) continue;
      out.inv_depth(u, v) = 1.0 / z;
      out.mask(u, v) = hit->tumor ? 1 : 0;
    }
  }
  return out;
}

LabeledPointCloud sample_surface(const AirwayScene& scene, std::size_t n, std::uint64_t seed) {
  scene.validate();
  if (n == 0) throw ValidationError("sample_surface: n must be >= 1");
  const double r = scene.cylinder_radius;
  const double len = scene.cylinder_length;
  const double wall_area = 2.0 * M_PI * r * len;
  const double sphere_area =
      scene.has_tumor ? 4.0 * M_PI * scene.tumor_radius * scene.tumor_radius : 0.0;
  const double p_wall = wall_area / (wall_area + sphere_area);

  Rng rng(seed);
  LabeledPointCloud cloud;
  cloud.points.reserve(n);
  cloud.labels.reserve(n);
  while (cloud.size() < n) {
    if (rng.uniform() < p_wall) {
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      const double z = rng.uniform(0.0, len);
      const Vec3 p(r * std::cos(theta), r * std::sin(theta), z);
      if (scene.has_tumor && (p - scene.tumor_center).norm() < scene.tumor_radius) continue;
      cloud.push_back(p, PointLabel::kBackground);
    } else {
      const double cz = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double rho = std::sqrt(std::max(0.0, 1.0 - cz * cz));
      const Vec3 p = scene.tumor_center +
                     scene.tumor_radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), cz);
      if (std::hypot(p.x(), p.y()) > r || p.z() < 0.0 || p.z() > len) continue;
      cloud.push_back(p, PointLabel::kObstruction);
    }
  }
  return cloud;
}

namespace {

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = Vec3::UnitY().cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Pose::FromMatrix(r, eye);
}

}  // namespace

std::vector<Pose> trajectory_poses(const AirwayScene& scene, const TrajectorySpec& traj) {
  scene.validate();
  traj.validate();
  const double amp = traj.lateral_amplitude;
  std::vector<Pose> poses;
  poses.reserve(traj.n_frames);

  auto pass = [&](int count, double z0, double z1, double phase) {
    const double heading = z1 >= z0 ? 1.0 : -1.0;
    for (int j = 0; j < count; ++j) {
      const double s = count > 1 ? double(j) / (count - 1) : 0.0;
      const double z = z0 + (z1 - z0) * s;
      const Vec3 eye(amp * std::sin(3.0 * M_PI * s + phase),
                     0.5 * amp * std::sin(2.0 * M_PI * s + 0.7 + phase), z);
      const Vec3 target(0.0, 0.0, z + heading * traj.look_ahead);
      poses.push_back(look_at(eye, target));
    }
  };

  if (traj.policy == TrajectoryPolicy::kForward) {
    pass(traj.n_frames, traj.start_z, traj.end_z, 0.0);
  } else {
    const int out = (traj.n_frames + 1) / 2;
    pass(out, traj.start_z, traj.end_z, 0.0);
    pass(traj.n_frames - out, traj.end_z, traj.start_z, M_PI / 2);
  }
  return poses;
}

std::vector<KeyframeRecord> generate_sequence(const AirwayScene& scene,
                                              const TrajectorySpec& traj,
                                              const CameraIntrinsics& k,
                                              double depth_noise_sigma, std::uint64_t seed) {
  const std::vector<Pose> poses = trajectory_poses(scene, traj);
  std::vector<KeyframeRecord> frames;
  frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!scene.inside_lumen(poses[i].translation())) {
      throw ValidationError("generate_sequence: frame " + std::to_string(i) +
                            " leaves the lumen");
    }
    RenderedFrame rf = render_keyframe(scene, poses[i], k, depth_noise_sigma,
                                       seed * 0x9E3779B97F4A7C15ULL + i);
    frames.push_back({std::int64_t(i), k, poses[i], std::move(rf.inv_depth),
                      std::move(rf.mask)});
  }
  return frames;
}

}  // namespace airseg
