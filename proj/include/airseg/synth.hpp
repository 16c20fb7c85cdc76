#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "airseg/camera.hpp"
#include "airseg/fusion.hpp"
#include "airseg/geometry.hpp"

namespace airseg {

// Straight airway: inner wall of a cylinder around world +z, z in [0, length],
// with a spherical tumor centered on the wall. Only the part of the sphere
// inside the lumen is visible.
struct AirwayScene {
  double cylinder_radius = 9.0;   // mm
  double cylinder_length = 80.0;  // mm
  Vec3 tumor_center{9.0, 0.0, 40.0};
  double tumor_radius = 5.0;  // mm
  bool has_tumor = true;

  void validate() const;
  // Strictly inside the free lumen: within the wall, between the ends and
  // outside the tumor.
  bool inside_lumen(const Vec3& p) const;
};

enum class TrajectoryPolicy {
  kForward,     // start -> end, looking down +z
  kOutAndBack,  // first half forward, second half returns looking down -z
};

struct TrajectorySpec {
  int n_frames = 40;
  double start_z = 4.0;
  double end_z = 76.0;
  double lateral_amplitude = 1.5;  // mm
  double look_ahead = 20.0;        // mm along the direction of travel
  TrajectoryPolicy policy = TrajectoryPolicy::kOutAndBack;

  void validate() const;
};

// Smallest positive t with origin + t*dir on the inner wall, z in [0, length].
std::optional<double> ray_cylinder(const Vec3& origin, const Vec3& dir, double radius,
                                   double length);

// Smallest positive t with origin + t*dir on the sphere.
std::optional<double> ray_sphere(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                 double radius);

struct SceneHit {
  double t = 0.0;
  bool tumor = false;
};

// Nearest visible surface along the ray.
std::optional<SceneHit> ray_scene(const AirwayScene& scene, const Vec3& origin, const Vec3& dir);

struct RenderedFrame {
  InverseDepthMap inv_depth;  // 1 / z_cam, 0 where the ray escapes
  SegmentationMask mask;
};

// Casts one ray through each pixel center. Throws ValidationError when the
// camera is outside the lumen or the intrinsics carry distortion.
RenderedFrame render_keyframe(const AirwayScene& scene, const Pose& pose,
                              const CameraIntrinsics& k, double depth_noise_sigma = 0.0,
                              std::uint64_t noise_seed = 0);

// Area-uniform samples on the visible wall and tumor cap, labeled by surface.
LabeledPointCloud sample_surface(const AirwayScene& scene, std::size_t n, std::uint64_t seed);

// Camera-to-world poses along the trajectory.
std::vector<Pose> trajectory_poses(const AirwayScene& scene, const TrajectorySpec& traj);

// Throws ValidationError naming the frame when a pose leaves the lumen.
std::vector<KeyframeRecord> generate_sequence(const AirwayScene& scene,
                                              const TrajectorySpec& traj,
                                              const CameraIntrinsics& k,
                                              double depth_noise_sigma = 0.0,
                                              std::uint64_t seed = 0);

// Portable uniform/normal draws (std distributions are not specified
// bit-exactly across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace airseg
