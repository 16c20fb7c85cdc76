#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "airseg/camera.hpp"
#include "airseg/fusion.hpp"
#include "airseg/geometry.hpp"
#include "airseg/image.hpp"
#include "airseg/metrics.hpp"

namespace airseg::io {

namespace fs = std::filesystem;

// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

// Shortest round-trip decimal representation.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Key-value text: `key = value` lines, `#` comments, blank lines ignored.

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues read_key_values(const fs::path& path);
double kv_double(const KeyValues& kv, const std::string& key, const std::string& origin);
int kv_int(const KeyValues& kv, const std::string& key, const std::string& origin);

// ---------------------------------------------------------------------------
// Intrinsics file. Keys: width, height, fx, fy, cx, cy, distortion_model
// (none | radtan | fisheye), coefficients (space separated). Optional:
// crop_width, crop_height (raw masks are undistorted and cropped at load),
// depth_width, depth_height (inverse-depth resolution, default frame size).

struct DatasetCamera {
  CameraIntrinsics raw;  // as declared; masks on disk use this geometry
  std::optional<int> crop_width;
  std::optional<int> crop_height;
  std::optional<int> depth_width;
  std::optional<int> depth_height;

  // Undistorted, cropped frame geometry used by fusion and projection.
  CameraIntrinsics frame() const;
  bool needs_mask_remap() const;
  int inv_depth_width() const;
  int inv_depth_height() const;
};

DatasetCamera parse_camera(const KeyValues& kv, const std::string& origin);
std::string format_camera(const DatasetCamera& cam);

// ---------------------------------------------------------------------------
// Poses: `frame_id tx ty tz qx qy qz qw` per line, camera-to-world, mm.

struct PoseEntry {
  std::int64_t frame_id = 0;
  Pose pose;
};

std::vector<PoseEntry> parse_poses(const std::string& text, const std::string& origin);
std::string format_poses(const std::vector<PoseEntry>& poses);

// ---------------------------------------------------------------------------
// Images. PFM: single channel "Pf", little-endian (scale -1.0), rows stored
// bottom to top. PGM: binary P5, maxval 255, masks stored as 0/255.

std::string encode_pfm(const InverseDepthMap& map);
InverseDepthMap decode_pfm(const std::string& bytes, const std::string& origin);
std::string encode_mask_pgm(const SegmentationMask& mask);
// Accepts only 0 and 255 samples.
SegmentationMask decode_mask_pgm(const std::string& bytes, const std::string& origin);

// ---------------------------------------------------------------------------
// Binary little-endian PLY point clouds.
//   labeled cloud: x y z (float), red green blue (uchar), label (uchar)
//   heatmap:       x y z (float), red green blue (uchar), distance (float)

Rgb label_color(PointLabel label);
std::string encode_labeled_ply(const LabeledPointCloud& cloud);
// Reads any binary_little_endian or ascii vertex PLY with x/y/z; the label
// property is optional (defaults to Background).
LabeledPointCloud decode_ply(const std::string& bytes, const std::string& origin);
std::string encode_heatmap_ply(const HeatmapCloud& heat);

// ---------------------------------------------------------------------------
// Transform file: 4x4 homogeneous matrix (row-major, scale folded in),
// scale, and ICP diagnostics.

std::string format_transform(const RegistrationSummary& reg);
RegistrationSummary parse_transform(const std::string& text, const std::string& origin);

std::string format_report(const MetricsReport& report);
MetricsReport parse_report(const std::string& text, const std::string& origin);

// ---------------------------------------------------------------------------
// Dataset layout:
//   intrinsics.txt, poses.txt, depth/<id>.pfm, masks/<id>.pgm,
//   optional ct_ground_truth.ply

struct DatasetPaths {
  fs::path root;
  fs::path intrinsics() const { return root / "intrinsics.txt"; }
  fs::path poses() const { return root / "poses.txt"; }
  fs::path depth_dir() const { return root / "depth"; }
  fs::path mask_dir() const { return root / "masks"; }
  fs::path ct() const { return root / "ct_ground_truth.ply"; }
  fs::path depth(std::int64_t id) const;
  fs::path mask(std::int64_t id) const;
};

std::string frame_file_stem(std::int64_t id);

struct ValidationReport {
  std::vector<std::string> problems;
  std::size_t frames = 0;
  bool ok() const { return problems.empty(); }
};

ValidationReport validate_dataset(const fs::path& root);

// Loads every `frame_stride`-th pose entry (file order) as a keyframe with
// masks brought to frame geometry. Throws ValidationError listing problems.
std::vector<KeyframeRecord> load_keyframes(const fs::path& root, int frame_stride = 1);

void write_dataset(const fs::path& root, const DatasetCamera& camera,
                   const std::vector<KeyframeRecord>& frames,
                   const LabeledPointCloud* ct = nullptr);

}  // namespace airseg::io
