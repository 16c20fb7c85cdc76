#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "airseg/fusion.hpp"
#include "airseg/io.hpp"
#include "airseg/metrics.hpp"
#include "airseg/registration.hpp"
#include "airseg/synth.hpp"

namespace airseg {

namespace fs = std::filesystem;

enum class InitMode {
  kAuto,      // better of identity and principal-axis alignment
  kPca,
  kIdentity,
};

const char* to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& name);

struct SynthConfig {
  AirwayScene scene;
  TrajectorySpec trajectory;
  CameraIntrinsics camera{160.0, 160.0, 127.5, 95.5, 256, 192, DistortionModel::kNone, {}};
  std::size_t ct_points = 2'000'000;
  double depth_noise = 0.0;  // mm-equivalent sigma on inverse depth, 0 = off
  std::uint64_t seed = 7;
};

struct PipelineConfig {
  FusionFilter fusion;
  IcpParams icp{.max_points = 30000};
  InitMode init = InitMode::kAuto;
  // A run that stops at max_iterations still succeeds when its final RMS is
  // at or below this bound (mm).
  double icp_fail_rms = 1.0;
  double coverage_threshold = 1.0;  // mm
  PrecisionPolicy precision_policy = PrecisionPolicy::kAllKeyframes;
  double heatmap_d_max = 5.0;  // mm
  int frame_stride = 2;
  SynthConfig synth;

  void validate() const;
};

// Applies every recognized key; unknown keys raise ValidationError.
void apply_config(PipelineConfig& cfg, const io::KeyValues& kv, const std::string& origin);
PipelineConfig load_config(const fs::path& path);
std::string format_config(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Commands. Each writes its outputs atomically and logs progress to `log`.

void cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir, std::ostream& log);

io::ValidationReport cmd_validate(const fs::path& dataset, std::ostream& log);

struct FuseSummary {
  std::size_t frames = 0;
  std::size_t points = 0;
  std::size_t obstruction_points = 0;
};

FuseSummary cmd_fuse(const fs::path& dataset, const PipelineConfig& cfg,
                     const fs::path& out_cloud, std::ostream& log);

struct RegisterOutputs {
  fs::path transform;
  fs::path aligned_cloud;
  fs::path log;
};

RegisterOutputs register_outputs_for(const fs::path& out_prefix);

// Throws NumericalError when ICP fails, or stops unconverged with RMS above
// icp_fail_rms; the convergence log is written either way.
RegistrationSummary cmd_register(const fs::path& recon_file, const fs::path& ct_file,
                                 const PipelineConfig& cfg,
                                 const std::optional<fs::path>& init_file,
                                 const fs::path& out_prefix, std::ostream& log);

// Writes the report and heatmap. Throws NumericalError after writing the
// report when segmentation precision is undefined.
MetricsReport cmd_eval(const fs::path& recon_file, const fs::path& ct_file,
                       const fs::path& transform_file, const fs::path& dataset,
                       const PipelineConfig& cfg, const fs::path& report_file,
                       const fs::path& heatmap_file, std::ostream& log);

// fuse -> register -> eval with every intermediate written under `out_dir`.
MetricsReport cmd_pipeline(const fs::path& dataset, const PipelineConfig& cfg,
                           const fs::path& out_dir, std::ostream& log);

}  // namespace airseg
