#include "airseg/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "airseg/error.hpp"

namespace airseg {

const char* to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kAuto:
      return "auto";
    case InitMode::kPca:
      return "pca";
    case InitMode::kIdentity:
      return "identity";
  }
  return "auto";
}

InitMode init_mode_from_string(const std::string& name) {
  if (name == "auto") return InitMode::kAuto;
  if (name == "pca") return InitMode::kPca;
  if (name == "identity") return InitMode::kIdentity;
  throw ValidationError("unknown init mode '" + name + "' (auto | pca | identity)");
}

namespace {

const char* to_string(TrajectoryPolicy p) {
  return p == TrajectoryPolicy::kForward ? "forward" : "out_and_back";
}

TrajectoryPolicy trajectory_policy_from_string(const std::string& s) {
  if (s == "forward") return TrajectoryPolicy::kForward;
  if (s == "out_and_back") return TrajectoryPolicy::kOutAndBack;
  throw ValidationError("unknown trajectory policy '" + s + "' (forward | out_and_back)");
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ValidationError(what + ": '" + s + "' is not a boolean");
}

std::string fmt(double v) { return io::format_double(v); }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

LabeledPointCloud read_cloud(const fs::path& path) {
  return io::decode_ply(io::read_file(path), path.string());
}

}  // namespace

void PipelineConfig::validate() const {
  fusion.validate();
  icp.validate();
  if (!(coverage_threshold > 0.0)) throw ValidationError("config: coverage_threshold must be > 0");
  if (!(heatmap_d_max > 0.0)) throw ValidationError("config: heatmap_d_max must be > 0");
  if (frame_stride < 1) throw ValidationError("config: frame_stride must be >= 1");
  if (!(icp_fail_rms > 0.0)) throw ValidationError("config: icp_fail_rms must be > 0");
  synth.scene.validate();
  synth.trajectory.validate();
  synth.camera.validate();
  if (synth.ct_points == 0) throw ValidationError("config: synth_ct_points must be >= 1");
  if (!(synth.depth_noise >= 0.0)) throw ValidationError("config: synth_depth_noise must be >= 0");
}

void apply_config(PipelineConfig& cfg, const io::KeyValues& kv, const std::string& origin) {
  for (const auto& [key, value] : kv) {
    const std::string what = origin + ": " + key;
    auto num = [&] {
      try {
        return io::kv_double(kv, key, origin);
      } catch (const ValidationError&) {
        throw ValidationError(what + ": '" + value + "' is not a number");
      }
    };
    auto integer = [&] { return io::kv_int(kv, key, origin); };
    SynthConfig& s = cfg.synth;
    if (key == "min_inv_depth") cfg.fusion.min_inv_depth = num();
    else if (key == "max_inv_depth") cfg.fusion.max_inv_depth = num();
    else if (key == "border_margin") cfg.fusion.border_margin = integer();
    else if (key == "pixel_stride") cfg.fusion.pixel_stride = integer();
    else if (key == "frame_stride") cfg.frame_stride = integer();
    else if (key == "icp_max_iterations") cfg.icp.max_iterations = integer();
    else if (key == "icp_rel_tol") cfg.icp.rel_tol = num();
    else if (key == "icp_max_corr_dist") cfg.icp.max_corr_dist = num();
    else if (key == "icp_trim_fraction") cfg.icp.trim_fraction = num();
    else if (key == "icp_with_scale") cfg.icp.with_scale = parse_bool(value, what);
    else if (key == "icp_max_points") cfg.icp.max_points = std::size_t(std::max(0, integer()));
    else if (key == "icp_fail_rms") cfg.icp_fail_rms = num();
    else if (key == "init") cfg.init = init_mode_from_string(value);
    else if (key == "coverage_threshold") cfg.coverage_threshold = num();
    else if (key == "precision_policy") cfg.precision_policy = precision_policy_from_string(value);
    else if (key == "heatmap_d_max") cfg.heatmap_d_max = num();
    else if (key == "seed") s.seed = std::uint64_t(io::kv_int(kv, key, origin));
    else if (key == "synth_n_frames") s.trajectory.n_frames = integer();
    else if (key == "synth_start_z") s.trajectory.start_z = num();
    else if (key == "synth_end_z") s.trajectory.end_z = num();
    else if (key == "synth_lateral_amplitude") s.trajectory.lateral_amplitude = num();
    else if (key == "synth_look_ahead") s.trajectory.look_ahead = num();
    else if (key == "synth_policy") s.trajectory.policy = trajectory_policy_from_string(value);
    else if (key == "synth_cylinder_radius") s.scene.cylinder_radius = num();
    else if (key == "synth_cylinder_length") s.scene.cylinder_length = num();
    else if (key == "synth_tumor_radius") s.scene.tumor_radius = num();
    else if (key == "synth_tumor") s.scene.has_tumor = parse_bool(value, what);
    else if (key == "synth_tumor_center") {
      std::istringstream in(value);
      Vec3 c;
      if (!(in >> c.x() >> c.y() >> c.z())) throw ValidationError(what + ": need 'x y z'");
      s.scene.tumor_center = c;
    }
    else if (key == "synth_width") s.camera.width = integer();
    else if (key == "synth_height") s.camera.height = integer();
    else if (key == "synth_fx") s.camera.fx = num();
    else if (key == "synth_fy") s.camera.fy = num();
    else if (key == "synth_cx") s.camera.cx = num();
    else if (key == "synth_cy") s.camera.cy = num();
    else if (key == "synth_ct_points") s.ct_points = std::size_t(std::max(0, integer()));
    else if (key == "synth_depth_noise") s.depth_noise = num();
    else throw ValidationError(origin + ": unknown key '" + key + "'");
  }
}

PipelineConfig load_config(const fs::path& path) {
  PipelineConfig cfg;
  apply_config(cfg, io::read_key_values(path), path.string());
  cfg.validate();
  return cfg;
}

std::string format_config(const PipelineConfig& c) {
  std::ostringstream o;
  const SynthConfig& s = c.synth;
  o << "# pipeline configuration (lengths in mm, inverse depths in 1/mm)\n";
  o << "min_inv_depth = " << fmt(c.fusion.min_inv_depth) << "\n";
  o << "max_inv_depth = " << fmt(c.fusion.max_inv_depth) << "\n";
  o << "border_margin = " << c.fusion.border_margin << "\n";
  o << "pixel_stride = " << c.fusion.pixel_stride << "\n";
  o << "frame_stride = " << c.frame_stride << "\n";
  o << "icp_max_iterations = " << c.icp.max_iterations << "\n";
  o << "icp_rel_tol = " << fmt(c.icp.rel_tol) << "\n";
  o << "icp_max_corr_dist = " << fmt(c.icp.max_corr_dist) << "\n";
  o << "icp_trim_fraction = " << fmt(c.icp.trim_fraction) << "\n";
  o << "icp_with_scale = " << (c.icp.with_scale ? "true" : "false") << "\n";
  o << "icp_max_points = " << c.icp.max_points << "\n";
  o << "icp_fail_rms = " << fmt(c.icp_fail_rms) << "\n";
  o << "init = " << to_string(c.init) << "\n";
  o << "coverage_threshold = " << fmt(c.coverage_threshold) << "\n";
  o << "precision_policy = " << to_string(c.precision_policy) << "\n";
  o << "heatmap_d_max = " << fmt(c.heatmap_d_max) << "\n";
  o << "seed = " << s.seed << "\n";
  o << "synth_n_frames = " << s.trajectory.n_frames << "\n";
  o << "synth_start_z = " << fmt(s.trajectory.start_z) << "\n";
  o << "synth_end_z = " << fmt(s.trajectory.end_z) << "\n";
  o << "synth_lateral_amplitude = " << fmt(s.trajectory.lateral_amplitude) << "\n";
  o << "synth_look_ahead = " << fmt(s.trajectory.look_ahead) << "\n";
  o << "synth_policy = " << to_string(s.trajectory.policy) << "\n";
  o << "synth_cylinder_radius = " << fmt(s.scene.cylinder_radius) << "\n";
  o << "synth_cylinder_length = " << fmt(s.scene.cylinder_length) << "\n";
  o << "synth_tumor = " << (s.scene.has_tumor ? "true" : "false") << "\n";
  o << "synth_tumor_center = " << fmt(s.scene.tumor_center.x()) << " "
    << fmt(s.scene.tumor_center.y()) << " " << fmt(s.scene.tumor_center.z()) << "\n";
  o << "synth_tumor_radius = " << fmt(s.scene.tumor_radius) << "\n";
  o << "synth_width = " << s.camera.width << "\n";
  o << "synth_height = " << s.camera.height << "\n";
  o << "synth_fx = " << fmt(s.camera.fx) << "\n";
  o << "synth_fy = " << fmt(s.camera.fy) << "\n";
  o << "synth_cx = " << fmt(s.camera.cx) << "\n";
  o << "synth_cy = " << fmt(s.camera.cy) << "\n";
  o << "synth_ct_points = " << s.ct_points << "\n";
  o << "synth_depth_noise = " << fmt(s.depth_noise) << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------

void cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const SynthConfig& s = cfg.synth;
  const auto t0 = Clock::now();
  const std::vector<KeyframeRecord> frames =
      generate_sequence(s.scene, s.trajectory, s.camera, s.depth_noise, s.seed);
  log << "synth: rendered " << frames.size() << " frames (" << s.camera.width << "x"
      << s.camera.height << ") in " << std::fixed << std::setprecision(2) << seconds_since(t0)
      << " s\n";
  const LabeledPointCloud ct = sample_surface(s.scene, s.ct_points, s.seed);
  log << "synth: sampled " << ct.size() << " ground-truth surface points ("
      << ct.count(PointLabel::kObstruction) << " on the tumor)\n";
  io::DatasetCamera cam;
  cam.raw = s.camera;
  io::write_dataset(out_dir, cam, frames, &ct);
  io::write_file_atomic(out_dir / "synth_config.txt", format_config(cfg));
  log << "synth: wrote " << out_dir.string() << "\n";
}

io::ValidationReport cmd_validate(const fs::path& dataset, std::ostream& log) {
  io::ValidationReport report = io::validate_dataset(dataset);
  if (report.ok()) {
    log << dataset.string() << ": valid (" << report.frames << " frames)\n";
  } else {
    log << dataset.string() << ": invalid\n";
    for (const auto& p : report.problems) log << "  " << p << "\n";
  }
  return report;
}

FuseSummary cmd_fuse(const fs::path& dataset, const PipelineConfig& cfg,
                     const fs::path& out_cloud, std::ostream& log) {
  cfg.validate();
  const std::vector<KeyframeRecord> frames = io::load_keyframes(dataset, cfg.frame_stride);
  if (frames.empty()) throw ValidationError("fuse: dataset has no keyframes");
  LabeledPointCloud cloud;
  double total_s = 0.0;
  for (const auto& rec : frames) {
    const auto t0 = Clock::now();
    FusionStats st;
    LabeledPointCloud part = fuse_keyframe(rec, cfg.fusion, &st);
    cloud.append(part);
    const double dt = seconds_since(t0);
    total_s += dt;
    log << "fuse: frame " << rec.frame_id << ": " << st.emitted << " points ("
        << st.obstruction << " obstruction, " << st.invalid_depth << " rejected) in "
        << std::fixed << std::setprecision(4) << dt << " s\n";
  }
  log << "fuse: " << frames.size() << " frames, " << cloud.size() << " points, mean "
      << std::fixed << std::setprecision(4) << total_s / double(frames.size())
      << " s/frame (geometry only)\n";
  io::write_file_atomic(out_cloud, io::encode_labeled_ply(cloud));
  return {frames.size(), cloud.size(), cloud.count(PointLabel::kObstruction)};
}

RegisterOutputs register_outputs_for(const fs::path& out_prefix) {
  auto with = [&](const char* suffix) {
    fs::path p = out_prefix;
    p += suffix;
    return p;
  };
  return {with(".transform.txt"), with(".aligned.ply"), with(".icp.log")};
}

RegistrationSummary cmd_register(const fs::path& recon_file, const fs::path& ct_file,
                                 const PipelineConfig& cfg,
                                 const std::optional<fs::path>& init_file,
                                 const fs::path& out_prefix, std::ostream& log) {
  cfg.validate();
  const LabeledPointCloud recon = read_cloud(recon_file);
  const LabeledPointCloud ct = read_cloud(ct_file);
  if (recon.empty() || ct.empty()) throw ValidationError("register: empty point cloud");
  const RegisterOutputs out = register_outputs_for(out_prefix);
  const KdTree ct_index(ct.points);

  std::ostringstream diag;
  diag << "# registration log\n";
  diag << "recon_points = " << recon.size() << "\nct_points = " << ct.size() << "\n";

  SimilarityTransform init;
  if (init_file) {
    init = io::parse_transform(io::read_file(*init_file), init_file->string()).transform;
    diag << "init = file " << init_file->string() << "\n";
  } else {
    const std::size_t n_eval = cfg.icp.max_points;
    double best = nearest_rms(recon.points, ct_index, init, n_eval);
    diag << "init_candidate identity rms_mm = " << fmt(best) << "\n";
    if (cfg.init == InitMode::kIdentity) {
      diag << "init = identity\n";
    } else {
      const CoarseAlignment pca =
          pca_coarse_align(recon.points, ct.points, cfg.icp.with_scale, &ct_index, n_eval);
      for (std::size_t i = 0; i < pca.candidates.size(); ++i) {
        diag << "init_candidate pca_" << i << " rms_mm = " << fmt(pca.candidate_rms[i]) << "\n";
      }
      if (cfg.init == InitMode::kPca || pca.rms < best) {
        init = pca.transform;
        best = pca.rms;
        diag << "init = pca\n";
      } else {
        diag << "init = identity\n";
      }
    }
  }

  IcpResult res;
  try {
    res = icp(recon.points, ct_index, init, cfg.icp);
  } catch (const NumericalError& e) {
    diag << "status = failed\nerror = " << e.what() << "\n";
    io::write_file_atomic(out.log, diag.str());
    log << "register: ICP failed: " << e.what() << "\n";
    throw;
  }
  for (std::size_t i = 0; i < res.rms_history.size(); ++i) {
    diag << "iteration " << i + 1 << " rms_mm = " << fmt(res.rms_history[i]) << "\n";
  }
  diag << "correspondences = " << res.correspondences << "\n";
  diag << "iterations = " << res.iterations << "\nconverged = "
       << (res.converged ? "true" : "false") << "\nrms_mm = " << fmt(res.rms) << "\n";
  const bool accepted = res.converged || res.rms <= cfg.icp_fail_rms;
  diag << "status = "
       << (res.converged ? "ok" : accepted ? "iteration_cap_within_rms_bound" : "not_converged")
       << "\n";

  const RegistrationSummary summary{res.transform, res.rms, res.iterations, res.converged};
  io::write_file_atomic(out.log, diag.str());
  io::write_file_atomic(out.transform, io::format_transform(summary));
  io::write_file_atomic(out.aligned_cloud,
                        io::encode_labeled_ply(transformed(recon, res.transform)));
  log << "register: " << res.iterations << " iterations, rms " << fmt(res.rms) << " mm, scale "
      << fmt(res.transform.scale()) << (res.converged ? "" : " (NOT converged)") << "\n";
  if (!accepted) {
    throw NumericalError("register: ICP did not converge within " +
                         std::to_string(cfg.icp.max_iterations) + " iterations and rms " +
                         fmt(res.rms) + " mm exceeds " + fmt(cfg.icp_fail_rms) + " mm (see " +
                         out.log.string() + ")");
  }
  return summary;
}

MetricsReport cmd_eval(const fs::path& recon_file, const fs::path& ct_file,
                       const fs::path& transform_file, const fs::path& dataset,
                       const PipelineConfig& cfg, const fs::path& report_file,
                       const fs::path& heatmap_file, std::ostream& log) {
  cfg.validate();
  const LabeledPointCloud recon = read_cloud(recon_file);
  const LabeledPointCloud ct = read_cloud(ct_file);
  const RegistrationSummary reg =
      io::parse_transform(io::read_file(transform_file), transform_file.string());
  const std::vector<KeyframeRecord> keyframes = io::load_keyframes(dataset, cfg.frame_stride);

  if (cfg.precision_policy == PrecisionPolicy::kSourceFrameOnly) {
    throw ValidationError(
        "eval: point-cloud files carry no per-point source frame; use all_keyframes");
  }
  EvaluationInputs in;
  in.recon = &recon;
  in.ct = &ct;
  in.keyframes = &keyframes;
  in.registration = reg;
  in.coverage_threshold = cfg.coverage_threshold;
  in.policy = cfg.precision_policy;
  in.heatmap_d_max = cfg.heatmap_d_max;
  HeatmapCloud heat;
  const MetricsReport report = evaluate(in, &heat);
  io::write_file_atomic(report_file, io::format_report(report));
  io::write_file_atomic(heatmap_file, io::encode_heatmap_ply(heat));
  log << "eval: coverage " << fmt(report.coverage_pct) << " %, median "
      << fmt(report.median_closest_mm) << " mm, chamfer " << fmt(report.chamfer_one_sided_mm)
      << " mm, hausdorff " << fmt(report.hausdorff_one_sided_mm) << " mm, precision "
      << (report.seg_precision_pct ? fmt(*report.seg_precision_pct) + " %" : "undefined")
      << "\n";
  if (!report.seg_precision_pct) {
    throw NumericalError("eval: segmentation precision undefined (no valid projections of "
                         "Obstruction points); report written to " + report_file.string());
  }
  return report;
}

MetricsReport cmd_pipeline(const fs::path& dataset, const PipelineConfig& cfg,
                           const fs::path& out_dir, std::ostream& log) {
  const fs::path recon = out_dir / "reconstruction.ply";
  const fs::path prefix = out_dir / "registration";
  cmd_fuse(dataset, cfg, recon, log);
  const io::DatasetPaths paths{dataset};
  cmd_register(recon, paths.ct(), cfg, std::nullopt, prefix, log);
  return cmd_eval(recon, paths.ct(), register_outputs_for(prefix).transform, dataset, cfg,
                  out_dir / "report.txt", out_dir / "heatmap.ply", log);
}

}  // namespace airseg
