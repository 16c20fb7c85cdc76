// Command-line front end: synth, validate, fuse, register, eval, pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "airseg/error.hpp"
#include "airseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace airseg;

namespace {

// Flags mirror the configuration keys; each is applied on top of --config.
struct Overrides {
  io::KeyValues values;

  void add(CLI::App* cmd, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        "--" + key, [this, key](const std::string& v) { values[key] = v; }, help)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
};

void add_fusion_flags(CLI::App* cmd, Overrides& o) {
  o.add(cmd, "min_inv_depth", "lower inverse-depth bound, 1/mm (exclusive)");
  o.add(cmd, "max_inv_depth", "upper inverse-depth bound, 1/mm (exclusive)");
  o.add(cmd, "border_margin", "ignored border, pixels");
  o.add(cmd, "pixel_stride", "pixel subsampling stride");
  o.add(cmd, "frame_stride", "use every n-th keyframe");
}

void add_icp_flags(CLI::App* cmd, Overrides& o) {
  o.add(cmd, "icp_max_iterations", "ICP iteration cap");
  o.add(cmd, "icp_rel_tol", "relative RMS change for convergence");
  o.add(cmd, "icp_max_corr_dist", "correspondence rejection distance, mm");
  o.add(cmd, "icp_trim_fraction", "fraction of worst correspondences dropped");
  o.add(cmd, "icp_with_scale", "estimate scale (true/false)");
  o.add(cmd, "icp_max_points", "source points per ICP iteration (0 = all)");
  o.add(cmd, "icp_fail_rms", "RMS bound for runs that hit the iteration cap, mm");
  o.add(cmd, "init", "initial alignment: auto | pca | identity");
}

void add_eval_flags(CLI::App* cmd, Overrides& o) {
  o.add(cmd, "coverage_threshold", "coverage distance threshold, mm");
  o.add(cmd, "precision_policy", "all_keyframes | source_frame_only");
  o.add(cmd, "heatmap_d_max", "distance mapped to full red, mm");
}

void add_synth_flags(CLI::App* cmd, Overrides& o) {
  o.add(cmd, "seed", "random seed");
  for (const char* key :
       {"synth_n_frames", "synth_start_z", "synth_end_z", "synth_lateral_amplitude",
        "synth_look_ahead", "synth_policy", "synth_cylinder_radius", "synth_cylinder_length",
        "synth_tumor", "synth_tumor_center", "synth_tumor_radius", "synth_width",
        "synth_height", "synth_fx", "synth_fy", "synth_cx", "synth_cy", "synth_ct_points",
        "synth_depth_noise"}) {
    o.add(cmd, key, "synthetic scene parameter (see README)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic airway reconstruction: fusion, registration and evaluation"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  app.add_option("--config", config_file, "key = value configuration file");

  Overrides overrides;
  std::string dataset, out, recon, ct, transform, report, heat, init_file;

  auto* synth = app.add_subcommand("synth", "render a synthetic airway dataset");
  synth->add_option("--out,-o", out, "output dataset directory")->required();
  add_synth_flags(synth, overrides);

  auto* validate = app.add_subcommand("validate", "check a dataset directory");
  validate->add_option("dataset", dataset, "dataset directory")->required();

  auto* fuse = app.add_subcommand("fuse", "fuse keyframes into a labeled point cloud");
  fuse->add_option("--dataset,-d", dataset, "dataset directory")->required();
  fuse->add_option("--out,-o", out, "output PLY")->required();
  add_fusion_flags(fuse, overrides);

  auto* reg = app.add_subcommand("register", "align a reconstruction to the CT cloud");
  reg->add_option("--recon", recon, "reconstruction PLY")->required();
  reg->add_option("--ct", ct, "ground-truth PLY")->required();
  reg->add_option("--out,-o", out, "output prefix")->required();
  reg->add_option("--init-transform", init_file, "initial transform file");
  add_icp_flags(reg, overrides);

  auto* eval = app.add_subcommand("eval", "compute metrics and the distance heatmap");
  eval->add_option("--recon", recon, "reconstruction PLY (SLAM frame)")->required();
  eval->add_option("--ct", ct, "ground-truth PLY")->required();
  eval->add_option("--transform", transform, "registration transform file")->required();
  eval->add_option("--dataset,-d", dataset, "dataset directory (keyframes)")->required();
  eval->add_option("--report", report, "output report")->required();
  eval->add_option("--heatmap", heat, "output heatmap PLY")->required();
  overrides.add(eval, "frame_stride", "use every n-th keyframe");
  add_eval_flags(eval, overrides);

  auto* pipe = app.add_subcommand("pipeline", "fuse, register and eval in one go");
  pipe->add_option("--dataset,-d", dataset, "dataset directory")->required();
  pipe->add_option("--out,-o", out, "output directory")->required();
  add_fusion_flags(pipe, overrides);
  add_icp_flags(pipe, overrides);
  add_eval_flags(pipe, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(ExitCode::kValidation);
  }

  try {
    PipelineConfig cfg;
    if (config_file) apply_config(cfg, io::read_key_values(*config_file), *config_file);
    apply_config(cfg, overrides.values, "command line");
    cfg.validate();

    if (*synth) {
      cmd_synth(cfg, out, std::cerr);
    } else if (*validate) {
      return cmd_validate(dataset, std::cout).ok() ? 0 : int(ExitCode::kValidation);
    } else if (*fuse) {
      cmd_fuse(dataset, cfg, out, std::cerr);
    } else if (*reg) {
      std::optional<fs::path> init;
      if (!init_file.empty()) init = init_file;
      cmd_register(recon, ct, cfg, init, out, std::cerr);
    } else if (*eval) {
      cmd_eval(recon, ct, transform, dataset, cfg, report, heat, std::cerr);
    } else if (*pipe) {
      cmd_pipeline(dataset, cfg, out, std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(ExitCode::kIo);
  }
  return 0;
}
