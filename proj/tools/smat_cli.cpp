// smat: simulate, run, evaluate and ablate the static-mapping-and-tracking
// pipeline from the command line.

#include "smat/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Overrides {
  std::string mode = "full";
  std::string config;
  std::optional<double> gamma;
  std::optional<double> occ_threshold;
  std::optional<double> resolution;
  bool two_worker = false;
};

void add_pipeline_flags(CLI::App* cmd, Overrides& o, const char* config_flag) {
  cmd->add_option(config_flag, o.config, "Pipeline parameter file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--gamma", o.gamma, "Visibility safe-sphere factor in [0, 1)");
  cmd->add_option("--occ-threshold", o.occ_threshold, "Occupancy probability threshold");
  cmd->add_option("--resolution", o.resolution, "Map voxel size in metres");
}

smat::PipelineConfig pipeline_config(const Overrides& o) {
  smat::KeyValueConfig kv = o.config.empty() ? smat::KeyValueConfig() : smat::KeyValueConfig::load(o.config);
  smat::PipelineConfig c = smat::load_pipeline_config(kv);
  if (o.gamma) c.back_end.gamma = *o.gamma;
  if (o.occ_threshold) c.back_end.occ_threshold = *o.occ_threshold;
  if (o.resolution) {
    c.back_end.map_resolution = *o.resolution;
    c.front_end.bs_resolution = *o.resolution;
  }
  c.mode = smat::parse_mode(o.mode);
  c.execution = o.two_worker ? smat::Execution::two_worker : smat::Execution::interleaved;
  c.front_end.validate();
  c.back_end.validate();
  return c;
}

smat::SceneConfig scene_config(const std::string& path, std::optional<std::uint64_t> seed) {
  smat::KeyValueConfig kv = path.empty() ? smat::KeyValueConfig() : smat::KeyValueConfig::load(path);
  if (seed) kv.set("seed", std::to_string(*seed));
  return smat::load_scene_config(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static mapping with moving-object tracking: simulation, pipeline and evaluation"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out = "sim";
  std::optional<std::uint64_t> sim_seed;
  auto* simulate = app.add_subcommand("simulate", "Simulate the corridor scenario to scan, pose and ground-truth files");
  simulate->add_option("--config", sim_config, "Scenario file (key = value)")->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim_seed, "Scenario seed");
  simulate->add_option("--out-dir", sim_out, "Output directory");

  // run
  Overrides run_o;
  std::string run_in, run_out = "run";
  auto* run = app.add_subcommand("run", "Run the pipeline over a stored sequence");
  run->add_option("--in-dir", run_in, "Directory with poses.txt and scans/")->required()->check(CLI::ExistingDirectory);
  run->add_option("--out-dir", run_out, "Output directory");
  run->add_option("--mode", run_o.mode, "full | front_end_only | back_end_only | visibility_only | occupancy_only");
  run->add_flag("--two-worker", run_o.two_worker, "Run the back end on its own thread");
  add_pipeline_flags(run, run_o, "--config");

  // eval-map
  std::string em_map, em_static, em_dynamic;
  auto* eval_map = app.add_subcommand("eval-map", "Score a map against ground-truth static and dynamic maps");
  eval_map->add_option("--map", em_map, "Estimated map file")->required()->check(CLI::ExistingFile);
  eval_map->add_option("--gt-static", em_static, "Ground-truth static map")->required()->check(CLI::ExistingFile);
  eval_map->add_option("--gt-dynamic", em_dynamic, "Ground-truth dynamic map")->required()->check(CLI::ExistingFile);

  // eval-mot
  std::string mot_gt, mot_pred;
  double mot_alpha = 0.5;
  auto* eval_mot = app.add_subcommand("eval-mot", "MOTA, IDF1 and HOTA of predicted tracks");
  eval_mot->add_option("--gt", mot_gt, "Ground-truth track file")->required()->check(CLI::ExistingFile);
  eval_mot->add_option("--pred", mot_pred, "Predicted track file")->required()->check(CLI::ExistingFile);
  eval_mot->add_option("--alpha", mot_alpha, "IoU threshold for MOTA and IDF1")->check(CLI::Range(0.0, 1.0));

  // ablate
  Overrides ab_o;
  std::string ab_scene, ab_in;
  std::optional<std::uint64_t> ab_seed;
  auto* ablate = app.add_subcommand("ablate", "PR/RR/F1 and runtime of all five modes on one sequence");
  ablate->add_option("--config", ab_scene, "Scenario file used when no --in-dir is given")->check(CLI::ExistingFile);
  ablate->add_option("--seed", ab_seed, "Scenario seed");
  ablate->add_option("--in-dir", ab_in, "Use a stored labelled sequence instead of simulating")
      ->check(CLI::ExistingDirectory);
  add_pipeline_flags(ablate, ab_o, "--pipeline-config");

  // nav-step
  std::string nav_map, nav_path;
  double nav_x = 0.0, nav_y = 0.0, ref_x = 1.0, ref_y = 0.0, nav_cell = 0.4, nav_spacing = 2.0, nav_discount = 0.9;
  auto* nav = app.add_subcommand("nav-step", "Select the next viewpoint and frontier from a map");
  nav->add_option("--map", nav_map, "Static map file")->required()->check(CLI::ExistingFile);
  nav->add_option("--x", nav_x, "Robot x (m)");
  nav->add_option("--y", nav_y, "Robot y (m)");
  nav->add_option("--path", nav_path, "Pose file with the robot's past path (overrides --x/--y)")
      ->check(CLI::ExistingFile);
  nav->add_option("--ref-x", ref_x, "Reference direction x");
  nav->add_option("--ref-y", ref_y, "Reference direction y");
  nav->add_option("--cell-size", nav_cell, "Terrain cell size (m)");
  nav->add_option("--spacing", nav_spacing, "Viewpoint spacing (m)");
  nav->add_option("--discount", nav_discount, "Score discount per hop in (0, 1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto seq = smat::simulate_to_dir(scene_config(sim_config, sim_seed), sim_out);
      std::cout << "wrote " << seq.scans.size() << " scans to " << sim_out << '\n';
    } else if (*run) {
      const auto cfg = pipeline_config(run_o);
      const auto seq = smat::load_sequence(run_in);
      const auto report = smat::run_to_dir(seq, cfg, run_out);
      std::cout << "mode " << smat::to_string(cfg.mode) << ": " << report.frames.size() << " frames, "
                << report.final_map->merged.size() << " map voxels -> " << run_out << '\n';
    } else if (*eval_map) {
      const auto est = smat::read_map_file(em_map);
      const auto gs = smat::read_map_file(em_static);
      const auto gd = smat::read_map_file(em_dynamic);
      std::cout << smat::format_map_score(smat::score_map(est, gs, gd, est.resolution())) << '\n';
    } else if (*eval_mot) {
      const auto gt = smat::read_track_file(mot_gt);
      const auto pr = smat::read_track_file(mot_pred);
      const auto s = smat::evaluate_mot(gt, pr, mot_alpha);
      std::cout << "MOTA " << smat::format_optional(s.mota, 4) << " IDF1 " << smat::format_optional(s.idf1, 4)
                << " HOTA " << smat::detail::fixed(s.hota, 4) << " DetA " << smat::detail::fixed(s.deta, 4) << " AssA "
                << smat::detail::fixed(s.assa, 4) << '\n';
      std::cout << "gt_dets " << s.gt_dets << " pr_dets " << s.pr_dets << " TP " << s.tp << " FN " << s.fn << " FP "
                << s.fp << " IDSW " << s.idsw << " IDTP " << s.idtp << " IDFN " << s.idfn << " IDFP " << s.idfp
                << (s.degenerate ? " degenerate" : "") << '\n';
    } else if (*ablate) {
      smat::Sequence seq;
      if (!ab_in.empty()) {
        seq = smat::load_sequence(ab_in);
      } else {
        const smat::Scene scene = smat::generate_scene(scene_config(ab_scene, ab_seed));
        for (const auto& tp : scene.config.sensor_path) {
          seq.scans.push_back(smat::simulate_scan(scene, tp.pose, tp.timestamp));
          seq.poses.push_back(tp.pose);
        }
      }
      if (!seq.labeled()) throw smat::ValidationError("ablate needs a labelled sequence");
      const auto rows = smat::ablate(seq, pipeline_config(ab_o));
      smat::write_ablation(std::cout, rows);
    } else if (*nav) {
      std::vector<smat::Point2> path;
      if (!nav_path.empty()) {
        for (const auto& p : smat::read_pose_file(nav_path))
          path.emplace_back(p.pose.translation().x(), p.pose.translation().y());
      } else {
        path.emplace_back(nav_x, nav_y);
      }
      const auto map = smat::read_map_file(nav_map);
      const auto r = smat::nav_step(map, path, {ref_x, ref_y}, nav_cell, nav_spacing, nav_discount);
      if (!r.selection) {
        std::cout << "exploration exhausted\n";
      } else {
        const auto& v = r.graph.viewpoints[r.selection->viewpoint];
        const auto& f = r.graph.frontiers[r.selection->frontier];
        std::cout << "viewpoint " << smat::detail::fixed(v.position.x(), 3) << ' '
                  << smat::detail::fixed(v.position.y(), 3) << " score " << smat::detail::fixed(v.score, 4) << '\n';
        std::cout << "frontier " << smat::detail::fixed(f.position.x(), 3) << ' '
                  << smat::detail::fixed(f.position.y(), 3) << " score " << smat::detail::fixed(f.score, 4) << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
