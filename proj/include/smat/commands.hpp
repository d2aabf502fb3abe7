#ifndef SMAT_COMMANDS_HPP
#define SMAT_COMMANDS_HPP

// File-level workflows behind the command-line tool: simulate a scenario to
// disk, run the pipeline over a stored sequence, score, ablate, navigate.

#include "smat/io.hpp"
#include "smat/kv_config.hpp"
#include "smat/nav_select.hpp"
#include "smat/quality_series.hpp"
#include "smat/sim_world.hpp"

#include <filesystem>
#include <ostream>

namespace smat {

namespace fs = std::filesystem;

inline PipelineConfig load_pipeline_config(const KeyValueConfig& kv) {
  PipelineConfig c;
  auto& fe = c.front_end;
  auto& be = c.back_end;
  fe.r_bound = kv.get_double("r_bound", fe.r_bound);
  fe.cluster_dist = kv.get_double("cluster_dist", fe.cluster_dist);
  fe.cluster_min_points = static_cast<std::size_t>(kv.get_int("cluster_min_points", static_cast<long long>(fe.cluster_min_points)));
  fe.assoc_gate = kv.get_double("assoc_gate", fe.assoc_gate);
  fe.stability.t_val = kv.get_double("t_val", fe.stability.t_val);
  fe.stability.rho_min = kv.get_double("rho_min", fe.stability.rho_min);
  fe.stability.v_min = kv.get_double("v_min", fe.stability.v_min);
  fe.stability.dv_min = kv.get_double("dv_min", fe.stability.dv_min);
  fe.miss_limit = static_cast<int>(kv.get_int("miss_limit", fe.miss_limit));
  be.r_query = kv.get_double("r_query", be.r_query);
  be.map_resolution = kv.get_double("map_resolution", be.map_resolution);
  fe.bs_resolution = kv.get_double("bs_resolution", be.map_resolution);
  be.gamma = kv.get_double("gamma", be.gamma);
  be.occ_threshold = kv.get_double("occ_threshold", be.occ_threshold);
  be.submap_spacing = kv.get_double("submap_spacing", be.submap_spacing);
  c.back_end_period = static_cast<std::size_t>(kv.get_int("back_end_period", static_cast<long long>(c.back_end_period)));
  c.cold_start_scans = static_cast<std::size_t>(kv.get_int("cold_start_scans", static_cast<long long>(c.cold_start_scans)));
  kv.check_all_used();
  fe.validate();
  be.validate();
  return c;
}

struct Sequence {
  std::vector<LabeledScan> scans;
  std::vector<PoseSE3> poses;

  bool labeled() const {
    return !scans.empty() && std::all_of(scans.begin(), scans.end(), [](const LabeledScan& s) { return s.labels.has_value(); });
  }
};

inline std::string scan_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.scan", i);
  return buf;
}

/// Reads `<dir>/poses.txt` and `<dir>/scans/*.scan` (lexicographic order).
inline Sequence load_sequence(const fs::path& dir) {
  Sequence seq;
  const auto stamped = read_pose_file((dir / "poses.txt").string());
  std::vector<fs::path> files;
  if (fs::is_directory(dir / "scans"))
    for (const auto& e : fs::directory_iterator(dir / "scans"))
      if (e.is_regular_file() && e.path().extension() == ".scan") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.size() != stamped.size())
    throw ValidationError("sequence " + dir.string() + ": " + std::to_string(files.size()) + " scan files but " +
                          std::to_string(stamped.size()) + " poses");
  for (std::size_t i = 0; i < files.size(); ++i) {
    LabeledScan s = read_scan_file(files[i].string());
    if (std::abs(s.timestamp - stamped[i].timestamp) > 1e-6)
      throw ValidationError("scan " + files[i].string() + " timestamp does not match pose " + std::to_string(i));
    seq.scans.push_back(std::move(s));
    seq.poses.push_back(stamped[i].pose);
  }
  return seq;
}

/// Ground-truth boxes of agents hit by at least `min_points` beams within
/// `r_bound` of the sensor.
inline std::vector<TrackRecord> ground_truth_tracks(const Scene& scene, const Sequence& seq, double r_bound = 20.0,
                                                    std::size_t min_points = 5) {
  std::vector<TrackRecord> out;
  for (std::size_t f = 0; f < seq.scans.size(); ++f) {
    const auto& s = seq.scans[f];
    const auto boxes = scene.agent_boxes(s.timestamp);
    std::vector<std::size_t> hits(boxes.size(), 0);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (!s.labels || (*s.labels)[i] != PointLabel::dynamic_point) continue;
      if (radius_2d(s.points[i]) > r_bound) continue;
      const Point3 w = seq.poses[f] * s.points[i];
      for (std::size_t a = 0; a < boxes.size(); ++a)
        if (BoundingBox{boxes[a].min.array() - 1e-4, boxes[a].max.array() + 1e-4}.contains(w)) {
          ++hits[a];
          break;
        }
    }
    for (std::size_t a = 0; a < boxes.size(); ++a)
      if (hits[a] >= min_points) out.push_back({static_cast<int>(f), static_cast<int>(a + 1), boxes[a]});
  }
  return out;
}

/**
 * Writes scans/, poses.txt, gt_static.map, gt_dynamic.map, gt_tracks.txt.
 * Ground truth is computed from the files as read back, so it matches what
 * `run` sees exactly.
 */
inline Sequence simulate_to_dir(const SceneConfig& config, const fs::path& out_dir) {
  const Scene scene = generate_scene(config);
  fs::create_directories(out_dir / "scans");
  for (const auto& e : fs::directory_iterator(out_dir / "scans"))
    if (e.path().extension() == ".scan") fs::remove(e.path());
  std::vector<StampedPose> stamped;
  for (std::size_t i = 0; i < scene.config.sensor_path.size(); ++i) {
    const auto& tp = scene.config.sensor_path[i];
    write_scan_file((out_dir / "scans" / scan_file_name(i)).string(), simulate_scan(scene, tp.pose, tp.timestamp));
    stamped.push_back({tp.timestamp, tp.pose});
  }
  write_pose_file((out_dir / "poses.txt").string(), stamped);
  Sequence seq = load_sequence(out_dir);
  const auto gt = ground_truth_maps(seq.scans, seq.poses, 0.2);
  write_map_file((out_dir / "gt_static.map").string(), gt.static_map);
  write_map_file((out_dir / "gt_dynamic.map").string(), gt.dynamic_map);
  write_track_file((out_dir / "gt_tracks.txt").string(), ground_truth_tracks(scene, seq));
  return seq;
}

inline std::vector<TrackRecord> track_records(const RunReport& report) {
  std::vector<TrackRecord> out;
  for (std::size_t f = 0; f < report.frames.size(); ++f)
    for (const auto& t : report.frames[f].tracked)
      out.push_back({static_cast<int>(f), static_cast<int>(t.id), t.box});
  return out;
}

inline std::string format_optional(const std::optional<double>& v, int digits) {
  return v ? detail::fixed(*v, digits) : std::string("undefined");
}

/// Deterministic text report; wall-clock timings are written separately.
inline void write_report(std::ostream& out, const RunReport& report, const Sequence& seq) {
  out << "SMAT-REPORT v1\n";
  out << "mode " << to_string(report.mode) << '\n';
  out << "frames " << report.frames.size() << '\n';
  const auto& map = report.final_map->merged;
  out << "final_map_version " << report.final_map->version << '\n';
  out << "final_map_voxels " << map.size() << '\n';
  out << "publishes " << report.map_versions.size() << '\n';
  out << "submaps " << report.submaps.size() << '\n';
  QualitySeries q;
  if (seq.labeled()) {
    const auto gt = ground_truth_maps(seq.scans, seq.poses, map.resolution());
    out << "map_score " << format_map_score(score_map(map, gt.static_map, gt.dynamic_map, map.resolution())) << '\n';
    q = snapshot_metrics_over_time(report, seq.scans, seq.poses);
  }
  for (std::size_t f = 0; f < report.frames.size(); ++f) {
    const auto& fr = report.frames[f];
    out << "frame " << f << ' ' << detail::fixed(fr.timestamp, 6) << " read_version " << fr.map_version_read
        << " in_bound " << fr.in_bound_count << " static " << fr.static_count << " dynamic " << fr.dynamic_count
        << " tracked " << fr.tracked.size();
    if (q.available && f < q.front_end.size())
      out << " fe_pr " << format_optional(q.front_end[f].pr, 2) << " fe_rr " << format_optional(q.front_end[f].rr, 2);
    out << '\n';
  }
  for (const auto& [frame, version] : report.map_versions) out << "publish " << frame << ' ' << version << '\n';
  for (std::size_t k = 0; k < report.submaps.size(); ++k) {
    const auto& s = report.submaps[k];
    const auto& o = s.origin.translation();
    out << "submap " << k << " origin " << detail::fixed(o.x(), 6) << ' ' << detail::fixed(o.y(), 6) << ' '
        << detail::fixed(o.z(), 6) << " scans " << s.scan_count << " occupied " << s.occupied.size();
    if (q.available && k < q.back_end.size())
      out << " be_pr " << format_optional(q.back_end[k].pr, 2) << " be_rr " << format_optional(q.back_end[k].rr, 2);
    out << '\n';
  }
}

inline void write_timing(std::ostream& out, const RunReport& report, double total_ms) {
  out << "front_end_ms_per_scan " << detail::fixed(report.front_end_ms_per_scan(), 3) << '\n';
  out << "back_end_ms_per_scan " << detail::fixed(report.back_end_ms_per_scan(), 3) << '\n';
  out << "back_end_iterations " << report.back_end_iterations << '\n';
  out << "total_ms " << detail::fixed(total_ms, 3) << '\n';
}

/// Runs the pipeline and writes map.txt, tracks.txt, report.txt, timing.txt.
inline RunReport run_to_dir(const Sequence& seq, const PipelineConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report = run_sequence(seq.scans, seq.poses, cfg);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  fs::create_directories(out_dir);
  write_map_file((out_dir / "map.txt").string(), report.final_map->merged);
  write_track_file((out_dir / "tracks.txt").string(), track_records(report));
  {
    auto f = detail::open_out((out_dir / "report.txt").string());
    write_report(f, report, seq);
  }
  {
    auto f = detail::open_out((out_dir / "timing.txt").string());
    write_timing(f, report, ms);
  }
  return report;
}

struct AblationRow {
  PipelineMode mode = PipelineMode::full;
  MapScore score;
  double front_end_ms_per_scan = 0.0;
  double back_end_ms_per_scan = 0.0;
  double total_s = 0.0;
};

/// One run per mode, in the fixed order of kAllModes.
inline std::vector<AblationRow> ablate(const Sequence& seq, const PipelineConfig& base) {
  const double res = base.back_end.map_resolution;
  const auto gt = ground_truth_maps(seq.scans, seq.poses, res);
  std::vector<AblationRow> rows;
  for (auto mode : kAllModes) {
    PipelineConfig cfg = base;
    cfg.mode = mode;
    const auto t0 = std::chrono::steady_clock::now();
    const RunReport r = run_sequence(seq.scans, seq.poses, cfg);
    AblationRow row;
    row.total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.mode = mode;
    row.score = score_map(r.final_map->merged, gt.static_map, gt.dynamic_map, res);
    row.front_end_ms_per_scan = r.front_end_ms_per_scan();
    row.back_end_ms_per_scan = r.back_end_ms_per_scan();
    rows.push_back(row);
  }
  return rows;
}

inline void write_ablation(std::ostream& out, std::span<const AblationRow> rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %9s %9s %7s %12s %12s %9s\n", "mode", "PR", "RR", "F1", "fe_ms/scan",
                "be_ms/scan", "total_s");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %9s %9s %7s %12.3f %12.3f %9.2f\n", std::string(to_string(r.mode)).c_str(),
                  format_optional(r.score.pr, 2).c_str(), format_optional(r.score.rr, 2).c_str(),
                  format_optional(r.score.f1, 4).c_str(), r.front_end_ms_per_scan, r.back_end_ms_per_scan, r.total_s);
    out << buf;
  }
}

struct NavStepResult {
  std::optional<Selection> selection;
  NavGraph graph;
  std::size_t frontier_clusters = 0;
};

/// Terrain grid from the map's voxel centres, frontiers, and a graph grown
/// along `path` (the last position is the robot).
inline NavStepResult nav_step(const VoxelMap& map, std::span<const Point2> path, const Point2& reference,
                              double cell_size = 0.4, double spacing = 2.0, double discount = 0.9) {
  if (path.empty()) throw ValidationError("nav_step: empty robot path");
  const auto centers = map.centers();
  const TerrainGrid grid = terrain_cost(centers, cell_size);
  const auto clusters = extract_frontiers(grid);
  std::vector<Point2> frontiers;
  for (const auto& c : clusters) frontiers.push_back(c.centroid);
  NavStepResult r;
  r.frontier_clusters = clusters.size();
  r.graph.spacing = spacing;
  r.graph.discount = discount;
  for (const auto& p : path) extend_graph(r.graph, p, frontiers, reference);
  aggregate_scores(r.graph);
  r.selection = select_best(r.graph, path.back());
  return r;
}

}  // namespace smat

#endif  // SMAT_COMMANDS_HPP
