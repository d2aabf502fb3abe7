#ifndef SMAT_QUALITY_SERIES_HPP
#define SMAT_QUALITY_SERIES_HPP

#include "smat/eval_metrics.hpp"
#include "smat/pipeline.hpp"

namespace smat {

struct FrameQuality {
  double timestamp = 0.0;
  std::optional<double> pr;  // percent of in-bound static points kept static
  std::optional<double> rr;  // percent of in-bound dynamic points removed
};

struct SubmapQuality {
  std::size_t index = 0;
  Point3 origin = Point3::Zero();
  double created_at = 0.0;
  double last_timestamp = 0.0;
  std::optional<double> pr;
  std::optional<double> rr;
};

struct QualitySeries {
  bool available = false;
  std::vector<FrameQuality> front_end;  // empty when the front end did not run
  std::vector<SubmapQuality> back_end;  // empty when the back end did not run
};

/**
 * Front end: per-frame point-level PR/RR of the static scan over in-bound
 * points. Back end: per-submap voxel PR/RR within `radius` of the submap
 * origin, against ground truth built from the raw scans the submap covered,
 * so points the front end removed count as rejected.
 */
inline QualitySeries snapshot_metrics_over_time(const RunReport& report, std::span<const LabeledScan> scans,
                                                std::span<const PoseSE3> poses, double radius = 6.0) {
  QualitySeries q;
  if (scans.size() != report.frames.size() || poses.size() != scans.size()) return q;
  for (const auto& s : scans)
    if (!s.labels || !s.labels_consistent()) return q;
  q.available = true;

  for (std::size_t f = 0; f < report.frames.size(); ++f) {
    const auto& cls = report.frames[f].point_class;
    if (cls.empty()) continue;
    const auto& labels = *scans[f].labels;
    std::size_t s_total = 0, s_kept = 0, d_total = 0, d_removed = 0;
    for (std::size_t i = 0; i < cls.size() && i < labels.size(); ++i) {
      if (cls[i] == PointClass::out_of_bound) continue;
      if (labels[i] == PointLabel::static_point) {
        ++s_total;
        s_kept += cls[i] == PointClass::static_point;
      } else {
        ++d_total;
        d_removed += cls[i] == PointClass::dynamic_point;
      }
    }
    FrameQuality fq;
    fq.timestamp = report.frames[f].timestamp;
    if (s_total) fq.pr = 100.0 * static_cast<double>(s_kept) / static_cast<double>(s_total);
    if (d_total) fq.rr = 100.0 * static_cast<double>(d_removed) / static_cast<double>(d_total);
    q.front_end.push_back(fq);
  }

  std::map<double, std::size_t> frame_of;
  for (std::size_t i = 0; i < scans.size(); ++i) frame_of[scans[i].timestamp] = i;
  const double r2 = radius * radius;
  for (std::size_t k = 0; k < report.submaps.size() && k < report.submap_scan_times.size(); ++k) {
    const auto& sub = report.submaps[k];
    const Point3 o = sub.origin.translation();
    auto near = [&](const VoxelKey& key) { return (voxel_center(key, sub.resolution) - o).squaredNorm() <= r2; };
    std::vector<LabeledScan> used;
    std::vector<PoseSE3> used_poses;
    for (double t : report.submap_scan_times[k]) {
      const auto it = frame_of.find(t);
      if (it == frame_of.end()) continue;
      used.push_back(scans[it->second]);
      used_poses.push_back(poses[it->second]);
    }
    VoxelMap gs(sub.resolution), gd(sub.resolution), est(sub.resolution);
    VoxelMap dyn_any(sub.resolution);
    for (std::size_t s = 0; s < used.size(); ++s)
      for (std::size_t i = 0; i < used[s].points.size(); ++i) {
        const VoxelKey key = voxel_key(used_poses[s] * used[s].points[i], sub.resolution);
        if (!near(key)) continue;
        if ((*used[s].labels)[i] == PointLabel::static_point) gs.insert(key);
        else dyn_any.insert(key);
      }
    for (const auto& key : dyn_any.keys())
      if (!gs.contains(key)) gd.insert(key);
    for (const auto& key : sub.occupied.keys())
      if (near(key)) est.insert(key);
    const MapScore ms = score_map(est, gs, gd, sub.resolution);
    SubmapQuality sq;
    sq.index = k;
    sq.origin = o;
    if (k < report.submap_created_at.size()) sq.created_at = report.submap_created_at[k];
    sq.last_timestamp = report.submap_scan_times[k].empty() ? 0.0 : report.submap_scan_times[k].back();
    sq.pr = ms.pr;
    sq.rr = ms.rr;
    q.back_end.push_back(sq);
  }
  return q;
}

}  // namespace smat

#endif  // SMAT_QUALITY_SERIES_HPP
