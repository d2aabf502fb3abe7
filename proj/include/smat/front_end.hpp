#ifndef SMAT_FRONT_END_HPP
#define SMAT_FRONT_END_HPP

#include "smat/clustering.hpp"
#include "smat/tracking.hpp"
#include "smat/voxel_map.hpp"

#include <chrono>

namespace smat {

struct FrontEndParams {
  double r_bound = 20.0;          // m, horizontal detection radius
  double bs_resolution = 0.2;     // m, background-subtraction lattice
  double cluster_dist = 0.5;      // m
  std::size_t cluster_min_points = 5;
  double assoc_gate = 1.0;        // m
  StabilityParams stability{};    // t_val, rho_min, v_min, dv_min
  int miss_limit = 3;             // consecutive failed recoveries before retirement
  EkfNoise noise{};

  void validate() const {
    if (!(r_bound > 0 && bs_resolution > 0 && cluster_dist > 0 && assoc_gate > 0))
      throw ConfigError("front-end distances must be positive");
    if (cluster_min_points == 0) throw ConfigError("cluster_min_points must be positive");
    if (!(stability.t_val > 0 && stability.v_min > 0 && stability.dv_min > 0 && stability.scan_rate > 0))
      throw ConfigError("stability thresholds must be positive");
    if (!(stability.rho_min > 0 && stability.rho_min <= 1.0)) throw ConfigError("rho_min must lie in (0, 1]");
    if (miss_limit < 1) throw ConfigError("miss_limit must be positive");
    if (!(noise.accel_sigma >= 0 && noise.meas_sigma >= 0 && noise.init_vel_sigma >= 0))
      throw ConfigError("EKF noise must be non-negative");
  }
};

/**
 * Published-map voxels within R_bound of the sensor, still keyed on the
 * world lattice. Keeping the world keys avoids re-binning rotated cell
 * centres into a sensor-frame grid, which would alias cells.
 */
struct LocalStaticMap {
  VoxelMap keys;
  PoseSE3 world_from_sensor;

  bool empty() const { return keys.empty(); }
};

/// Crops the published map to voxels whose centre has sensor-frame
/// horizontal radius < r_bound. The bound is horizontal only.
inline LocalStaticMap crop_local_static_map(const VoxelMap& global_map, const PoseSE3& world_from_sensor,
                                            const FrontEndParams& p) {
  if (!world_from_sensor.is_valid()) throw ValidationError("invalid sensor pose");
  LocalStaticMap local{VoxelMap(global_map.resolution()), world_from_sensor};
  const PoseSE3 sensor_from_world = world_from_sensor.inverse();
  for (const auto& k : global_map.keys()) {
    const Point3 c = sensor_from_world * voxel_center(k, global_map.resolution());
    if (radius_2d(c) < p.r_bound) local.keys.insert(k);
  }
  return local;
}

enum class PointClass : std::uint8_t { static_point, dynamic_point, out_of_bound };

struct BackgroundSplit {
  std::vector<std::size_t> static_init;
  std::vector<std::size_t> dynamic_init;
  std::vector<std::size_t> out_of_bound;  // r >= r_bound; passed through as static
};

/// A point is static iff its world-lattice voxel is in the local map; with an
/// empty map (cold start) every in-bound point is dynamic.
inline BackgroundSplit background_subtract(const LabeledScan& scan, const LocalStaticMap& local,
                                           const FrontEndParams& p) {
  BackgroundSplit split;
  const double res = local.keys.resolution();
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Point3& ps = scan.points[i];
    if (radius_2d(ps) >= p.r_bound) {
      split.out_of_bound.push_back(i);
      continue;
    }
    if (!local.empty() && local.keys.contains(voxel_key(local.world_from_sensor * ps, res)))
      split.static_init.push_back(i);
    else
      split.dynamic_init.push_back(i);
  }
  return split;
}

struct TrackedBox {
  std::uint64_t id = 0;
  BoundingBox box;
  Point3 velocity = Point3::Zero();
};

struct FrontEndOutput {
  double timestamp = 0.0;
  std::vector<Point3> static_points;   // world frame, includes out-of-bound pass-through
  std::vector<Point3> dynamic_points;  // world frame
  std::vector<std::uint64_t> dynamic_owner;
  std::vector<TrackedBox> tracked;     // stable tracklets this frame
  std::vector<PointClass> point_class; // per input point
  std::size_t in_bound_count = 0;
  double runtime_ms = 0.0;
};

/// Tracker state carried between frames.
struct TrackerState {
  std::vector<Tracklet> tracklets;
  std::uint64_t next_id = 1;
  std::optional<double> last_timestamp;
  std::vector<std::uint64_t> retired_ids;
};

struct RecoveryResult {
  std::vector<std::size_t> recovered_tracklets;  // indices into the input tracklet span
  std::vector<std::size_t> reclassified;          // point indices flipped to dynamic
  std::vector<std::uint64_t> reclassified_owner;
};

/**
 * Detection by tracking. Each lost stable tracklet's last box is moved by
 * its velocity over dt (size unchanged); if at least cluster_min_points of
 * the candidate points fall inside, those points become dynamic and the
 * tracklet is updated with their centroid. Otherwise a miss is recorded.
 * `candidates` flags which world points may be claimed; claimed points are
 * cleared so two boxes never share a point. Tracklets are mutated in place.
 */
inline RecoveryResult detect_by_tracking(std::span<Tracklet> tracks, std::span<const std::size_t> lost_stable,
                                         std::span<const Point3> world_points, std::vector<char>& candidates,
                                         double dt, const FrontEndParams& p) {
  RecoveryResult out;
  const auto window = p.stability.window_frames();
  for (std::size_t ti : lost_stable) {
    Tracklet& t = tracks[ti];
    const BoundingBox predicted = t.box.translated(t.state.velocity() * dt);
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < world_points.size(); ++i)
      if (candidates[i] && predicted.contains(world_points[i])) inside.push_back(i);
    if (inside.size() >= p.cluster_min_points) {
      Point3 c = Point3::Zero();
      for (auto i : inside) {
        c += world_points[i];
        candidates[i] = 0;
        out.reclassified.push_back(i);
        out.reclassified_owner.push_back(t.id);
      }
      c /= static_cast<double>(inside.size());
      t.state = ekf_update(t.state, c, p.noise);
      t.box = predicted;
      t.consecutive_misses = 0;
      t.push_history({true, c, predicted.volume()}, window);
      out.recovered_tracklets.push_back(ti);
    } else {
      t.box = predicted;
      ++t.consecutive_misses;
      t.push_history({false, t.state.position(), predicted.volume()}, window);
    }
  }
  return out;
}

/**
 * One front-end frame: crop, subtract, cluster, associate, filter, update,
 * stability test and detection by tracking. Only points owned by stable
 * tracklets leave as dynamic; everything else in bound is static.
 * The state is left untouched when the input is rejected.
 */
inline FrontEndOutput front_end_step(const LabeledScan& scan, const PoseSE3& world_from_sensor,
                                     const VoxelMap* published_map, TrackerState& state, const FrontEndParams& p) {
  const auto t_start = std::chrono::steady_clock::now();
  p.validate();
  if (!world_from_sensor.is_valid()) throw ValidationError("front_end_step: invalid pose");
  scan.validate();
  if (state.last_timestamp && !(scan.timestamp > *state.last_timestamp))
    throw ValidationError("front_end_step: scan timestamp does not increase");

  const double dt = state.last_timestamp ? scan.timestamp - *state.last_timestamp : 1.0 / p.stability.scan_rate;
  const auto window = p.stability.window_frames();

  LocalStaticMap local = published_map ? crop_local_static_map(*published_map, world_from_sensor, p)
                                       : LocalStaticMap{VoxelMap(p.bs_resolution), world_from_sensor};
  const BackgroundSplit split = background_subtract(scan, local, p);

  const std::vector<Point3> world = transform_points(world_from_sensor, scan.points);
  FrontEndOutput out;
  out.timestamp = scan.timestamp;
  out.point_class.assign(scan.points.size(), PointClass::static_point);
  for (auto i : split.out_of_bound) out.point_class[i] = PointClass::out_of_bound;
  out.in_bound_count = scan.points.size() - split.out_of_bound.size();

  // Cluster the dynamic candidates in the world frame.
  std::vector<Point3> dyn_world;
  dyn_world.reserve(split.dynamic_init.size());
  for (auto i : split.dynamic_init) dyn_world.push_back(world[i]);
  const ClusterResult clusters = euclidean_cluster(dyn_world, p.cluster_dist, p.cluster_min_points);
  std::vector<Hypothesis> hyps;
  hyps.reserve(clusters.clusters.size());
  for (const auto& c : clusters.clusters) {
    Hypothesis h{c.box, c.centroid, {}};
    h.members.reserve(c.members.size());
    for (auto m : c.members) h.members.push_back(split.dynamic_init[m]);
    hyps.push_back(std::move(h));
  }

  // Predict every tracklet to this frame, then associate.
  auto& tracks = state.tracklets;
  std::vector<char> was_stable(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    was_stable[i] = tracks[i].stable;
    tracks[i].state = ekf_predict(tracks[i].state, dt, p.noise);
  }
  const Association assoc = associate(hyps, tracks, p.assoc_gate);

  std::vector<std::uint64_t> owner(scan.points.size(), 0);
  for (const auto& [hi, ti] : assoc.matches) {
    Tracklet& t = tracks[ti];
    const Hypothesis& h = hyps[hi];
    t.state = ekf_update(t.state, h.centroid, p.noise);
    t.box = h.box;
    t.consecutive_misses = 0;
    t.last_timestamp = scan.timestamp;
    t.push_history({true, h.centroid, h.box.volume()}, window);
    t.stable = stable_check(t, p.stability);
    if (t.stable)
      for (auto m : h.members) {
        out.point_class[m] = PointClass::dynamic_point;
        owner[m] = t.id;
      }
  }

  // Lost tracklets: stable ones try detection by tracking, the rest record a miss.
  std::vector<std::size_t> lost_stable;
  for (std::size_t ti : assoc.unmatched_tracklets) {
    if (was_stable[ti]) {
      lost_stable.push_back(ti);
    } else {
      Tracklet& t = tracks[ti];
      ++t.consecutive_misses;
      t.push_history({false, t.state.position(), t.box.volume()}, window);
      t.stable = false;
    }
  }
  if (!lost_stable.empty()) {
    std::vector<char> candidates(scan.points.size(), 0);
    for (std::size_t i = 0; i < scan.points.size(); ++i)
      candidates[i] = out.point_class[i] == PointClass::static_point;
    const RecoveryResult rec = detect_by_tracking(tracks, lost_stable, world, candidates, dt, p);
    for (std::size_t k = 0; k < rec.reclassified.size(); ++k) {
      out.point_class[rec.reclassified[k]] = PointClass::dynamic_point;
      owner[rec.reclassified[k]] = rec.reclassified_owner[k];
    }
    for (std::size_t ti : lost_stable) {
      tracks[ti].stable = stable_check(tracks[ti], p.stability);
      tracks[ti].last_timestamp = scan.timestamp;
    }
  }

  // Births: every unmatched hypothesis starts a provisional tracklet.
  for (std::size_t hi : assoc.unmatched_hypotheses) {
    Tracklet t;
    t.id = state.next_id++;
    t.state = KalmanState::at_rest(hyps[hi].centroid, p.noise);
    t.box = hyps[hi].box;
    t.last_timestamp = scan.timestamp;
    t.push_history({true, hyps[hi].centroid, hyps[hi].box.volume()}, window);
    tracks.push_back(std::move(t));
  }

  // Retirement.
  std::vector<Tracklet> alive;
  alive.reserve(tracks.size());
  for (auto& t : tracks) {
    if (t.consecutive_misses >= p.miss_limit)
      state.retired_ids.push_back(t.id);
    else
      alive.push_back(std::move(t));
  }
  tracks = std::move(alive);
  state.last_timestamp = scan.timestamp;

  for (const auto& t : tracks)
    if (t.stable && t.consecutive_misses == 0) out.tracked.push_back({t.id, t.box, t.state.velocity()});

  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (out.point_class[i] == PointClass::dynamic_point) {
      out.dynamic_points.push_back(world[i]);
      out.dynamic_owner.push_back(owner[i]);
    } else {
      out.static_points.push_back(world[i]);
    }
  }
  out.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace smat

#endif  // SMAT_FRONT_END_HPP
