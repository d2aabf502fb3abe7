#ifndef SMAT_SIM_WORLD_HPP
#define SMAT_SIM_WORLD_HPP

#include "smat/box.hpp"
#include "smat/kv_config.hpp"
#include "smat/range_image.hpp"
#include "smat/voxel_map.hpp"

#include <random>

namespace smat {

inline constexpr double kScanRateHz = 10.0;

struct TimedPose {
  double timestamp = 0.0;
  PoseSE3 pose;
};

/**
 * Sensor driving back and forth along the corridor axis (y = 0) at constant
 * speed, with a small sinusoidal yaw wobble so transforms are exercised.
 */
struct SensorPathSpec {
  double start_x = 3.0;
  double end_x = 17.0;
  double speed = 1.0;
  double height = 1.0;
  double yaw_wobble = 0.05;  // rad amplitude
  double wobble_period = 4.0;  // s
  int scan_count = 300;
};

inline std::vector<TimedPose> make_sensor_path(const SensorPathSpec& s) {
  if (s.scan_count < 0) throw ConfigError("scan_count must be non-negative");
  if (!(s.speed > 0.0)) throw ConfigError("sensor speed must be positive");
  const double len = std::abs(s.end_x - s.start_x);
  const double dir0 = s.end_x >= s.start_x ? 1.0 : -1.0;
  std::vector<TimedPose> path;
  path.reserve(static_cast<std::size_t>(s.scan_count));
  for (int i = 0; i < s.scan_count; ++i) {
    const double t = i / kScanRateHz;
    double travelled = s.speed * t;
    double x = s.start_x;
    double heading = dir0 > 0 ? 0.0 : std::numbers::pi;
    if (len > 0.0) {
      const double cycle = std::fmod(travelled, 2.0 * len);
      if (cycle <= len) {
        x = s.start_x + dir0 * cycle;
      } else {
        x = s.end_x - dir0 * (cycle - len);
        heading += std::numbers::pi;
      }
    }
    const double yaw = heading + s.yaw_wobble * std::sin(2.0 * std::numbers::pi * t / s.wobble_period);
    path.push_back({t, PoseSE3::from_yaw(yaw, Point3(x, 0.0, s.height))});
  }
  return path;
}

struct SceneConfig {
  double corridor_length = 20.0;  // along x, walls centred at x = 0 and x = length
  double corridor_width = 10.0;   // along y, walls centred at y = +-width/2
  double wall_height = 4.0;
  double wall_thickness = 0.2;
  double ground_z = 0.0;
  int agent_count = 15;
  double agent_speed_min = 1.2;
  double agent_speed_max = 1.8;
  Point3 agent_size{0.5, 0.5, 1.8};
  double lane_clearance = 1.0;  // agents keep |y| >= this so the sensor lane stays clear
  double wall_clearance = 1.0;  // gap between an agent box and the side walls
  double min_segment = 4.0;     // minimum waypoint loop length
  std::vector<TimedPose> sensor_path = make_sensor_path({});
  RangeImageGeometry beams{};
  double max_range = 50.0;
  double range_noise_sigma = 0.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(corridor_length > 0 && corridor_width > 0 && wall_height > 0 && wall_thickness > 0))
      throw ConfigError("corridor extents must be positive");
    if (agent_count < 0) throw ConfigError("agent_count must be non-negative");
    if (lane_clearance < 0 || wall_clearance < 0) throw ConfigError("clearances must be non-negative");
    if (!(agent_speed_min > 0 && agent_speed_max >= agent_speed_min)) throw ConfigError("agent speeds must be positive");
    if (!((agent_size.array() > 0).all())) throw ConfigError("agent size must be positive");
    if (!(max_range > 0)) throw ConfigError("max_range must be positive");
    if (range_noise_sigma < 0) throw ConfigError("range noise must be non-negative");
    beams.validate();
    for (std::size_t i = 1; i < sensor_path.size(); ++i)
      if (!(sensor_path[i].timestamp > sensor_path[i - 1].timestamp))
        throw ConfigError("sensor path timestamps must be strictly increasing");
  }
};

/// Reads a scenario file. Unknown keys are rejected.
inline SceneConfig load_scene_config(const KeyValueConfig& kv) {
  SceneConfig c;
  c.corridor_length = kv.get_double("corridor_length", c.corridor_length);
  c.corridor_width = kv.get_double("corridor_width", c.corridor_width);
  c.wall_height = kv.get_double("wall_height", c.wall_height);
  c.wall_thickness = kv.get_double("wall_thickness", c.wall_thickness);
  c.agent_count = static_cast<int>(kv.get_int("agent_count", c.agent_count));
  c.agent_speed_min = kv.get_double("agent_speed_min", c.agent_speed_min);
  c.agent_speed_max = kv.get_double("agent_speed_max", c.agent_speed_max);
  c.agent_size = {kv.get_double("agent_size_x", c.agent_size.x()), kv.get_double("agent_size_y", c.agent_size.y()),
                  kv.get_double("agent_size_z", c.agent_size.z())};
  c.lane_clearance = kv.get_double("lane_clearance", c.lane_clearance);
  c.wall_clearance = kv.get_double("wall_clearance", c.wall_clearance);
  c.min_segment = kv.get_double("min_segment", c.min_segment);
  c.max_range = kv.get_double("max_range", c.max_range);
  c.range_noise_sigma = kv.get_double("range_noise_sigma", c.range_noise_sigma);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));

  c.beams.rows = static_cast<int>(kv.get_int("beam_rows", c.beams.rows));
  c.beams.cols = static_cast<int>(kv.get_int("beam_cols", c.beams.cols));
  c.beams.v_min = deg_to_rad(kv.get_double("beam_v_min_deg", -16.0));
  c.beams.v_max = deg_to_rad(kv.get_double("beam_v_max_deg", 16.0));

  SensorPathSpec p;
  p.start_x = kv.get_double("sensor_start_x", p.start_x);
  p.end_x = kv.get_double("sensor_end_x", p.end_x);
  p.speed = kv.get_double("sensor_speed", p.speed);
  p.height = kv.get_double("sensor_height", p.height);
  p.yaw_wobble = kv.get_double("sensor_yaw_wobble", p.yaw_wobble);
  p.scan_count = static_cast<int>(kv.get_int("scan_count", p.scan_count));
  c.sensor_path = make_sensor_path(p);
  kv.check_all_used();
  c.validate();
  return c;
}

/// Box walking back and forth between two x waypoints at fixed y.
struct Agent {
  double lane_y = 0.0;
  double x_a = 0.0;
  double x_b = 0.0;
  double speed = 1.0;
  double phase = 0.0;  // arc length already covered at t = 0
  Point3 size{0.5, 0.5, 1.8};
  double ground_z = 0.0;

  double loop_length() const { return 2.0 * std::abs(x_b - x_a); }

  double x_at(double t) const {
    const double seg = std::abs(x_b - x_a);
    if (seg == 0.0) return x_a;
    double s = std::fmod(phase + speed * t, 2.0 * seg);
    if (s < 0) s += 2.0 * seg;
    const double dir = x_b >= x_a ? 1.0 : -1.0;
    return s <= seg ? x_a + dir * s : x_b - dir * (s - seg);
  }

  /// Signed velocity along x at time t (instant turnaround at the waypoints).
  double vx_at(double t) const {
    const double seg = std::abs(x_b - x_a);
    if (seg == 0.0) return 0.0;
    double s = std::fmod(phase + speed * t, 2.0 * seg);
    if (s < 0) s += 2.0 * seg;
    const double dir = x_b >= x_a ? 1.0 : -1.0;
    return s < seg ? dir * speed : -dir * speed;
  }

  BoundingBox box_at(double t) const {
    const Point3 c(x_at(t), lane_y, ground_z + 0.5 * size.z());
    return BoundingBox::from_center(c, size);
  }
};

struct Scene {
  SceneConfig config;
  std::vector<BoundingBox> walls;
  std::vector<Agent> agents;

  std::vector<BoundingBox> agent_boxes(double t) const {
    std::vector<BoundingBox> out;
    out.reserve(agents.size());
    for (const auto& a : agents) out.push_back(a.box_at(t));
    return out;
  }

  double inner_half_width() const { return 0.5 * (config.corridor_width - config.wall_thickness); }
};

/**
 * Builds the corridor: four walls centred on the corridor boundary and
 * `agent_count` agents placed by seeded rejection sampling so that no two
 * boxes overlap at t = 0.
 */
inline Scene generate_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.config = config;
  const double L = config.corridor_length;
  const double hw = 0.5 * config.corridor_width;
  const double th = 0.5 * config.wall_thickness;
  const double z0 = config.ground_z;
  const double z1 = config.ground_z + config.wall_height;
  scene.walls = {
      {{-th, -hw - th, z0}, {L + th, -hw + th, z1}},
      {{-th, hw - th, z0}, {L + th, hw + th, z1}},
      {{-th, -hw - th, z0}, {th, hw + th, z1}},
      {{L - th, -hw - th, z0}, {L + th, hw + th, z1}},
  };

  std::mt19937_64 rng(config.seed);
  auto uniform = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  const double margin_x = th + 0.5 * config.agent_size.x() + 0.3;
  const double y_max = hw - th - 0.5 * config.agent_size.y() - config.wall_clearance;
  const double y_min = config.lane_clearance + 0.5 * config.agent_size.y();
  const double x_lo = margin_x;
  const double x_hi = L - margin_x;
  if (config.agent_count > 0 && (y_max <= y_min || x_hi - x_lo < config.min_segment))
    throw ConfigError("corridor too small for agents with the requested lane clearance and loop length");

  constexpr int kMaxAttempts = 2000;
  for (int i = 0; i < config.agent_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Agent a;
      a.size = config.agent_size;
      a.ground_z = z0;
      const double side = uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      a.lane_y = side * uniform(y_min, y_max);
      double xa = uniform(x_lo, x_hi - config.min_segment);
      double xb = uniform(xa + config.min_segment, x_hi);
      if (uniform(0.0, 1.0) < 0.5) std::swap(xa, xb);
      a.x_a = xa;
      a.x_b = xb;
      a.speed = uniform(config.agent_speed_min, config.agent_speed_max);
      a.phase = uniform(0.0, a.loop_length());
      const BoundingBox box = a.box_at(0.0);
      placed = std::none_of(scene.agents.begin(), scene.agents.end(),
                            [&](const Agent& o) { return o.box_at(0.0).overlaps(box); });
      if (placed) scene.agents.push_back(a);
    }
    if (!placed)
      throw ConfigError("cannot place agent " + std::to_string(i) + " without initial overlap; agent_count too large");
  }
  return scene;
}

enum class HitKind { none, ground, wall, agent };

struct RayHit {
  HitKind kind = HitKind::none;
  double distance = 0.0;
  int index = -1;  // wall or agent index
};

/// Nearest intersection of a world-frame ray with ground, walls and the
/// given agent boxes, within max_range.
inline RayHit cast_ray(const Scene& scene, std::span<const BoundingBox> agents, const Point3& origin, const Point3& dir) {
  RayHit best;
  double best_t = scene.config.max_range;
  if (dir.z() < 0.0) {
    const double t = (scene.config.ground_z - origin.z()) / dir.z();
    if (t > 0.0 && t <= best_t) {
      best_t = t;
      best = {HitKind::ground, t, -1};
    }
  }
  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    if (auto t = scene.walls[i].ray_hit(origin, dir, best_t); t && *t > 0.0 && *t < best_t) {
      best_t = *t;
      best = {HitKind::wall, *t, static_cast<int>(i)};
    }
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (auto t = agents[i].ray_hit(origin, dir, best_t); t && *t > 0.0 && *t < best_t) {
      best_t = *t;
      best = {HitKind::agent, *t, static_cast<int>(i)};
    }
  }
  return best;
}

namespace detail {
inline double quantize_micro(double v) { return std::round(v * 1e6) / 1e6; }
}  // namespace detail

/**
 * One ray per beam-geometry pixel centre, cast from the sensor origin at
 * time t. Points come back in the sensor frame, labelled dynamic iff the
 * ray's first hit is an agent box. Coordinates are rounded to 1e-6 m so a
 * scan survives the text format unchanged.
 */
inline LabeledScan simulate_scan(const Scene& scene, const PoseSE3& sensor_pose, double t) {
  const auto& g = scene.config.beams;
  const auto agents = scene.agent_boxes(t);
  const Point3 origin = sensor_pose.translation();
  const Eigen::Matrix3d& R = sensor_pose.rotation();
  const Eigen::Matrix3d Rt = R.transpose();

  std::mt19937_64 noise_rng(scene.config.seed ^ (static_cast<std::uint64_t>(std::llround(t * 1e6)) * 0x9E3779B97F4A7C15ULL));
  std::normal_distribution<double> noise(0.0, scene.config.range_noise_sigma > 0 ? scene.config.range_noise_sigma : 1.0);

  LabeledScan scan;
  scan.timestamp = t;
  scan.labels.emplace();
  scan.points.reserve(g.pixel_count() / 2);
  scan.labels->reserve(g.pixel_count() / 2);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const Point3 dir_s = g.pixel_direction(r, c);
      const Point3 dir_w = R * dir_s;
      const RayHit hit = cast_ray(scene, agents, origin, dir_w);
      if (hit.kind == HitKind::none) continue;
      double dist = hit.distance;
      if (scene.config.range_noise_sigma > 0) dist = std::max(1e-3, dist + noise(noise_rng));
      Point3 pw = origin + dist * dir_w;
      if (hit.kind == HitKind::ground && scene.config.range_noise_sigma == 0) pw.z() = scene.config.ground_z;
      Point3 ps = Rt * (pw - origin);
      ps = {detail::quantize_micro(ps.x()), detail::quantize_micro(ps.y()), detail::quantize_micro(ps.z())};
      scan.points.push_back(ps);
      scan.labels->push_back(hit.kind == HitKind::agent ? PointLabel::dynamic_point : PointLabel::static_point);
    }
  }
  return scan;
}

/// Scans for every pose of the configured sensor path.
inline std::vector<LabeledScan> simulate_sequence(const Scene& scene) {
  std::vector<LabeledScan> scans;
  scans.reserve(scene.config.sensor_path.size());
  for (const auto& tp : scene.config.sensor_path) scans.push_back(simulate_scan(scene, tp.pose, tp.timestamp));
  return scans;
}

struct GroundTruthMaps {
  VoxelMap static_map;
  VoxelMap dynamic_map;
  std::size_t static_points = 0;
  std::size_t dynamic_points = 0;

  double dynamic_fraction() const {
    const auto total = static_points + dynamic_points;
    return total ? static_cast<double>(dynamic_points) / static_cast<double>(total) : 0.0;
  }
};

/// Static map = voxels with >= 1 static point; dynamic map = voxels with
/// dynamic points and no static point. Scans must carry labels.
inline GroundTruthMaps ground_truth_maps(std::span<const LabeledScan> scans, std::span<const PoseSE3> poses,
                                         double resolution) {
  if (scans.size() != poses.size()) throw ValidationError("scan and pose counts differ");
  GroundTruthMaps gt{VoxelMap(resolution), VoxelMap(resolution)};
  VoxelMap dyn_any(resolution);
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& s = scans[i];
    if (!s.labels || !s.labels_consistent()) throw ValidationError("ground truth needs labelled scans (scan " + std::to_string(i) + ")");
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      const VoxelKey key = voxel_key(poses[i] * s.points[k], resolution);
      if ((*s.labels)[k] == PointLabel::static_point) {
        gt.static_map.insert(key);
        ++gt.static_points;
      } else {
        dyn_any.insert(key);
        ++gt.dynamic_points;
      }
    }
  }
  for (const auto& k : dyn_any.keys())
    if (!gt.static_map.contains(k)) gt.dynamic_map.insert(k);
  return gt;
}

/// Convenience overload simulating the whole sensor path.
inline GroundTruthMaps ground_truth_maps(const Scene& scene, std::span<const TimedPose> path, double resolution) {
  std::vector<LabeledScan> scans;
  std::vector<PoseSE3> poses;
  for (const auto& tp : path) {
    scans.push_back(simulate_scan(scene, tp.pose, tp.timestamp));
    poses.push_back(tp.pose);
  }
  return ground_truth_maps(scans, poses, resolution);
}

}  // namespace smat

#endif  // SMAT_SIM_WORLD_HPP
