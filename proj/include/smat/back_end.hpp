#ifndef SMAT_BACK_END_HPP
#define SMAT_BACK_END_HPP

#include "smat/range_image.hpp"
#include "smat/ray_traversal.hpp"
#include "smat/voxel_map.hpp"

#include <chrono>
#include <memory>
#include <unordered_map>

namespace smat {

/// How the back end estimates the free count of a voxel.
enum class FreeSpaceModel {
  visibility_occupancy,  // visibility check + occupancy probability
  visibility_only,       // any visibility free count marks the voxel free
  exact_ray,             // 3D grid traversal from each sensor origin + occupancy probability
};

struct BackEndParams {
  double r_query = 5.0;          // m
  double map_resolution = 0.2;   // m
  double gamma = 0.9;            // safe-sphere shrink, [0, 1)
  double occ_threshold = 0.5;
  double submap_spacing = 2.0;   // m
  // Query-frame images hold points reprojected from other poses, so they
  // span more elevation than the sensor itself (same 1 degree rows).
  RangeImageGeometry projection{.rows = 90, .cols = 900, .v_min = deg_to_rad(-45.0), .v_max = deg_to_rad(45.0)};
  FreeSpaceModel model = FreeSpaceModel::visibility_occupancy;

  void validate() const {
    if (!(r_query > 0 && map_resolution > 0 && submap_spacing > 0)) throw ConfigError("back-end distances must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(occ_threshold >= 0.0 && occ_threshold < 1.0)) throw ConfigError("occ_threshold must lie in [0, 1)");
    projection.validate();
  }
};

/// Sum and count of one scan's points inside one world-lattice voxel.
struct VoxelSample {
  VoxelKey key;
  Point3 sum = Point3::Zero();
  std::uint32_t count = 0;
};

inline std::vector<VoxelSample> summarize_voxels(std::span<const Point3> points, double resolution) {
  check_resolution(resolution);
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  std::vector<VoxelSample> out;
  for (const auto& p : points) {
    const VoxelKey k = voxel_key(p, resolution);
    auto [it, inserted] = slot.try_emplace(k, out.size());
    if (inserted) out.push_back({k, Point3::Zero(), 0});
    out[it->second].sum += p;
    ++out[it->second].count;
  }
  return out;
}

struct BufferEntry {
  std::vector<Point3> points;  // world frame
  PoseSE3 pose;                // world_from_sensor used to produce `points`
  double timestamp = 0.0;
  std::vector<VoxelSample> voxels;  // world frame; filled on append when empty
};

/// Time-ordered store of static scans handed over by the front end.
class StaticScanBuffer {
 public:
  explicit StaticScanBuffer(double resolution = 0.2) : resolution_(resolution) { check_resolution(resolution); }

  void append(BufferEntry e) {
    if (!entries_.empty() && !(e.timestamp > entries_.back().timestamp))
      throw ValidationError("static scan buffer: timestamps must increase");
    if (e.voxels.empty()) e.voxels = summarize_voxels(e.points, resolution_);
    entries_.push_back(std::move(e));
  }

  double resolution() const { return resolution_; }

  const std::vector<BufferEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Drops entries whose sensor position is farther than `radius` from `center`.
  std::size_t prune(const Point3& center, double radius) {
    const auto before = entries_.size();
    std::erase_if(entries_, [&](const BufferEntry& e) { return (e.pose.translation() - center).norm() > radius; });
    return before - entries_.size();
  }

 private:
  double resolution_;
  std::vector<BufferEntry> entries_;
};

struct QueriedScan {
  std::vector<Point3> points;  // query frame
  PoseSE3 query_from_sensor;
  double timestamp = 0.0;
  std::size_t source = 0;      // index into the buffer
  std::vector<VoxelSample> voxels;  // world frame; derived from `points` when empty
};

/// Buffered scans whose sensor position lies strictly within r_query of the
/// query position, re-expressed in the query frame.
inline std::vector<QueriedScan> query_scans(const StaticScanBuffer& buffer, const PoseSE3& world_from_query,
                                            const BackEndParams& p) {
  std::vector<QueriedScan> out;
  const PoseSE3 query_from_world = world_from_query.inverse();
  const auto& entries = buffer.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if ((e.pose.translation() - world_from_query.translation()).norm() >= p.r_query) continue;
    out.push_back({transform_points(query_from_world, e.points), query_from_world * e.pose, e.timestamp, i, e.voxels});
  }
  return out;
}

struct VoxelCounter {
  std::uint32_t n_occ = 0;
  std::uint32_t n_free = 0;

  double probability() const { return static_cast<double>(n_occ) / static_cast<double>(n_occ + n_free); }
};

struct OccupancySubmap {
  PoseSE3 origin;  // world_from_query
  double resolution = 0.2;
  std::unordered_map<VoxelKey, VoxelCounter, VoxelKeyHash> counters;  // world-lattice keys
  VoxelMap occupied{0.2};
  std::size_t scan_count = 0;
  double build_ms = 0.0;
};

namespace detail {

struct VoxelAccumulator {
  Point3 sum = Point3::Zero();  // query frame
  std::uint32_t points = 0;
  std::uint32_t n_occ = 0;
  std::int64_t last_scan = -1;
  std::int64_t last_free_scan = -1;
  std::uint32_t n_free = 0;
};

}  // namespace detail

/**
 * Occupancy submap at a query pose. Voxels live on the world lattice; the
 * free count comes from one of three models:
 *  - visibility: each scan becomes a range image in the query frame; a
 *    voxel (represented by the mean of its points, range d, pixel rc) is
 *    free-counted once per image with a value at rc and d < gamma * I_rc;
 *  - exact_ray: a grid walk from each scan's sensor origin to each of its
 *    points free-counts the crossed voxels (the end voxel excluded), at most
 *    once per scan.
 * n_occ is the number of distinct scans with a point in the voxel.
 */
inline OccupancySubmap build_submap(const PoseSE3& world_from_query, std::span<const QueriedScan> scans,
                                    const BackEndParams& p) {
  p.validate();
  const auto t0 = std::chrono::steady_clock::now();
  OccupancySubmap sub;
  sub.origin = world_from_query;
  sub.resolution = p.map_resolution;
  sub.occupied = VoxelMap(p.map_resolution);
  sub.scan_count = scans.size();

  // Accumulate in the world frame; the mean maps to the query frame at the end.
  std::unordered_map<VoxelKey, detail::VoxelAccumulator, VoxelKeyHash> acc;
  std::vector<VoxelKey> order;  // insertion order, for deterministic iteration
  for (std::size_t s = 0; s < scans.size(); ++s) {
    std::vector<VoxelSample> derived;
    std::span<const VoxelSample> samples = scans[s].voxels;
    if (samples.empty() && !scans[s].points.empty()) {
      derived = summarize_voxels(transform_points(world_from_query, scans[s].points), p.map_resolution);
      samples = derived;
    }
    for (const auto& v : samples) {
      auto [it, inserted] = acc.try_emplace(v.key);
      if (inserted) order.push_back(v.key);
      auto& a = it->second;
      a.sum += v.sum;
      a.points += v.count;
      if (a.last_scan != static_cast<std::int64_t>(s)) {
        a.last_scan = static_cast<std::int64_t>(s);
        ++a.n_occ;
      }
    }
  }
  const PoseSE3 query_from_world = world_from_query.inverse();

  if (p.model == FreeSpaceModel::exact_ray) {
    for (std::size_t s = 0; s < scans.size(); ++s) {
      const Point3 origin = world_from_query * scans[s].query_from_sensor.translation();
      for (const auto& q : scans[s].points) {
        const Point3 end = world_from_query * q;
        const VoxelKey end_key = voxel_key(end, p.map_resolution);
        traverse_voxels(origin, end, p.map_resolution, [&](const VoxelKey& k) {
          if (k == end_key) return;
          auto it = acc.find(k);
          if (it == acc.end() || it->second.last_free_scan == static_cast<std::int64_t>(s)) return;
          it->second.last_free_scan = static_cast<std::int64_t>(s);
          ++it->second.n_free;
        });
      }
    }
  } else {
    std::vector<RangeImage> images;
    images.reserve(scans.size());
    for (const auto& s : scans) images.push_back(project_range_image(s.points, p.projection));
    for (const auto& k : order) {
      auto& a = acc[k];
      const Point3 rep = query_from_world * Point3(a.sum / static_cast<double>(a.points));
      const auto px = pixel_of(rep, p.projection);
      if (!px) continue;
      const double d = range_3d(rep);
      for (const auto& img : images) {
        const auto I = img.at(*px);
        if (I && d < p.gamma * *I) ++a.n_free;
      }
    }
  }

  sub.counters.reserve(acc.size());
  for (const auto& k : order) {
    const auto& a = acc[k];
    const VoxelCounter c{a.n_occ, a.n_free};
    sub.counters.emplace(k, c);
    const bool occupied = p.model == FreeSpaceModel::visibility_only ? c.n_free == 0
                                                                     : c.probability() > p.occ_threshold;
    if (occupied) sub.occupied.insert(k);
  }
  sub.build_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return sub;
}

/**
 * Nearest-submap merge. Each voxel is decided by the submap, among those
 * that observed it, whose origin is nearest the voxel centre (ties go to
 * the lowest index); it is kept iff that submap marks it occupied.
 */
inline VoxelMap merge_submaps(std::span<const OccupancySubmap> submaps) {
  if (submaps.empty()) return VoxelMap();
  const double res = submaps.front().resolution;
  struct Best {
    double dist2;
    std::size_t index;
  };
  std::unordered_map<VoxelKey, Best, VoxelKeyHash> best;
  for (std::size_t i = 0; i < submaps.size(); ++i) {
    if (submaps[i].resolution != res) throw ConfigError("submaps with different resolutions cannot be merged");
    const Point3& o = submaps[i].origin.translation();
    for (const auto& [k, c] : submaps[i].counters) {
      const double d2 = (voxel_center(k, res) - o).squaredNorm();
      auto [it, inserted] = best.try_emplace(k, Best{d2, i});
      if (!inserted && (d2 < it->second.dist2 || (d2 == it->second.dist2 && i < it->second.index)))
        it->second = {d2, i};
    }
  }
  VoxelMap merged(res);
  for (const auto& [k, b] : best)
    if (submaps[b.index].occupied.contains(k)) merged.insert(k);
  return merged;
}

/// Immutable published map snapshot.
struct GlobalStaticMap {
  VoxelMap merged;
  std::uint64_t version = 0;
  std::size_t submap_count = 0;
};

struct BackEndIterationInfo {
  bool published = false;
  bool new_submap = false;
  std::size_t scans_used = 0;
  double runtime_ms = 0.0;
};

/**
 * Back-end state: static-scan buffer, submaps and the latest published
 * snapshot. Readers keep a shared_ptr to a snapshot; a publish swaps the
 * pointer and never mutates an existing snapshot.
 */
class BackEnd {
 public:
  explicit BackEnd(BackEndParams params) : params_(std::move(params)), buffer_(params_.map_resolution) {
    params_.validate();
  }

  const BackEndParams& params() const { return params_; }
  StaticScanBuffer& buffer() { return buffer_; }
  const StaticScanBuffer& buffer() const { return buffer_; }
  const std::vector<OccupancySubmap>& submaps() const { return submaps_; }
  std::shared_ptr<const GlobalStaticMap> published() const { return published_; }
  std::uint64_t version() const { return published_ ? published_->version : 0; }

  /// New submap when the robot has moved >= submap_spacing from the last
  /// origin (or none exists); otherwise rebuild the latest submap with the
  /// scans buffered so far. Publishes a new snapshot when a submap was built.
  BackEndIterationInfo iterate(const PoseSE3& current_pose) {
    const auto t0 = std::chrono::steady_clock::now();
    BackEndIterationInfo info;
    if (buffer_.empty()) return info;

    constexpr double kSpacingTolerance = 1e-9;
    const bool need_new =
        submaps_.empty() ||
        (current_pose.translation() - submaps_.back().origin.translation()).norm() + kSpacingTolerance >=
            params_.submap_spacing;
    const PoseSE3 origin = need_new ? current_pose : submaps_.back().origin;
    const auto scans = query_scans(buffer_, origin, params_);
    info.scans_used = scans.size();
    if (scans.empty()) return info;

    OccupancySubmap sub = build_submap(origin, scans, params_);
    if (need_new) {
      if (!submaps_.empty())
        buffer_.prune(current_pose.translation(), 2.0 * params_.r_query);
      submaps_.push_back(std::move(sub));
      info.new_submap = true;
    } else {
      submaps_.back() = std::move(sub);
    }

    auto snapshot = std::make_shared<GlobalStaticMap>();
    snapshot->merged = merge_submaps(submaps_);
    snapshot->version = version() + 1;
    snapshot->submap_count = submaps_.size();
    published_ = std::move(snapshot);
    info.published = true;
    info.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return info;
  }

 private:
  BackEndParams params_;
  StaticScanBuffer buffer_;
  std::vector<OccupancySubmap> submaps_;
  std::shared_ptr<const GlobalStaticMap> published_;
};

}  // namespace smat

#endif  // SMAT_BACK_END_HPP
