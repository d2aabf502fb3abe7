#ifndef SMAT_PIPELINE_HPP
#define SMAT_PIPELINE_HPP

#include "smat/back_end.hpp"
#include "smat/front_end.hpp"

#include <array>
#include <condition_variable>
#include <mutex>
#include <string_view>
#include <thread>

namespace smat {

enum class PipelineMode { full, front_end_only, back_end_only, visibility_only, occupancy_only };

inline constexpr std::array<PipelineMode, 5> kAllModes = {PipelineMode::front_end_only, PipelineMode::back_end_only,
                                                          PipelineMode::visibility_only, PipelineMode::occupancy_only,
                                                          PipelineMode::full};

inline std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::full: return "full";
    case PipelineMode::front_end_only: return "front_end_only";
    case PipelineMode::back_end_only: return "back_end_only";
    case PipelineMode::visibility_only: return "visibility_only";
    case PipelineMode::occupancy_only: return "occupancy_only";
  }
  return "?";
}

inline PipelineMode parse_mode(std::string_view s) {
  for (auto m : kAllModes)
    if (to_string(m) == s) return m;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

enum class Execution { interleaved, two_worker };

struct PipelineConfig {
  FrontEndParams front_end{};
  BackEndParams back_end{};
  PipelineMode mode = PipelineMode::full;
  Execution execution = Execution::interleaved;
  std::size_t cold_start_scans = 3;  // buffered static scans before the first publish
  std::size_t back_end_period = 10;  // frames between back-end iterations

  bool runs_front_end() const { return mode == PipelineMode::full || mode == PipelineMode::front_end_only; }
  bool runs_back_end() const { return mode != PipelineMode::front_end_only; }

  /// Back-end configuration with the free-space model the mode implies.
  BackEndParams effective_back_end() const {
    BackEndParams p = back_end;
    if (mode == PipelineMode::visibility_only) p.model = FreeSpaceModel::visibility_only;
    if (mode == PipelineMode::occupancy_only) p.model = FreeSpaceModel::exact_ray;
    return p;
  }
};

struct FrameSummary {
  double timestamp = 0.0;
  std::uint64_t map_version_read = 0;
  std::size_t static_count = 0;
  std::size_t dynamic_count = 0;
  std::size_t in_bound_count = 0;
  std::vector<TrackedBox> tracked;
  std::vector<PointClass> point_class;  // empty when the front end did not run
  double front_end_ms = 0.0;
  double back_end_ms = 0.0;
  bool back_end_iterated = false;
};

struct RunReport {
  PipelineMode mode = PipelineMode::full;
  std::vector<FrameSummary> frames;
  std::vector<std::pair<std::size_t, std::uint64_t>> map_versions;  // (frame index, version published after it)
  std::vector<OccupancySubmap> submaps;
  std::vector<std::vector<double>> submap_scan_times;  // timestamps used by each submap's last build
  std::vector<double> submap_created_at;               // timestamp of the frame that opened each submap
  std::shared_ptr<const GlobalStaticMap> final_map;
  double front_end_ms = 0.0;
  double back_end_ms = 0.0;
  std::size_t back_end_iterations = 0;

  double back_end_ms_per_scan() const { return frames.empty() ? 0.0 : back_end_ms / static_cast<double>(frames.size()); }
  double front_end_ms_per_scan() const { return frames.empty() ? 0.0 : front_end_ms / static_cast<double>(frames.size()); }
};

namespace detail {

/// Per-frame work shared by both execution models.
class PipelineCore {
 public:
  explicit PipelineCore(const PipelineConfig& cfg)
      : cfg_(cfg), back_end_(cfg.effective_back_end()), stacked_(cfg.back_end.map_resolution) {
    cfg_.front_end.validate();
    if (cfg_.back_end_period == 0) throw ConfigError("back_end_period must be positive");
  }

  /// Front half of a frame. Reads only `snapshot`.
  std::pair<FrameSummary, BufferEntry> front(const LabeledScan& scan, const PoseSE3& pose,
                                            const std::shared_ptr<const GlobalStaticMap>& snapshot) {
    FrameSummary fs;
    fs.timestamp = scan.timestamp;
    fs.map_version_read = snapshot ? snapshot->version : 0;
    BufferEntry entry;
    entry.pose = pose;
    entry.timestamp = scan.timestamp;
    if (cfg_.runs_front_end()) {
      // Front-end-only runs without any back-end map: every in-bound point
      // starts dynamic and only stable tracks are removed.
      const VoxelMap* map = (cfg_.mode == PipelineMode::full && snapshot) ? &snapshot->merged : nullptr;
      FrontEndOutput out = front_end_step(scan, pose, map, tracker_, cfg_.front_end);
      fs.static_count = out.static_points.size();
      fs.dynamic_count = out.dynamic_points.size();
      fs.in_bound_count = out.in_bound_count;
      fs.tracked = std::move(out.tracked);
      fs.point_class = std::move(out.point_class);
      fs.front_end_ms = out.runtime_ms;
      entry.points = std::move(out.static_points);
    } else {
      scan.validate();
      entry.points = transform_points(pose, scan.points);
      fs.static_count = entry.points.size();
      fs.in_bound_count = entry.points.size();
    }
    return {std::move(fs), std::move(entry)};
  }

  struct BackStep {
    double ms = 0.0;
    bool iterated = false;
    bool published = false;
  };

  /// Back half of a frame: buffer the static scan and maybe publish.
  BackStep back(BufferEntry entry, const PoseSE3& pose) {
    BackStep step;
    if (!cfg_.runs_back_end()) {
      for (const auto& p : entry.points) stacked_.insert_point(p);
      return step;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const double t = entry.timestamp;
    back_end_.buffer().append(std::move(entry));
    ++buffered_;
    ++pending_;
    last_pose_ = pose;
    last_time_ = t;
    if (buffered_ >= cfg_.cold_start_scans && (buffered_ - cfg_.cold_start_scans) % cfg_.back_end_period == 0)
      iterate(step);
    step.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return step;
  }

  /// Folds scans buffered since the last iteration into the map.
  BackStep flush() {
    BackStep step;
    if (!cfg_.runs_back_end() || pending_ == 0) return step;
    const auto t0 = std::chrono::steady_clock::now();
    iterate(step);
    step.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return step;
  }

  std::shared_ptr<const GlobalStaticMap> snapshot() const { return back_end_.published(); }

 private:
  void iterate(BackStep& step) {
    const auto info = back_end_.iterate(last_pose_);
    pending_ = 0;
    step.iterated = true;
    step.published = info.published;
    if (info.new_submap) created_at_.push_back(last_time_);
    if (info.published) {
      std::vector<double> times;
      for (const auto& q : query_scans(back_end_.buffer(), back_end_.submaps().back().origin, back_end_.params()))
        times.push_back(q.timestamp);
      if (scan_times_.size() < back_end_.submaps().size()) scan_times_.resize(back_end_.submaps().size());
      scan_times_.back() = std::move(times);
    }
  }

 public:

  /// Flushes the back end and fills in the run-level fields.
  void finish(RunReport& report) {
    report.mode = cfg_.mode;
    const BackStep last = flush();
    if (last.iterated) {
      report.back_end_ms += last.ms;
      ++report.back_end_iterations;
      if (last.published) report.map_versions.emplace_back(report.frames.size() - 1, back_end_.version());
    }
    if (cfg_.runs_back_end()) {
      report.submaps = back_end_.submaps();
      report.submap_scan_times = scan_times_;
      report.submap_created_at = created_at_;
      report.final_map = back_end_.published();
      if (!report.final_map) {
        auto empty = std::make_shared<GlobalStaticMap>();
        empty->merged = VoxelMap(cfg_.back_end.map_resolution);
        report.final_map = empty;
      }
    } else {
      auto m = std::make_shared<GlobalStaticMap>();
      m->merged = stacked_;
      m->version = report.frames.empty() ? 0 : 1;
      report.final_map = m;
    }
  }

 private:
  PipelineConfig cfg_;
  TrackerState tracker_;
  BackEnd back_end_;
  VoxelMap stacked_;
  std::size_t buffered_ = 0;
  std::size_t pending_ = 0;
  PoseSE3 last_pose_;
  double last_time_ = 0.0;
  std::vector<double> created_at_;
  std::vector<std::vector<double>> scan_times_;
};

inline void check_sequence(std::span<const LabeledScan> scans, std::span<const PoseSE3> poses) {
  if (scans.size() != poses.size()) throw ValidationError("run_sequence: scan and pose counts differ");
  for (std::size_t i = 1; i < scans.size(); ++i)
    if (!(scans[i].timestamp > scans[i - 1].timestamp))
      throw ValidationError("run_sequence: timestamps out of order at scan index " + std::to_string(i));
}

}  // namespace detail

/**
 * Runs the self-reinforcing loop over a posed scan sequence. Each frame's
 * front end reads the snapshot published before that frame; its static scan
 * then goes to the back end. With Execution::two_worker the back end runs on
 * its own thread, handing snapshots over at the same points as the
 * interleaved schedule, so both produce identical maps.
 */
inline RunReport run_sequence(std::span<const LabeledScan> scans, std::span<const PoseSE3> poses,
                              const PipelineConfig& cfg) {
  detail::check_sequence(scans, poses);
  RunReport report;
  detail::PipelineCore core(cfg);
  report.frames.reserve(scans.size());

  if (cfg.execution == Execution::interleaved) {
    for (std::size_t i = 0; i < scans.size(); ++i) {
      auto [fs, entry] = core.front(scans[i], poses[i], core.snapshot());
      const auto step = core.back(std::move(entry), poses[i]);
      fs.back_end_ms = step.ms;
      fs.back_end_iterated = step.iterated;
      if (step.published) report.map_versions.emplace_back(i, core.snapshot()->version);
      report.front_end_ms += fs.front_end_ms;
      report.back_end_ms += fs.back_end_ms;
      report.back_end_iterations += step.iterated;
      report.frames.push_back(std::move(fs));
    }
    core.finish(report);
    return report;
  }

  // Two workers: the front end (this thread) and the back end (worker) pass
  // one static scan forward and one snapshot back per frame.
  std::mutex mu;
  std::condition_variable cv;
  std::optional<std::pair<BufferEntry, std::size_t>> to_back;
  std::optional<std::pair<std::shared_ptr<const GlobalStaticMap>, detail::PipelineCore::BackStep>> to_front;
  bool stop = false;
  std::exception_ptr worker_error;

  std::thread worker([&] {
    for (;;) {
      std::pair<BufferEntry, std::size_t> job;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return to_back.has_value() || stop; });
        if (!to_back) return;
        job = std::move(*to_back);
        to_back.reset();
      }
      detail::PipelineCore::BackStep step;
      try {
        step = core.back(std::move(job.first), poses[job.second]);
      } catch (...) {
        std::lock_guard lock(mu);
        worker_error = std::current_exception();
      }
      {
        std::lock_guard lock(mu);
        to_front.emplace(core.snapshot(), step);
      }
      cv.notify_all();
    }
  });

  std::shared_ptr<const GlobalStaticMap> snapshot;
  try {
    for (std::size_t i = 0; i < scans.size(); ++i) {
      auto [fs, entry] = core.front(scans[i], poses[i], snapshot);
      {
        std::lock_guard lock(mu);
        to_back.emplace(std::move(entry), i);
      }
      cv.notify_all();
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return to_front.has_value(); });
      if (worker_error) std::rethrow_exception(worker_error);
      snapshot = to_front->first;
      const auto step = to_front->second;
      to_front.reset();
      lock.unlock();
      fs.back_end_ms = step.ms;
      fs.back_end_iterated = step.iterated;
      if (step.published) report.map_versions.emplace_back(i, snapshot->version);
      report.front_end_ms += fs.front_end_ms;
      report.back_end_ms += fs.back_end_ms;
      report.back_end_iterations += step.iterated;
      report.frames.push_back(std::move(fs));
    }
  } catch (...) {
    {
      std::lock_guard lock(mu);
      stop = true;
    }
    cv.notify_all();
    worker.join();
    throw;
  }
  {
    std::lock_guard lock(mu);
    stop = true;
  }
  cv.notify_all();
  worker.join();
  core.finish(report);
  return report;
}

}  // namespace smat

#endif  // SMAT_PIPELINE_HPP
