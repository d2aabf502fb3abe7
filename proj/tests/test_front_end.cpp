#include "catch_amalgamated.hpp"

#include "smat/front_end.hpp"
#include "smat/sim_world.hpp"

#include <random>
#include <map>
#include <numeric>
#include <set>

using namespace smat;

namespace {

std::vector<std::vector<std::size_t>> brute_force_components(std::span<const Point3> pts, double dist) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((pts[i] - pts[j]).norm() <= dist) parent[find(j)] = find(i);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [r, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end());
  return out;
}

Tracklet tracklet_with_history(std::size_t associated, std::size_t total, double displacement, double dvol) {
  Tracklet t;
  t.id = 1;
  for (std::size_t i = 0; i < total; ++i) {
    HistoryRecord r;
    r.associated = i < associated;
    const double s = associated > 1 ? static_cast<double>(std::min(i, associated - 1)) / (associated - 1) : 0.0;
    r.centroid = Point3(displacement * s, 0, 0);
    r.volume = 0.45 + (i == 0 ? dvol : 0.0);
    t.history.push_back(r);
  }
  return t;
}

Hypothesis hyp_at(const Point3& c) { return {BoundingBox::from_center(c, {0.5, 0.5, 1.8}), c, {}}; }

Tracklet track_at(std::uint64_t id, const Point3& p) {
  Tracklet t;
  t.id = id;
  t.state.x.head<3>() = p;
  return t;
}

// Walls and one agent at lane y = 2 walking x in [4, 16] at 1.5 m/s; the
// sensor sits still in the middle of the corridor.
Scene one_walker() {
  SceneConfig c;
  c.agent_count = 0;
  c.sensor_path.clear();
  Scene s = generate_scene(c);
  Agent a;
  a.lane_y = 2.0;
  a.x_a = 4.0;
  a.x_b = 16.0;
  a.speed = 1.5;
  s.agents.push_back(a);
  return s;
}

}  // namespace

TEST_CASE("crop_local_static_map uses the horizontal radius") {
  FrontEndParams p;
  VoxelMap empty(0.2);
  CHECK(crop_local_static_map(empty, PoseSE3::identity(), p).empty());

  VoxelMap m(0.2);
  const VoxelKey near = voxel_key({19.9, 0.0, 0.0}, 0.2);  // centre (19.9, 0.1, 0.1)
  const VoxelKey far = voxel_key({20.1, 0.0, 0.0}, 0.2);
  const VoxelKey high = voxel_key({0.0, 0.0, 100.0}, 0.2);
  m.insert(near);
  m.insert(far);
  m.insert(high);
  const auto local = crop_local_static_map(m, PoseSE3::identity(), p);
  CHECK(local.keys.contains(near));
  CHECK_FALSE(local.keys.contains(far));
  CHECK(local.keys.contains(high));

  // The bound follows the sensor pose.
  const auto moved = crop_local_static_map(m, PoseSE3::from_translation({15.0, 0, 0}), p);
  CHECK(moved.keys.contains(far));
}

TEST_CASE("background_subtract") {
  FrontEndParams p;
  LabeledScan scan;
  scan.points = {{1.05, 0.05, 0.05}, {1.25, 0.05, 0.05}, {30.0, 0.0, 0.0}};
  LocalStaticMap cold{VoxelMap(0.2), PoseSE3::identity()};
  auto split = background_subtract(scan, cold, p);
  CHECK(split.dynamic_init == std::vector<std::size_t>{0, 1});
  CHECK(split.out_of_bound == std::vector<std::size_t>{2});

  LocalStaticMap warm{VoxelMap(0.2), PoseSE3::identity()};
  warm.keys.insert_point({1.1, 0.1, 0.1});
  split = background_subtract(scan, warm, p);
  CHECK(split.static_init == std::vector<std::size_t>{0});
  CHECK(split.dynamic_init == std::vector<std::size_t>{1});  // one full voxel away
}

TEST_CASE("euclidean_cluster basic cases") {
  const std::vector<Point3> pair{{0, 0, 0}, {0.3, 0, 0}};
  auto r = euclidean_cluster(pair, 0.5, 2);
  REQUIRE(r.clusters.size() == 1);
  CHECK(r.clusters[0].members.size() == 2);

  std::vector<Point3> blobs;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int i = 0; i < 30; ++i) blobs.emplace_back(n(rng), n(rng), n(rng));
  for (int i = 0; i < 30; ++i) blobs.emplace_back(5 + n(rng), n(rng), n(rng));
  blobs.emplace_back(10, 10, 10);  // lone point, rejected
  r = euclidean_cluster(blobs, 0.5, 5);
  CHECK(r.clusters.size() == 2);
  CHECK(r.rejected == std::vector<std::size_t>{60});
  CHECK_THROWS_AS(euclidean_cluster(blobs, 0.0, 5), ConfigError);
}

TEST_CASE("euclidean_cluster matches a pairwise union-find") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point3> pts(200);
    for (auto& p : pts) p = {u(rng), u(rng), 0.3 * u(rng)};
    const auto r = euclidean_cluster(pts, 0.5, 1);
    std::vector<std::vector<std::size_t>> got;
    for (const auto& c : r.clusters) got.push_back(c.members);
    std::sort(got.begin(), got.end());
    REQUIRE(got == brute_force_components(pts, 0.5));
    for (const auto& c : r.clusters) {
      std::vector<Point3> members;
      for (auto i : c.members) members.push_back(pts[i]);
      REQUIRE(c.box == BoundingBox::around(members));
    }
  }
}

TEST_CASE("associate: gate and greedy order") {
  std::vector<Hypothesis> h{hyp_at({0.2, 0, 0})};
  std::vector<Tracklet> t{track_at(1, {0, 0, 0})};
  auto a = associate(h, t, 1.0);
  REQUIRE(a.matches.size() == 1);

  h = {hyp_at({1.5, 0, 0})};
  a = associate(h, t, 1.0);
  CHECK(a.matches.empty());
  CHECK(a.unmatched_hypotheses.size() == 1);
  CHECK(a.unmatched_tracklets.size() == 1);

  // Crossing configuration: the globally shortest pair (h0, t1) at 0.1 goes
  // first, which forces h1 onto t0 even though h1-t1 (0.3) is shorter.
  h = {hyp_at({0.0, 0, 0}), hyp_at({0.4, 0, 0})};
  t = {track_at(1, {0.9, 0, 0}), track_at(2, {0.1, 0, 0})};
  a = associate(h, t, 1.0);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(a.matches[1] == std::pair<std::size_t, std::size_t>{1, 0});

  // Equal distances resolve by tracklet id.
  h = {hyp_at({0, 0, 0})};
  t = {track_at(7, {0.5, 0, 0}), track_at(3, {-0.5, 0, 0})};
  a = associate(h, t, 1.0);
  CHECK(a.matches[0].second == 1);
}

TEST_CASE("EKF predict and update") {
  EkfNoise noise;
  KalmanState s;
  s.x << 0, 0, 0, 1, 0, 0;
  const auto moved = ekf_predict(s, 0.1, noise);
  CHECK((moved.position() - Point3(0.1, 0, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(ekf_predict(s, 0.0, noise), ValidationError);

  // Noise-free constant velocity.
  EkfNoise exact{0.0, 0.0, 2.0};
  const Point3 p0(1, -2, 0.5), v(1.3, -0.4, 0.0);
  KalmanState k = KalmanState::at_rest(p0, exact);
  for (int i = 1; i <= 5; ++i) {
    k = ekf_predict(k, 0.1, exact);
    k = ekf_update(k, p0 + v * (0.1 * i), exact);
  }
  CHECK((k.velocity() - v).norm() <= 1e-6);
  CHECK((k.P - k.P.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix6d>(k.P).eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("EKF velocity error under measurement noise") {
  // Tracker defaults, and a filter matched to a constant-velocity target.
  for (const EkfNoise noise : {EkfNoise{}, EkfNoise{0.1, 0.05, 2.0}}) {
    const Point3 v(1.5, 0.5, 0.0);
    double total = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 0.05);
      auto meas = [&](int i) { return Point3(v * (0.1 * i) + Point3(n(rng), n(rng), n(rng))); };
      KalmanState k = KalmanState::at_rest(meas(0), noise);
      for (int i = 1; i <= 10; ++i) k = ekf_update(ekf_predict(k, 0.1, noise), meas(i), noise);
      total += (k.velocity() - v).norm();
    }
    INFO("accel sigma " << noise.accel_sigma);
    CHECK(total / 100.0 <= 0.1);
  }
}

TEST_CASE("stable_check thresholds") {
  StabilityParams p;
  REQUIRE(p.window_frames() == 10);
  const Tracklet ok = tracklet_with_history(9, 10, 1.35, 0.5);
  const auto s = stability_stats(ok, p);
  CHECK(s.rho == Catch::Approx(0.9));
  CHECK(s.speed == Catch::Approx(1.5));
  CHECK(s.volume_change == Catch::Approx(0.5));
  CHECK(stable_check(ok, p));

  CHECK_FALSE(stable_check(tracklet_with_history(6, 10, 5.0, 0.0), p));   // rho 0.6
  CHECK_FALSE(stable_check(tracklet_with_history(10, 10, 0.5, 0.0), p));  // loitering
  CHECK_FALSE(stable_check(tracklet_with_history(10, 10, 2.0, 3.5), p));  // volume jumps
  CHECK_FALSE(stable_check(tracklet_with_history(5, 5, 2.0, 0.0), p));    // window not full
}

TEST_CASE("detect_by_tracking") {
  FrontEndParams p;
  Tracklet t;
  t.id = 4;
  t.stable = true;
  t.box = BoundingBox{{0, 0, 0}, {0.5, 0.5, 1.8}};
  t.state.x << 0.25, 0.25, 0.9, 1.0, 0, 0;
  const std::size_t lost[] = {0};

  SECTION("points inside the predicted box are reclaimed") {
    std::vector<Point3> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(0.35, 0.25, 0.2 * i + 0.1);  // inside [0.1, 0.6]
    pts.emplace_back(0.05, 0.25, 0.5);  // left behind by the motion
    std::vector<char> cand(pts.size(), 1);
    std::vector<Tracklet> tr{t};
    const auto r = detect_by_tracking(tr, lost, pts, cand, 0.1, p);
    CHECK(r.recovered_tracklets.size() == 1);
    CHECK(r.reclassified.size() == 8);
    CHECK(tr[0].consecutive_misses == 0);
    CHECK(tr[0].box.min.x() == Catch::Approx(0.1));
    CHECK(tr[0].box.size() == t.box.size());
  }
  SECTION("empty space records a miss") {
    std::vector<Point3> pts{{5, 5, 5}};
    std::vector<char> cand(1, 1);
    std::vector<Tracklet> tr{t};
    const auto r = detect_by_tracking(tr, lost, pts, cand, 0.1, p);
    CHECK(r.recovered_tracklets.empty());
    CHECK(tr[0].consecutive_misses == 1);
  }
  SECTION("too few points") {
    std::vector<Point3> pts{{0.35, 0.25, 0.5}, {0.35, 0.25, 0.7}};
    std::vector<char> cand(2, 1);
    std::vector<Tracklet> tr{t};
    const auto r = detect_by_tracking(tr, lost, pts, cand, 0.1, p);
    CHECK(r.reclassified.empty());
    CHECK(tr[0].consecutive_misses == 1);
  }
}

TEST_CASE("front_end_step: cold start and warm static scene") {
  SceneConfig c;
  c.agent_count = 0;
  c.sensor_path.clear();
  const Scene s = generate_scene(c);
  const PoseSE3 pose = PoseSE3::from_translation({10, 0, 1});
  const auto scan = simulate_scan(s, pose, 0.0);
  FrontEndParams p;

  TrackerState cold;
  const auto out = front_end_step(scan, pose, nullptr, cold, p);
  CHECK(out.dynamic_points.empty());
  CHECK(out.static_points.size() == scan.points.size());
  CHECK(out.in_bound_count + std::count(out.point_class.begin(), out.point_class.end(), PointClass::out_of_bound) ==
        scan.points.size());

  const std::vector<LabeledScan> scans{scan};
  const std::vector<PoseSE3> poses{pose};
  const auto gt = ground_truth_maps(scans, poses, 0.2);
  TrackerState warm;
  const auto out2 = front_end_step(scan, pose, &gt.static_map, warm, p);
  CHECK(out2.dynamic_points.empty());
  CHECK(warm.tracklets.empty());

  // Rejected input leaves the state untouched.
  LabeledScan older = scan;
  older.timestamp = -1.0;
  CHECK_THROWS_AS(front_end_step(older, pose, &gt.static_map, warm, p), ValidationError);
  CHECK(warm.last_timestamp == 0.0);
}

TEST_CASE("front_end_step tracks a single walker") {
  const Scene s = one_walker();
  const PoseSE3 pose = PoseSE3::from_translation({10, 0, 1});
  Scene empty = s;
  empty.agents.clear();
  const std::vector<LabeledScan> bg{simulate_scan(empty, pose, 0.0)};
  const std::vector<PoseSE3> bg_pose{pose};
  const VoxelMap map = ground_truth_maps(bg, bg_pose, 0.2).static_map;

  FrontEndParams p;
  TrackerState st;
  FrontEndOutput last;
  for (int f = 0; f < 15; ++f) {
    const double t = f / kScanRateHz;
    const auto scan = simulate_scan(s, pose, t);
    last = front_end_step(scan, pose, &map, st, p);
    const auto n_dyn = last.dynamic_points.size();
    const auto n_static_in =
        std::count(last.point_class.begin(), last.point_class.end(), PointClass::static_point);
    REQUIRE(static_cast<std::size_t>(n_static_in) + n_dyn == last.in_bound_count);
  }
  std::size_t stable = 0;
  for (const auto& t : st.tracklets) stable += t.stable;
  REQUIRE(stable == 1);
  REQUIRE(last.tracked.size() == 1);
  CHECK(std::abs(last.tracked[0].velocity.norm() - 1.5) <= 0.3);
  CHECK_FALSE(last.dynamic_points.empty());
}

TEST_CASE("front end over a crowded run: partition, determinism, retired ids") {
  SceneConfig c;
  c.sensor_path = make_sensor_path({.scan_count = 60});
  const Scene s = generate_scene(c);
  Scene bare = s;
  bare.agents.clear();
  std::vector<LabeledScan> bg;
  std::vector<PoseSE3> bg_poses;
  for (const auto& tp : c.sensor_path) {
    bg.push_back(simulate_scan(bare, tp.pose, tp.timestamp));
    bg_poses.push_back(tp.pose);
  }
  const VoxelMap map = ground_truth_maps(bg, bg_poses, 0.2).static_map;

  auto run = [&](std::vector<std::vector<std::uint64_t>>& ids, std::size_t& rho_violations) {
    FrontEndParams p;
    TrackerState st;
    std::set<std::uint64_t> retired;
    for (const auto& tp : c.sensor_path) {
      const auto scan = simulate_scan(s, tp.pose, tp.timestamp);
      const auto out = front_end_step(scan, tp.pose, &map, st, p);
      REQUIRE(out.static_points.size() + out.dynamic_points.size() == scan.points.size());
      std::vector<std::uint64_t> frame_ids;
      for (const auto& tb : out.tracked) frame_ids.push_back(tb.id);
      ids.push_back(frame_ids);
      for (const auto& t : st.tracklets) {
        REQUIRE_FALSE(retired.contains(t.id));
        if (t.stable) rho_violations += stability_stats(t, p.stability).rho <= p.stability.rho_min;
      }
      retired.insert(st.retired_ids.begin(), st.retired_ids.end());
    }
  };
  std::vector<std::vector<std::uint64_t>> a, b;
  std::size_t va = 0, vb = 0;
  run(a, va);
  run(b, vb);
  CHECK(a == b);
  CHECK(va == 0);
  std::size_t tracked_frames = 0;
  for (const auto& f : a) tracked_frames += !f.empty();
  CHECK(tracked_frames > 30);
}
