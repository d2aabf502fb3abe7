#ifndef SMAT_TRACKING_HPP
#define SMAT_TRACKING_HPP

#include "smat/box.hpp"

#include <Eigen/Eigenvalues>

#include <deque>
#include <iostream>

namespace smat {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

struct EkfNoise {
  double accel_sigma = 1.0;     // m/s^2, white-noise acceleration
  double meas_sigma = 0.1;      // m, centroid measurement
  double init_vel_sigma = 2.0;  // m/s, prior on a newborn track's velocity
};

/// Constant-velocity state (x, y, z, vx, vy, vz) with covariance.
struct KalmanState {
  Vector6d x = Vector6d::Zero();
  Matrix6d P = Matrix6d::Identity();

  Point3 position() const { return x.head<3>(); }
  Point3 velocity() const { return x.tail<3>(); }

  static KalmanState at_rest(const Point3& p, const EkfNoise& noise) {
    KalmanState s;
    s.x.head<3>() = p;
    s.P.setZero();
    s.P.topLeftCorner<3, 3>().diagonal().setConstant(noise.meas_sigma * noise.meas_sigma);
    s.P.bottomRightCorner<3, 3>().diagonal().setConstant(noise.init_vel_sigma * noise.init_vel_sigma);
    return s;
  }
};

namespace detail {

inline std::size_t& covariance_repairs() {
  static thread_local std::size_t n = 0;
  return n;
}

/// Symmetrizes and clamps negative eigenvalues at zero. Returns true when a
/// repair beyond symmetrization was needed.
inline bool repair_covariance(Matrix6d& P) {
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(P);
  if (es.eigenvalues().minCoeff() >= 0.0) return false;
  const Vector6d clamped = es.eigenvalues().cwiseMax(0.0);
  P = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  P = 0.5 * (P + P.transpose()).eval();
  ++covariance_repairs();
  std::clog << "smat: warning: covariance lost positive semidefiniteness; clamped eigenvalues\n";
  return true;
}

}  // namespace detail

/// Number of covariance repairs performed on this thread (diagnostics).
inline std::size_t covariance_repair_count() { return detail::covariance_repairs(); }

inline KalmanState ekf_predict(const KalmanState& s, double dt, const EkfNoise& noise) {
  if (!(dt > 0.0)) throw ValidationError("ekf_predict needs dt > 0");
  Matrix6d F = Matrix6d::Identity();
  F.topRightCorner<3, 3>().diagonal().setConstant(dt);
  const double q = noise.accel_sigma * noise.accel_sigma;
  Matrix6d Q = Matrix6d::Zero();
  Q.topLeftCorner<3, 3>().diagonal().setConstant(q * dt * dt * dt * dt / 4.0);
  Q.topRightCorner<3, 3>().diagonal().setConstant(q * dt * dt * dt / 2.0);
  Q.bottomLeftCorner<3, 3>().diagonal().setConstant(q * dt * dt * dt / 2.0);
  Q.bottomRightCorner<3, 3>().diagonal().setConstant(q * dt * dt);

  KalmanState out;
  out.x = F * s.x;
  out.P = F * s.P * F.transpose() + Q;
  detail::repair_covariance(out.P);
  return out;
}

/// Position-only measurement update (Joseph form). A singular innovation
/// covariance (zero noise, collapsed prior) falls back to the pseudo-inverse.
inline KalmanState ekf_update(const KalmanState& s, const Point3& z, const EkfNoise& noise) {
  Eigen::Matrix<double, 3, 6> H = Eigen::Matrix<double, 3, 6>::Zero();
  H.leftCols<3>().setIdentity();
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() * (noise.meas_sigma * noise.meas_sigma);
  const Eigen::Matrix3d S = H * s.P * H.transpose() + R;
  Eigen::Matrix3d S_inv;
  Eigen::LLT<Eigen::Matrix3d> llt(S);
  if (llt.info() == Eigen::Success && S.diagonal().minCoeff() > 1e-300) {
    S_inv = llt.solve(Eigen::Matrix3d::Identity());
  } else {
    S_inv = S.completeOrthogonalDecomposition().pseudoInverse();
  }
  const Eigen::Matrix<double, 6, 3> K = s.P * H.transpose() * S_inv;
  KalmanState out;
  out.x = s.x + K * (z - H * s.x);
  const Matrix6d I_KH = Matrix6d::Identity() - K * H;
  out.P = I_KH * s.P * I_KH.transpose() + K * R * K.transpose();
  detail::repair_covariance(out.P);
  return out;
}

struct HistoryRecord {
  bool associated = false;
  Point3 centroid = Point3::Zero();
  double volume = 0.0;
};

struct Tracklet {
  std::uint64_t id = 0;
  KalmanState state;
  BoundingBox box;
  std::deque<HistoryRecord> history;  // oldest first, at most window_frames entries
  int consecutive_misses = 0;
  bool stable = false;
  double last_timestamp = 0.0;

  void push_history(const HistoryRecord& r, std::size_t window_frames) {
    history.push_back(r);
    while (history.size() > window_frames) history.pop_front();
  }
};

/// Thresholds of the stable-tracking test.
struct StabilityParams {
  double t_val = 1.0;     // s
  double rho_min = 0.7;
  double v_min = 1.0;     // m/s
  double dv_min = 3.0;    // m^3, upper bound on volume change
  double scan_rate = 10.0;

  std::size_t window_frames() const { return static_cast<std::size_t>(std::ceil(t_val * scan_rate - 1e-9)); }
};

struct StabilityStats {
  double rho = 0.0;
  double displacement = 0.0;
  double speed = 0.0;
  double volume_change = 0.0;
  bool window_full = false;
};

/// Association rate, observed displacement (first to last associated
/// centroid), average speed d / (t_val * rho) and volume spread over the window.
inline StabilityStats stability_stats(const Tracklet& t, const StabilityParams& p) {
  StabilityStats s;
  const std::size_t n = p.window_frames();
  s.window_full = t.history.size() >= n && n > 0;
  if (t.history.empty()) return s;
  std::size_t assoc = 0;
  const HistoryRecord* first = nullptr;
  const HistoryRecord* last = nullptr;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (const auto& r : t.history) {
    if (!r.associated) continue;
    ++assoc;
    if (!first) first = &r;
    last = &r;
    vmin = std::min(vmin, r.volume);
    vmax = std::max(vmax, r.volume);
  }
  s.rho = static_cast<double>(assoc) / static_cast<double>(t.history.size());
  if (assoc > 0) {
    s.displacement = (last->centroid - first->centroid).norm();
    s.volume_change = vmax - vmin;
    s.speed = s.displacement / (p.t_val * s.rho);
  }
  return s;
}

/// rho > rho_min and v > v_min and dV < dv_min over a full window.
inline bool stable_check(const Tracklet& t, const StabilityParams& p) {
  const auto s = stability_stats(t, p);
  if (!s.window_full) return false;
  return s.rho > p.rho_min && s.speed > p.v_min && s.volume_change < p.dv_min;
}

struct Hypothesis {
  BoundingBox box;
  Point3 centroid = Point3::Zero();
  std::vector<std::size_t> members;  // indices into the frame's world point array
};

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (hypothesis index, tracklet index)
  std::vector<std::size_t> unmatched_hypotheses;
  std::vector<std::size_t> unmatched_tracklets;
};

/**
 * Greedy nearest-neighbour matching on L2 distance between hypothesis
 * centroids and (already predicted) tracklet positions. Pairs beyond the
 * gate are never considered. Ties resolve by tracklet id, then hypothesis
 * index.
 */
inline Association associate(std::span<const Hypothesis> hyps, std::span<const Tracklet> tracks, double gate) {
  struct Candidate {
    double dist;
    std::uint64_t track_id;
    std::size_t h;
    std::size_t t;
  };
  std::vector<Candidate> cands;
  for (std::size_t h = 0; h < hyps.size(); ++h)
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      const double d = (hyps[h].centroid - tracks[t].state.position()).norm();
      if (d <= gate) cands.push_back({d, tracks[t].id, h, t});
    }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.h < b.h;
  });

  Association out;
  std::vector<char> h_used(hyps.size(), 0);
  std::vector<char> t_used(tracks.size(), 0);
  for (const auto& c : cands) {
    if (h_used[c.h] || t_used[c.t]) continue;
    h_used[c.h] = t_used[c.t] = 1;
    out.matches.emplace_back(c.h, c.t);
  }
  for (std::size_t h = 0; h < hyps.size(); ++h)
    if (!h_used[h]) out.unmatched_hypotheses.push_back(h);
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (!t_used[t]) out.unmatched_tracklets.push_back(t);
  return out;
}

}  // namespace smat

#endif  // SMAT_TRACKING_HPP
