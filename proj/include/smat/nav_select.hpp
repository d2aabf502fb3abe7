#ifndef SMAT_NAV_SELECT_HPP
#define SMAT_NAV_SELECT_HPP

#include "smat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace smat {

using Point2 = Eigen::Vector2d;

struct TerrainCell {
  bool known = false;
  std::vector<double> heights;
  std::vector<double> costs;  // height - reference, per point
  double reference = 0.0;
  double max_cost = 0.0;
  bool traversable = false;
};

/// Dense 2D grid over cell indices [ix0, ix0 + nx) x [iy0, iy0 + ny).
class TerrainGrid {
 public:
  TerrainGrid(double cell_size, int ix0, int iy0, int nx, int ny, double obstacle_threshold = 0.3)
      : cell_size_(cell_size), ix0_(ix0), iy0_(iy0), nx_(nx), ny_(ny), obstacle_(obstacle_threshold),
        cells_(static_cast<std::size_t>(std::max(nx, 0)) * static_cast<std::size_t>(std::max(ny, 0))) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ConfigError("cell_size must be positive");
    if (nx < 0 || ny < 0) throw ConfigError("grid dimensions must be non-negative");
  }

  double cell_size() const { return cell_size_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int ix0() const { return ix0_; }
  int iy0() const { return iy0_; }
  double obstacle_threshold() const { return obstacle_; }

  bool inside(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
  TerrainCell& cell(int i, int j) { return cells_[index(i, j)]; }
  const TerrainCell& cell(int i, int j) const { return cells_[index(i, j)]; }

  /// Outside the grid counts as unknown.
  bool known(int i, int j) const { return inside(i, j) && cell(i, j).known; }
  bool traversable(int i, int j) const { return known(i, j) && cell(i, j).traversable; }

  Point2 center(int i, int j) const {
    return {(ix0_ + i + 0.5) * cell_size_, (iy0_ + j + 0.5) * cell_size_};
  }

  /// Marks a cell observed without points (e.g. seen-through free space).
  void mark_known_free(int i, int j) {
    auto& c = cell(i, j);
    c.known = true;
    if (c.heights.empty()) c.traversable = true;
  }

  /// Adds a point's height to a cell and refreshes its statistics.
  void add_height(int i, int j, double z) {
    auto& c = cell(i, j);
    c.known = true;
    c.heights.push_back(z);
  }

  /// Reference = nearest-rank 25th percentile; cost = height - reference.
  void finalize_cell(int i, int j) {
    auto& c = cell(i, j);
    if (c.heights.empty()) return;
    std::vector<double> sorted = c.heights;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(sorted.size())));
    c.reference = sorted[std::max<std::size_t>(rank, 1) - 1];
    c.costs.clear();
    c.max_cost = -std::numeric_limits<double>::infinity();
    for (double z : c.heights) {
      c.costs.push_back(z - c.reference);
      c.max_cost = std::max(c.max_cost, z - c.reference);
    }
    c.traversable = c.max_cost < obstacle_;
  }

 private:
  std::size_t index(int i, int j) const {
    if (!inside(i, j)) throw ValidationError("terrain cell (" + std::to_string(i) + ", " + std::to_string(j) + ") outside grid");
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }

  double cell_size_;
  int ix0_, iy0_, nx_, ny_;
  double obstacle_;
  std::vector<TerrainCell> cells_;
};

/// Bins points by (x, y) into a grid spanning their extent plus one unknown
/// cell of margin on every side.
inline TerrainGrid terrain_cost(std::span<const Point3> points, double cell_size, double obstacle_threshold = 0.3) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ConfigError("cell_size must be positive");
  if (points.empty()) return TerrainGrid(cell_size, 0, 0, 0, 0, obstacle_threshold);
  int lo_x = std::numeric_limits<int>::max(), lo_y = lo_x;
  int hi_x = std::numeric_limits<int>::min(), hi_y = hi_x;
  std::vector<std::pair<int, int>> idx;
  idx.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!is_finite(points[k])) throw ValidationError("terrain_cost: non-finite point at index " + std::to_string(k));
    const int i = static_cast<int>(std::floor(points[k].x() / cell_size));
    const int j = static_cast<int>(std::floor(points[k].y() / cell_size));
    idx.emplace_back(i, j);
    lo_x = std::min(lo_x, i);
    lo_y = std::min(lo_y, j);
    hi_x = std::max(hi_x, i);
    hi_y = std::max(hi_y, j);
  }
  TerrainGrid g(cell_size, lo_x - 1, lo_y - 1, hi_x - lo_x + 3, hi_y - lo_y + 3, obstacle_threshold);
  for (std::size_t k = 0; k < points.size(); ++k)
    g.add_height(idx[k].first - g.ix0(), idx[k].second - g.iy0(), points[k].z());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) g.finalize_cell(i, j);
  return g;
}

struct FrontierCluster {
  std::vector<std::pair<int, int>> cells;  // grid indices, row-major discovery order
  Point2 centroid = Point2::Zero();
};

inline bool is_frontier_cell(const TerrainGrid& g, int i, int j) {
  if (!g.traversable(i, j)) return false;
  return !g.known(i - 1, j) || !g.known(i + 1, j) || !g.known(i, j - 1) || !g.known(i, j + 1);
}

/// Known traversable cells 4-adjacent to unknown space, clustered by
/// 8-adjacency. Clusters are ordered by their first cell in row-major order.
inline std::vector<FrontierCluster> extract_frontiers(const TerrainGrid& g) {
  std::vector<char> frontier(static_cast<std::size_t>(g.nx()) * static_cast<std::size_t>(g.ny()), 0);
  auto at = [&](int i, int j) -> char& { return frontier[static_cast<std::size_t>(j) * g.nx() + i]; };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) at(i, j) = is_frontier_cell(g, i, j);

  std::vector<FrontierCluster> out;
  std::vector<char> seen(frontier.size(), 0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (!at(i, j) || seen[static_cast<std::size_t>(j) * g.nx() + i]) continue;
      FrontierCluster c;
      std::deque<std::pair<int, int>> q{{i, j}};
      seen[static_cast<std::size_t>(j) * g.nx() + i] = 1;
      while (!q.empty()) {
        const auto [ci, cj] = q.front();
        q.pop_front();
        c.cells.emplace_back(ci, cj);
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ni = ci + di, nj = cj + dj;
            if ((di == 0 && dj == 0) || !g.inside(ni, nj)) continue;
            auto& s = seen[static_cast<std::size_t>(nj) * g.nx() + ni];
            if (s || !at(ni, nj)) continue;
            s = 1;
            q.emplace_back(ni, nj);
          }
      }
      std::sort(c.cells.begin(), c.cells.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
      });
      for (const auto& [ci, cj] : c.cells) c.centroid += g.center(ci, cj);
      c.centroid /= static_cast<double>(c.cells.size());
      out.push_back(std::move(c));
    }
  return out;
}

/// (1 + dot(normalize(frontier - viewpoint), reference)) / 2.
inline double score_frontier(const Point2& viewpoint, const Point2& frontier, const Point2& reference_direction) {
  const double rn = reference_direction.norm();
  if (!(rn > 0.0) || !std::isfinite(rn)) throw ConfigError("reference direction must be a non-zero finite vector");
  const Point2 d = frontier - viewpoint;
  const double dn = d.norm();
  if (!(dn > 0.0)) throw ValidationError("score_frontier: frontier coincides with the viewpoint");
  const double dot = (d / dn).dot(reference_direction / rn);
  return std::clamp((1.0 + dot) / 2.0, 0.0, 1.0);
}

struct ViewpointNode {
  Point2 position = Point2::Zero();
  double score = 0.0;
  std::vector<std::size_t> neighbors;
};

struct FrontierNode {
  Point2 position = Point2::Zero();
  double score = 0.0;
  std::size_t viewpoint = 0;
};

struct NavGraph {
  std::vector<ViewpointNode> viewpoints;
  std::vector<FrontierNode> frontiers;
  double spacing = 2.0;   // m between sampled viewpoints
  double discount = 0.9;  // gamma_nav, (0, 1)

  void validate() const {
    if (!(spacing > 0.0)) throw ConfigError("viewpoint spacing must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("navigation discount must lie in (0, 1)");
  }
};

namespace detail {

inline std::size_t nearest_viewpoint(const NavGraph& g, const Point2& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.viewpoints.size(); ++i) {
    const double d = (g.viewpoints[i].position - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/**
 * Samples a viewpoint at the robot position when it is >= spacing from the
 * last sampled one (or the graph is empty) and edges it to the nearest
 * existing viewpoint. Frontier nodes are rebuilt, each edged to its nearest
 * viewpoint and scored against `reference_direction`.
 */
inline void extend_graph(NavGraph& g, const Point2& robot, std::span<const Point2> frontiers,
                         const Point2& reference_direction) {
  g.validate();
  if (!is_finite(Eigen::Vector3d(robot.x(), robot.y(), 0.0))) throw ValidationError("extend_graph: non-finite robot position");
  constexpr double kTolerance = 1e-9;
  if (g.viewpoints.empty() || (robot - g.viewpoints.back().position).norm() + kTolerance >= g.spacing) {
    ViewpointNode v;
    v.position = robot;
    if (!g.viewpoints.empty()) {
      const std::size_t near = detail::nearest_viewpoint(g, robot);
      v.neighbors.push_back(near);
      g.viewpoints[near].neighbors.push_back(g.viewpoints.size());
    }
    g.viewpoints.push_back(std::move(v));
  }
  g.frontiers.clear();
  for (const auto& f : frontiers) {
    FrontierNode n;
    n.position = f;
    n.viewpoint = detail::nearest_viewpoint(g, f);
    n.score = score_frontier(g.viewpoints[n.viewpoint].position, f, reference_direction);
    g.frontiers.push_back(n);
  }
}

struct AggregationResult {
  std::size_t iterations = 0;  // sweeps, including the final one with no change
};

/// Initializes each viewpoint with its best frontier score (0 without
/// frontiers) and applies s_i <- max(s_i, discount * max_j s_j) in
/// synchronous sweeps until nothing changes.
inline AggregationResult aggregate_scores(NavGraph& g) {
  g.validate();
  for (auto& v : g.viewpoints) v.score = 0.0;
  for (const auto& f : g.frontiers) {
    auto& v = g.viewpoints.at(f.viewpoint);
    v.score = std::max(v.score, f.score);
  }
  AggregationResult r;
  if (g.viewpoints.empty()) return r;
  std::vector<double> next(g.viewpoints.size());
  for (;;) {
    ++r.iterations;
    bool changed = false;
    for (std::size_t i = 0; i < g.viewpoints.size(); ++i) {
      double s = g.viewpoints[i].score;
      for (auto j : g.viewpoints[i].neighbors) s = std::max(s, g.discount * g.viewpoints[j].score);
      next[i] = s;
      changed |= s != g.viewpoints[i].score;
    }
    for (std::size_t i = 0; i < next.size(); ++i) g.viewpoints[i].score = next[i];
    if (!changed) break;
  }
  return r;
}

struct Selection {
  std::size_t viewpoint = 0;
  std::size_t frontier = 0;
};

/**
 * Among viewpoints within 1e-9 of the best score, the one nearest the robot;
 * its best frontier neighbor. When it has none, the best frontier of the
 * closest (in hops) viewpoint that has one. Empty when no frontier exists.
 */
inline std::optional<Selection> select_best(const NavGraph& g, const Point2& robot) {
  if (g.frontiers.empty() || g.viewpoints.empty()) return std::nullopt;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& v : g.viewpoints) top = std::max(top, v.score);
  std::size_t best = g.viewpoints.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.viewpoints.size(); ++i) {
    if (g.viewpoints[i].score < top - 1e-9) continue;
    const double d = (g.viewpoints[i].position - robot).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }

  auto best_frontier_of = [&](std::size_t v) -> std::optional<std::size_t> {
    std::optional<std::size_t> f;
    for (std::size_t k = 0; k < g.frontiers.size(); ++k)
      if (g.frontiers[k].viewpoint == v && (!f || g.frontiers[k].score > g.frontiers[*f].score)) f = k;
    return f;
  };

  // Breadth-first from the best viewpoint; at equal hops prefer the higher
  // viewpoint score, then the lower index.
  std::vector<int> hops(g.viewpoints.size(), -1);
  std::deque<std::size_t> q{best};
  hops[best] = 0;
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop_front();
    for (auto n : g.viewpoints[v].neighbors)
      if (hops[n] < 0) {
        hops[n] = hops[v] + 1;
        q.push_back(n);
      }
  }
  std::optional<std::size_t> chosen_vp;
  for (std::size_t v = 0; v < g.viewpoints.size(); ++v) {
    if (hops[v] < 0 || !best_frontier_of(v)) continue;
    if (!chosen_vp || hops[v] < hops[*chosen_vp] ||
        (hops[v] == hops[*chosen_vp] && g.viewpoints[v].score > g.viewpoints[*chosen_vp].score))
      chosen_vp = v;
  }
  if (!chosen_vp) return std::nullopt;
  return Selection{best, *best_frontier_of(*chosen_vp)};
}

}  // namespace smat

#endif  // SMAT_NAV_SELECT_HPP
