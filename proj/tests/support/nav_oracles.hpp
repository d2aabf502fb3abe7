// Navigation references: random score trees with their closed-form fixed
// point, and a dead-end corridor built from terrain points.
#pragma once

#include "smat/nav_select.hpp"

#include <cmath>
#include <deque>
#include <random>

namespace oracle {

struct ScoreTree {
  smat::NavGraph graph;
  std::vector<double> initial;  // per viewpoint, 0 without a frontier
};

/// Random tree of up to `max_nodes` viewpoints; about half carry one or two
/// frontier nodes with random scores.
inline ScoreTree random_score_tree(std::mt19937_64& rng, int max_nodes = 50) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_nodes));
  ScoreTree t;
  t.graph.discount = 0.3 + 0.65 * u(rng);
  t.initial.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    smat::ViewpointNode v;
    v.position = {10.0 * u(rng), 10.0 * u(rng)};
    t.graph.viewpoints.push_back(v);
    if (i > 0) {
      const auto parent = static_cast<std::size_t>(rng() % static_cast<unsigned>(i));
      t.graph.viewpoints[static_cast<std::size_t>(i)].neighbors.push_back(parent);
      t.graph.viewpoints[parent].neighbors.push_back(static_cast<std::size_t>(i));
    }
    const int nf = u(rng) < 0.5 ? 0 : 1 + static_cast<int>(rng() % 2);
    for (int k = 0; k < nf; ++k) {
      smat::FrontierNode f;
      f.viewpoint = static_cast<std::size_t>(i);
      f.score = u(rng);
      f.position = v.position + smat::Point2(1.0, 0.0);
      t.graph.frontiers.push_back(f);
      t.initial[static_cast<std::size_t>(i)] = std::max(t.initial[static_cast<std::size_t>(i)], f.score);
    }
  }
  return t;
}

/// s_i = max_j gamma^hops(i, j) * s_j, from breadth-first hop counts.
inline std::vector<double> closed_form_scores(const ScoreTree& t) {
  const auto& vs = t.graph.viewpoints;
  std::vector<double> out(vs.size(), 0.0);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    std::vector<int> hops(vs.size(), -1);
    std::deque<std::size_t> q{i};
    hops[i] = 0;
    while (!q.empty()) {
      const auto v = q.front();
      q.pop_front();
      for (auto n : vs[v].neighbors)
        if (hops[n] < 0) {
          hops[n] = hops[v] + 1;
          q.push_back(n);
        }
    }
    for (std::size_t j = 0; j < vs.size(); ++j)
      if (hops[j] >= 0) out[i] = std::max(out[i], std::pow(t.graph.discount, hops[j]) * t.initial[j]);
  }
  return out;
}

/// A 20 m corridor closed at both ends with one side branch near the start
/// whose far end is unexplored. Ground at z = 0, walls 2 m tall.
inline std::vector<smat::Point3> dead_end_corridor() {
  std::vector<smat::Point3> pts;
  auto wall_x = [&](double x, double y0, double y1) {
    for (double y = y0; y < y1; y += 0.1)
      for (double z = 0.0; z <= 2.0; z += 0.2) pts.emplace_back(x, y, z);
  };
  auto wall_y = [&](double y, double x0, double x1, double gap0, double gap1) {
    for (double x = x0; x < x1; x += 0.1) {
      if (x >= gap0 && x < gap1) continue;
      for (double z = 0.0; z <= 2.0; z += 0.2) pts.emplace_back(x, y, z);
    }
  };
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 19; ++j) pts.emplace_back(0.05 + 0.1 * i, -0.95 + 0.1 * j, 0.0);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) pts.emplace_back(3.05 + 0.1 * i, 1.0 + 0.1 * j, 0.0);
  wall_x(-0.25, -1.5, 1.5);
  wall_x(20.25, -1.5, 1.5);
  wall_y(-1.25, -0.5, 20.5, 0.0, 0.0);
  wall_y(1.25, -0.5, 20.5, 2.95, 5.0);
  wall_x(2.75, 1.0, 3.0);
  wall_x(5.25, 1.0, 3.0);
  return pts;
}

struct DeadEndRun {
  smat::NavGraph graph;
  std::vector<smat::FrontierCluster> clusters;
  smat::Point2 robot;
  std::optional<smat::Selection> selection;
};

/// Drives to the closed end with the goal straight ahead, then selects.
inline DeadEndRun run_dead_end() {
  DeadEndRun r;
  const auto grid = smat::terrain_cost(dead_end_corridor(), 0.5);
  r.clusters = smat::extract_frontiers(grid);
  std::vector<smat::Point2> centroids;
  for (const auto& c : r.clusters) centroids.push_back(c.centroid);
  const smat::Point2 goal_dir(1.0, 0.0);
  for (int k = 1; k <= 39; ++k) {
    r.robot = {0.5 * k, 0.0};
    smat::extend_graph(r.graph, r.robot, centroids, goal_dir);
  }
  smat::aggregate_scores(r.graph);
  r.selection = smat::select_best(r.graph, r.robot);
  return r;
}

}  // namespace oracle
