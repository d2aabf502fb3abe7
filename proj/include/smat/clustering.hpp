#ifndef SMAT_CLUSTERING_HPP
#define SMAT_CLUSTERING_HPP

#include "smat/box.hpp"

#include <numeric>
#include <unordered_map>

namespace smat {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

struct Cluster {
  std::vector<std::size_t> members;  // indices into the clustered point span, ascending
  BoundingBox box;
  Point3 centroid = Point3::Zero();
};

struct ClusterResult {
  std::vector<Cluster> clusters;          // ordered by smallest member index
  std::vector<std::size_t> rejected;      // members of clusters below min_points, ascending
};

/**
 * Single-linkage Euclidean clustering: points closer than or equal to
 * `link_distance` are connected. Neighbour search goes through a voxel
 * hash with cell size `link_distance`, so only the 27 surrounding cells
 * are visited.
 */
inline ClusterResult euclidean_cluster(std::span<const Point3> points, double link_distance, std::size_t min_points) {
  if (!(link_distance > 0.0)) throw ConfigError("cluster distance must be positive");
  ClusterResult result;
  const std::size_t n = points.size();
  if (n == 0) return result;

  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> grid;
  grid.reserve(n);
  std::vector<VoxelKey> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = voxel_key(points[i], link_distance);
    grid[keys[i]].push_back(i);
  }

  UnionFind uf(n);
  const double d2 = link_distance * link_distance;
  for (std::size_t i = 0; i < n; ++i) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(keys[i] + VoxelKey{dx, dy, dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            if ((points[i] - points[j]).squaredNorm() <= d2) uf.unite(i, j);
          }
        }
  }

  std::unordered_map<std::size_t, std::size_t> root_to_cluster;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = uf.find(i);
    auto [it, inserted] = root_to_cluster.try_emplace(root, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  for (auto& g : groups) {
    if (g.size() < min_points) {
      result.rejected.insert(result.rejected.end(), g.begin(), g.end());
      continue;
    }
    Cluster c;
    c.box = BoundingBox{points[g.front()], points[g.front()]};
    for (auto i : g) {
      c.box.expand(points[i]);
      c.centroid += points[i];
    }
    c.centroid /= static_cast<double>(g.size());
    c.members = std::move(g);
    result.clusters.push_back(std::move(c));
  }
  std::sort(result.rejected.begin(), result.rejected.end());
  return result;
}

}  // namespace smat

#endif  // SMAT_CLUSTERING_HPP
