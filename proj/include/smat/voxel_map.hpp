#ifndef SMAT_VOXEL_MAP_HPP
#define SMAT_VOXEL_MAP_HPP

#include "smat/geometry.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace smat {

/// Sparse set of occupied voxel keys at one resolution.
class VoxelMap {
 public:
  explicit VoxelMap(double resolution = 0.2) : resolution_(resolution) { check_resolution(resolution); }

  double resolution() const { return resolution_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  bool insert(const VoxelKey& k) { return keys_.insert(k).second; }
  void insert_point(const Point3& p) { keys_.insert(voxel_key(p, resolution_)); }
  bool contains(const VoxelKey& k) const { return keys_.contains(k); }
  bool erase(const VoxelKey& k) { return keys_.erase(k) > 0; }

  const std::unordered_set<VoxelKey, VoxelKeyHash>& keys() const { return keys_; }

  std::vector<VoxelKey> sorted_keys() const {
    std::vector<VoxelKey> out(keys_.begin(), keys_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Point3> centers() const {
    std::vector<Point3> out;
    out.reserve(keys_.size());
    for (const auto& k : sorted_keys()) out.push_back(voxel_center(k, resolution_));
    return out;
  }

  std::size_t intersection_size(const VoxelMap& other) const {
    const auto& small = size() <= other.size() ? keys_ : other.keys_;
    const auto& large = size() <= other.size() ? other.keys_ : keys_;
    std::size_t n = 0;
    for (const auto& k : small) n += large.contains(k);
    return n;
  }

  friend bool operator==(const VoxelMap& a, const VoxelMap& b) {
    return a.resolution_ == b.resolution_ && a.keys_ == b.keys_;
  }

 private:
  double resolution_;
  std::unordered_set<VoxelKey, VoxelKeyHash> keys_;
};

inline VoxelMap voxelize(std::span<const Point3> points, double resolution) {
  VoxelMap map(resolution);
  for (const auto& p : points) map.insert_point(p);
  return map;
}

/// One point per occupied voxel: the mean of the points inside it. Output
/// order follows the first point seen in each voxel.
inline std::vector<Point3> voxel_downsample(std::span<const Point3> points, double resolution) {
  check_resolution(resolution);
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slot;
  std::vector<Point3> sums;
  std::vector<std::size_t> counts;
  for (const auto& p : points) {
    auto [it, inserted] = slot.try_emplace(voxel_key(p, resolution), sums.size());
    if (inserted) {
      sums.push_back(p);
      counts.push_back(1);
    } else {
      sums[it->second] += p;
      ++counts[it->second];
    }
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= static_cast<double>(counts[i]);
  return sums;
}

}  // namespace smat

#endif  // SMAT_VOXEL_MAP_HPP
