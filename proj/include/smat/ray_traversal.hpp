#ifndef SMAT_RAY_TRAVERSAL_HPP
#define SMAT_RAY_TRAVERSAL_HPP

#include "smat/geometry.hpp"

#include <limits>

namespace smat {

/**
 * Amanatides-Woo grid walk from `from` to `to` on the floor-convention
 * lattice. `visit(key)` is called for every cell the segment passes
 * through, in order, starting with the cell of `from` and ending with the
 * cell of `to`.
 */
template <class Visit>
void traverse_voxels(const Point3& from, const Point3& to, double resolution, Visit&& visit) {
  check_resolution(resolution);
  VoxelKey cur = voxel_key(from, resolution);
  const VoxelKey last = voxel_key(to, resolution);
  const Point3 d = to - from;

  int step[3];
  double t_max[3];
  double t_delta[3];
  const int cur_idx[3] = {cur.ix, cur.iy, cur.iz};
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((cur_idx[a] + 1) * resolution - from[a]) / d[a];
      t_delta[a] = resolution / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (cur_idx[a] * resolution - from[a]) / d[a];
      t_delta[a] = -resolution / d[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  const long long max_steps = std::llabs(static_cast<long long>(last.ix) - cur.ix) +
                              std::llabs(static_cast<long long>(last.iy) - cur.iy) +
                              std::llabs(static_cast<long long>(last.iz) - cur.iz);
  visit(cur);
  for (long long s = 0; s < max_steps; ++s) {
    int a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    if (a == 0) cur.ix += step[0];
    else if (a == 1) cur.iy += step[1];
    else cur.iz += step[2];
    t_max[a] += t_delta[a];
    visit(cur);
    if (cur == last) break;
  }
}

}  // namespace smat

#endif  // SMAT_RAY_TRAVERSAL_HPP
