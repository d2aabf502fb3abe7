#ifndef SMAT_ASSIGNMENT_HPP
#define SMAT_ASSIGNMENT_HPP

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace smat {

/**
 * Maximum-weight assignment on a dense rows x cols weight matrix
 * (Hungarian method with potentials, O(n^2 m)). Returns, for each row, the
 * assigned column or -1. Every row gets a column when rows <= cols and vice
 * versa; callers drop pairs whose weight means "no match".
 */
inline std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weight) {
  const bool transposed = weight.rows() > weight.cols();
  const Eigen::MatrixXd w = transposed ? Eigen::MatrixXd(weight.transpose()) : weight;
  const int n = static_cast<int>(w.rows());
  const int m = static_cast<int>(w.cols());
  std::vector<int> row_to_col(static_cast<std::size_t>(weight.rows()), -1);
  if (n == 0 || m == 0) return row_to_col;

  const double top = w.maxCoeff();
  auto cost = [&](int i, int j) { return top - w(i, j); };
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based arrays; p[j] = row matched to column j, 0 = none.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) row_to_col[static_cast<std::size_t>(j - 1)] = p[j] - 1;
    else row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return row_to_col;
}

}  // namespace smat

#endif  // SMAT_ASSIGNMENT_HPP
