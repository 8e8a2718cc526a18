#include "dirreg/correspond.hpp"

#include <algorithm>
#include <limits>

namespace dirreg {

namespace {

Eigen::MatrixXd min_max_normalize(Eigen::MatrixXd m) {
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  if (hi > lo) m = (m.array() - lo) / (hi - lo);
  else m.setZero();
  return m;
}

// Sorted distances to the k nearest neighbours, scale-normalized by their mean.
Eigen::MatrixXd knn_descriptors(const Eigen::MatrixXd& pts, int k) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd desc(n, k);
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dist[j] = (pts.row(i) - pts.row(j)).norm();
    dist[i] = std::numeric_limits<double>::infinity();
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double mean = 0.0;
    for (int j = 0; j < k; ++j) mean += dist[j];
    mean /= k;
    if (mean == 0.0) mean = 1.0;
    for (int j = 0; j < k; ++j) desc(i, j) = dist[j] / mean;
  }
  return desc;
}

}  // namespace

Eigen::MatrixXd global_distance(const Eigen::MatrixXd& model, const Eigen::MatrixXd& target) {
  if (model.rows() == 0 || target.rows() == 0) throw EmptyShape("empty input to global_distance");
  if (model.cols() != target.cols()) throw DimensionError("dimension mismatch");
  Eigen::MatrixXd d(model.rows(), target.rows());
  for (int i = 0; i < model.rows(); ++i)
    for (int j = 0; j < target.rows(); ++j)
      d(i, j) = (model.row(i) - target.row(j)).squaredNorm();
  return min_max_normalize(std::move(d));
}

Eigen::MatrixXd local_distance(const Eigen::MatrixXd& model, const Eigen::MatrixXd& target, int k) {
  if (k < 1 || k >= std::min(model.rows(), target.rows()))
    throw InsufficientPoints("local_distance needs 1 <= k < min(n1, n2)");
  const Eigen::MatrixXd d1 = knn_descriptors(model, k);
  const Eigen::MatrixXd d2 = knn_descriptors(target, k);
  Eigen::MatrixXd d(model.rows(), target.rows());
  for (int i = 0; i < model.rows(); ++i)
    for (int j = 0; j < target.rows(); ++j)
      d(i, j) = (d1.row(i) - d2.row(j)).squaredNorm();
  return min_max_normalize(std::move(d));
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) {
    // match the smaller side fully: solve the transpose and invert
    const std::vector<int> col_to_row = solve_assignment(cost.transpose());
    std::vector<int> row_to_col(n, -1);
    for (int j = 0; j < m; ++j)
      if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
    return row_to_col;
  }

  // Hungarian with potentials, O(n^2 m), 1-based scratch arrays.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
        if (minv[j] < delta) { delta = minv[j]; j1 = j; }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

CorrespondenceSet estimate_correspondences(const Eigen::MatrixXd& model,
                                           const Eigen::MatrixXd& target,
                                           double alpha, int k) {
  if (alpha < 0.0 || alpha > 1.0)
    throw InvalidFraction("correspondence mixing weight must be in [0, 1]");
  const Eigen::MatrixXd g = global_distance(model, target);
  const Eigen::MatrixXd l = local_distance(model, target, k);
  const Eigen::MatrixXd c = alpha * l + (1.0 - alpha) * g;
  const std::vector<int> assign = solve_assignment(c);

  CorrespondenceSet out;
  out.alpha = alpha;
  for (int i = 0; i < static_cast<int>(assign.size()); ++i)
    if (assign[i] >= 0) out.pairs.emplace_back(i, assign[i]);
  return out;
}

}  // namespace dirreg
