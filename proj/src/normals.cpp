#include "dirreg/normals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace dirreg {

namespace {

// Thomas solve for a tridiagonal system (a = sub, b = diag, c = super).
Eigen::VectorXd solve_tridiagonal(Eigen::VectorXd a, Eigen::VectorXd b,
                                  Eigen::VectorXd c, Eigen::VectorXd rhs) {
  const int n = static_cast<int>(b.size());
  for (int i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  Eigen::VectorXd x(n);
  x[n - 1] = rhs[n - 1] / b[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = (rhs[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

// Cyclic tridiagonal via Sherman-Morrison. alpha = corner a[0] (row 0, col n-1),
// beta = corner c[n-1] (row n-1, col 0).
Eigen::VectorXd solve_cyclic_tridiagonal(const Eigen::VectorXd& a,
                                         Eigen::VectorXd b,
                                         const Eigen::VectorXd& c,
                                         const Eigen::VectorXd& rhs,
                                         double alpha, double beta) {
  const int n = static_cast<int>(b.size());
  const double gamma = -b[0];
  Eigen::VectorXd bb = b;
  bb[0] -= gamma;
  bb[n - 1] -= alpha * beta / gamma;
  Eigen::VectorXd x = solve_tridiagonal(a, bb, c, rhs);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  u[0] = gamma;
  u[n - 1] = beta;
  Eigen::VectorXd z = solve_tridiagonal(a, bb, c, u);
  const double factor = (x[0] + alpha * x[n - 1] / gamma) /
                        (1.0 + z[0] + alpha * z[n - 1] / gamma);
  return x - factor * z;
}

// Second derivatives of the interpolating cubic spline through (t_i, y_i).
Eigen::VectorXd spline_second_derivatives(const Eigen::VectorXd& t,
                                          const Eigen::VectorXd& y, bool closed,
                                          double closing_h) {
  const int n = static_cast<int>(t.size());
  if (!closed) {
    // natural spline: M_0 = M_{n-1} = 0
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    const int interior = n - 2;
    if (interior < 1) return m;
    Eigen::VectorXd a(interior), b(interior), c(interior), rhs(interior);
    for (int i = 1; i <= interior; ++i) {
      const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
      a[i - 1] = h0;
      b[i - 1] = 2.0 * (h0 + h1);
      c[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    m.segment(1, interior) = solve_tridiagonal(a, b, c, rhs);
    return m;
  }

  // periodic: indices wrap, the closing segment has length closing_h
  auto hseg = [&](int i) {
    return i == n - 1 ? closing_h : t[i + 1] - t[i];
  };
  auto yval = [&](int i) { return y[(i % n + n) % n]; };
  Eigen::VectorXd a(n), b(n), c(n), rhs(n);
  for (int i = 0; i < n; ++i) {
    const double hp = hseg((i - 1 + n) % n), hi = hseg(i);
    a[i] = hp;
    b[i] = 2.0 * (hp + hi);
    c[i] = hi;
    rhs[i] = 6.0 * ((yval(i + 1) - yval(i)) / hi - (yval(i) - yval(i - 1)) / hp);
  }
  return solve_cyclic_tridiagonal(a, b, c, rhs, a[0], c[n - 1]);
}

std::vector<std::vector<int>> knn_indices(const Eigen::MatrixXd& pts, int k) {
  const int n = static_cast<int>(pts.rows());
  std::vector<std::vector<int>> nbrs(n);
  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      dist[j] = {(pts.row(i) - pts.row(j)).squaredNorm(), j};
    dist[i].first = std::numeric_limits<double>::infinity();  // exclude self
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    nbrs[i].reserve(k);
    for (int j = 0; j < k; ++j) nbrs[i].push_back(dist[j].second);
  }
  return nbrs;
}

}  // namespace

Eigen::MatrixXd normals_spline2d(const Eigen::MatrixXd& pts, bool closed) {
  const int n = static_cast<int>(pts.rows());
  if (pts.cols() != 2) throw DimensionError("spline normals need 2D points");
  if (n < 4) throw DegenerateCurve("spline fit needs at least 4 points");

  // chord-length parameterization
  Eigen::VectorXd t(n);
  t[0] = 0.0;
  for (int i = 1; i < n; ++i) {
    const double seg = (pts.row(i) - pts.row(i - 1)).norm();
    if (seg == 0.0) throw DegenerateCurve("duplicate consecutive points");
    t[i] = t[i - 1] + seg;
  }
  double closing_h = 0.0;
  if (closed) {
    closing_h = (pts.row(0) - pts.row(n - 1)).norm();
    if (closing_h == 0.0) throw DegenerateCurve("closed curve repeats its start point");
  }

  Eigen::MatrixXd tangents(n, 2);
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd y = pts.col(c);
    const Eigen::VectorXd m = spline_second_derivatives(t, y, closed, closing_h);
    for (int i = 0; i < n; ++i) {
      if (i < n - 1) {
        const double h = t[i + 1] - t[i];
        tangents(i, c) = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
      } else if (closed) {
        const double h = closing_h;
        tangents(i, c) = (y[0] - y[i]) / h - h * (2.0 * m[i] + m[0]) / 6.0;
      } else {
        const double h = t[i] - t[i - 1];
        tangents(i, c) = (y[i] - y[i - 1]) / h + h * (m[i - 1] + 2.0 * m[i]) / 6.0;
      }
    }
  }

  Eigen::MatrixXd normals(n, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d tan = tangents.row(i).transpose();
    if (tan.norm() == 0.0) throw DegenerateCurve("zero tangent at point " + std::to_string(i));
    tan.normalize();
    normals(i, 0) = tan[1];   // tangent rotated by -90 degrees
    normals(i, 1) = -tan[0];
  }
  return normals;
}

Eigen::MatrixXd normals_mesh(const Eigen::MatrixXd& pts,
                             const std::vector<std::array<int, 3>>& faces) {
  const int n = static_cast<int>(pts.rows());
  if (pts.cols() != 3) throw DimensionError("mesh normals need 3D points");

  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(n, 3);
  std::vector<int> incident(n, 0);
  for (const auto& f : faces) {
    const Eigen::Vector3d v0 = pts.row(f[0]), v1 = pts.row(f[1]), v2 = pts.row(f[2]);
    Eigen::Vector3d fn = (v1 - v0).cross(v2 - v0);
    const double len = fn.norm();
    if (len == 0.0) continue;  // degenerate face contributes nothing
    fn /= len;
    for (int v : f) {
      accum.row(v) += fn.transpose();
      ++incident[v];
    }
  }

  std::vector<int> isolated;
  Eigen::MatrixXd normals(n, 3);
  for (int i = 0; i < n; ++i) {
    if (incident[i] == 0) {
      isolated.push_back(i);
      continue;
    }
    Eigen::Vector3d mean = accum.row(i).transpose() / incident[i];
    if (mean.norm() == 0.0) throw IsolatedVertex("cancelling face normals at vertex " + std::to_string(i));
    normals.row(i) = mean.normalized().transpose();
  }

  if (!isolated.empty()) {
    if (static_cast<int>(isolated.size()) == n)
      throw IsolatedVertex("mesh has no usable faces");
    const int k = std::min(40, n - 1);
    const Eigen::MatrixXd fallback = normals_knn_pca(pts, k);
    for (int i : isolated) {
      // align the fallback normal with the nearest mesh-connected vertex
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        if (incident[j] == 0) continue;
        const double d = (pts.row(i) - pts.row(j)).squaredNorm();
        if (d < best_d) { best_d = d; best = j; }
      }
      Eigen::Vector3d nrm = fallback.row(i).transpose();
      if (nrm.dot(normals.row(best).transpose()) < 0.0) nrm = -nrm;
      normals.row(i) = nrm.transpose();
    }
  }
  return normals;
}

Eigen::MatrixXd normals_knn_pca(const Eigen::MatrixXd& pts, int k) {
  const int n = static_cast<int>(pts.rows());
  if (pts.cols() != 3) throw DimensionError("knn_pca normals need 3D points");
  if (k < 3) throw InsufficientPoints("knn_pca needs k >= 3");
  if (k >= n) throw InsufficientPoints("knn_pca needs k < n");

  const auto nbrs = knn_indices(pts, k);

  Eigen::MatrixXd normals(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd nb(k + 1, 3);
    nb.row(0) = pts.row(i);
    for (int j = 0; j < k; ++j) nb.row(j + 1) = pts.row(nbrs[i][j]);
    const Eigen::RowVector3d mean = nb.colwise().mean();
    const Eigen::MatrixXd centered = nb.rowwise() - mean;
    const Eigen::Matrix3d cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    normals.row(i) = eig.eigenvectors().col(0).transpose();  // smallest eigenvalue
  }

  // Euclidean MST (Prim), flip propagation from the vertex farthest from the
  // centroid, whose normal is oriented away from the centroid.
  const Eigen::RowVector3d centroid = pts.colwise().mean();
  int root = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (pts.row(i) - centroid).squaredNorm();
    if (d > best) { best = d; root = i; }
  }

  std::vector<double> key(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<bool> in_tree(n, false);
  key[root] = 0.0;
  std::vector<std::vector<int>> children(n);
  for (int step = 0; step < n; ++step) {
    int u = -1;
    for (int i = 0; i < n; ++i)
      if (!in_tree[i] && (u == -1 || key[i] < key[u])) u = i;
    in_tree[u] = true;
    if (parent[u] >= 0) children[parent[u]].push_back(u);
    for (int v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = (pts.row(u) - pts.row(v)).squaredNorm();
      if (w < key[v]) { key[v] = w; parent[v] = u; }
    }
  }

  if (normals.row(root) * (pts.row(root) - centroid).transpose() < 0.0)
    normals.row(root) = -normals.row(root);
  std::queue<int> bfs;
  bfs.push(root);
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop();
    for (int v : children[u]) {
      if (normals.row(v).dot(normals.row(u)) < 0.0) normals.row(v) = -normals.row(v);
      bfs.push(v);
    }
  }
  return normals;
}

Eigen::MatrixXd embed_s1_in_s2(const Eigen::MatrixXd& nrm) {
  if (nrm.cols() != 2) throw DimensionError("embed_s1_in_s2 expects 2D unit vectors");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nrm.rows(), 3);
  out.leftCols(2) = nrm;
  return out;
}

}  // namespace dirreg
