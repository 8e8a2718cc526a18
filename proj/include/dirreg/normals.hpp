#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "dirreg/error.hpp"

namespace dirreg {

enum class NormalMethod { analytic, spline2d, mesh_face_avg, knn_pca };

struct NormalEstimatorConfig {
  NormalMethod method = NormalMethod::knn_pca;
  int k_neighbors = 40;       // knn_pca only
  bool embed_2d_in_s2 = false;
  bool flip = false;          // flip the 2D sign convention
};

// Cubic-spline normals for ordered 2D points (natural spline when open,
// periodic when closed). Returns the left-hand normal of the tangent, which is
// outward for counterclockwise closed curves.
Eigen::MatrixXd normals_spline2d(const Eigen::MatrixXd& pts, bool closed);

// Per-vertex normal = normalized mean of incident face unit normals
// (counterclockwise winding). Isolated vertices fall back to knn_pca,
// sign-aligned with the nearest mesh-connected vertex.
Eigen::MatrixXd normals_mesh(const Eigen::MatrixXd& pts,
                             const std::vector<std::array<int, 3>>& faces);

// Plane-fit normals from the k nearest neighbors, oriented consistently by
// flip propagation along the Euclidean minimum spanning tree (root points away
// from the centroid).
Eigen::MatrixXd normals_knn_pca(const Eigen::MatrixXd& pts, int k);

// (a, b) -> (a, b, 0)
Eigen::MatrixXd embed_s1_in_s2(const Eigen::MatrixXd& nrm);

}  // namespace dirreg
