#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <variant>
#include <vector>

#include "dirreg/geometry.hpp"

namespace dirreg {

struct Rotation2D {
  double angle = 0.0;  // radians

  Eigen::Matrix2d matrix() const;
};

struct Rotation3D {
  // unit quaternion (w, x, y, z)
  Eigen::Vector4d q{1.0, 0.0, 0.0, 0.0};

  Eigen::Matrix3d matrix() const;
  static Rotation3D from_axis_angle(const Eigen::Vector3d& axis, double angle);
};

/// x -> A x + t + sum_j w_j U(|x - c_j|), with U(r) = r^2 log r in 2D and
/// U(r) = r in 3D.
struct ThinPlateSpline {
  Eigen::MatrixXd affine;          // d x d
  Eigen::VectorXd translation;     // d
  Eigen::MatrixXd control_points;  // N x d, fixed during optimization
  Eigen::MatrixXd weights;         // N x d

  int dim() const { return static_cast<int>(affine.rows()); }
  static ThinPlateSpline identity(const Eigen::MatrixXd& control_points);
  Eigen::MatrixXd jacobian_at(const Eigen::VectorXd& x) const;
};

using Transform = std::variant<Rotation2D, Rotation3D, ThinPlateSpline>;

int transform_dim(const Transform& t);

Eigen::MatrixXd apply_to_points(const Transform& t, const Eigen::MatrixXd& pts);

enum class NormalMode { jacobian, recompute };

// Rotations rotate normals exactly. TPS jacobian mode maps each normal through
// the inverse-transpose Jacobian at its point and renormalizes.
Eigen::MatrixXd apply_to_normals(const Transform& t, const Eigen::MatrixXd& pts,
                                 const Eigen::MatrixXd& nrm,
                                 NormalMode mode = NormalMode::jacobian);

// Transforms points and normals of a shape together. recompute mode
// re-estimates normals from the transformed points (knn_pca with the given k).
OrientedPointSet apply_transform(const Transform& t, const OrientedPointSet& shape,
                                 NormalMode mode = NormalMode::jacobian,
                                 int recompute_k = 40);

// theta_new = sum_i alpha_i theta_i, all transforms in the same family.
// Rotation3D blends in quaternion space and renormalizes.
Transform interpolate(const std::vector<Transform>& params,
                      const std::vector<double>& alphas);

// Regular lattice spanning the box, counts per axis (>= 2 each, corners included).
Eigen::MatrixXd control_grid(const BoundingBox& box, const std::vector<int>& per_axis);

// 4x3 grid in 2D (longer axis gets 4), 5x5x5 in 3D.
std::vector<int> default_grid_shape(const BoundingBox& box);

nlohmann::json transform_to_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j);

}  // namespace dirreg
