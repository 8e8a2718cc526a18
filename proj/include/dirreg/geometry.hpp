#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "dirreg/error.hpp"

namespace dirreg {

/// Point set in R^d (d in {2,3}) with optional unit normals and optional
/// connectivity (ordered polyline for 2D contours, triangle faces for meshes).
struct OrientedPointSet {
  enum class Connectivity { none, open_polyline, closed_polyline, mesh };

  Eigen::MatrixXd points;   // n x d
  Eigen::MatrixXd normals;  // n x d, or 0x0 when absent
  Connectivity connectivity = Connectivity::none;
  std::vector<std::array<int, 3>> faces;  // mesh connectivity only

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  bool has_normals() const { return normals.rows() > 0; }

  // Throws on invariant violations (dimension, normal norms, face indices).
  void validate() const;
};

struct BoundingBox {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  double diagonal() const { return (max - min).norm(); }
  int dim() const { return static_cast<int>(min.size()); }
};

BoundingBox bounding_box(const OrientedPointSet& shape);

struct SubsampleResult {
  OrientedPointSet shape;
  std::vector<int> indices;  // maps sampled rows back to the source
};

// Uniform sampling without replacement; returns all points when m >= n.
// Deterministic for a fixed seed. Normals travel with their points.
SubsampleResult subsample(const OrientedPointSet& shape, int m, std::uint64_t seed);

/// Record of the uniform scale + translation applied by normalize_to_unit_box:
/// x' = scale * (x - offset). Invertible via x = x' / scale + offset.
struct UnitBoxMap {
  double scale = 1.0;
  Eigen::VectorXd offset;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& pts) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& pts) const;
};

struct NormalizeResult {
  OrientedPointSet shape;
  UnitBoxMap map;
};

// Maps the shape into the unit box with a single uniform scale (aspect ratio
// preserved, so normals are untouched).
NormalizeResult normalize_to_unit_box(const OrientedPointSet& shape);

}  // namespace dirreg
