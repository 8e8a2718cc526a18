#include "dirreg/geometry.hpp"

#include <algorithm>
#include <random>

namespace dirreg {

void OrientedPointSet::validate() const {
  const int d = dim();
  if (d != 2 && d != 3)
    throw DimensionError("point dimension must be 2 or 3, got " + std::to_string(d));
  if (has_normals()) {
    if (normals.rows() != points.rows() || normals.cols() != d)
      throw DimensionError("normals shape does not match points");
    for (int i = 0; i < normals.rows(); ++i) {
      if (std::abs(normals.row(i).norm() - 1.0) > 1e-9)
        throw DimensionError("normal " + std::to_string(i) + " is not unit length");
    }
  }
  if (connectivity == Connectivity::mesh) {
    const int n = size();
    for (const auto& f : faces) {
      for (int v : f)
        if (v < 0 || v >= n)
          throw DimensionError("face index out of range: " + std::to_string(v));
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        throw DimensionError("face with repeated vertex");
    }
  }
}

BoundingBox bounding_box(const OrientedPointSet& shape) {
  if (shape.size() == 0) throw EmptyShape("bounding_box of empty shape");
  BoundingBox box;
  box.min = shape.points.colwise().minCoeff();
  box.max = shape.points.colwise().maxCoeff();
  return box;
}

SubsampleResult subsample(const OrientedPointSet& shape, int m, std::uint64_t seed) {
  const int n = shape.size();
  if (n == 0) throw EmptyShape("subsample of empty shape");
  if (m < 1) throw Error("subsample count must be >= 1");

  SubsampleResult out;
  if (m >= n) {
    out.shape = shape;
    out.indices.resize(n);
    for (int i = 0; i < n; ++i) out.indices[i] = i;
    return out;
  }

  // Partial Fisher-Yates, then sort for a stable row order.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());

  out.indices = idx;
  out.shape.points.resize(m, shape.dim());
  if (shape.has_normals()) out.shape.normals.resize(m, shape.dim());
  for (int i = 0; i < m; ++i) {
    out.shape.points.row(i) = shape.points.row(idx[i]);
    if (shape.has_normals()) out.shape.normals.row(i) = shape.normals.row(idx[i]);
  }
  // Connectivity does not survive subsampling.
  out.shape.connectivity = OrientedPointSet::Connectivity::none;
  return out;
}

Eigen::MatrixXd UnitBoxMap::apply(const Eigen::MatrixXd& pts) const {
  return (pts.rowwise() - offset.transpose()) * scale;
}

Eigen::MatrixXd UnitBoxMap::invert(const Eigen::MatrixXd& pts) const {
  return (pts / scale).rowwise() + offset.transpose();
}

NormalizeResult normalize_to_unit_box(const OrientedPointSet& shape) {
  BoundingBox box = bounding_box(shape);
  const double extent = (box.max - box.min).maxCoeff();
  if (extent <= 0.0) throw DegenerateShape("shape has zero extent on every axis");

  NormalizeResult out;
  out.map.scale = 1.0 / extent;
  out.map.offset = box.min;
  out.shape = shape;
  out.shape.points = out.map.apply(shape.points);
  return out;
}

}  // namespace dirreg
