#include <set>

#include "dirreg/geometry.hpp"
#include "doctest.h"

using namespace dirreg;

namespace {

OrientedPointSet grid2d(int nx, int ny) {
  OrientedPointSet s;
  s.points.resize(nx * ny, 2);
  int row = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) s.points.row(row++) << i, j;
  return s;
}

}  // namespace

TEST_CASE("validate rejects malformed shapes") {
  OrientedPointSet bad_dim;
  bad_dim.points.resize(3, 4);
  CHECK_THROWS_AS(bad_dim.validate(), DimensionError);

  OrientedPointSet bad_normals = grid2d(2, 2);
  bad_normals.normals.resize(4, 2);
  bad_normals.normals.setConstant(0.4);  // norm != 1
  CHECK_THROWS_AS(bad_normals.validate(), DimensionError);

  OrientedPointSet bad_face;
  bad_face.points.resize(3, 3);
  bad_face.points.setRandom();
  bad_face.connectivity = OrientedPointSet::Connectivity::mesh;
  bad_face.faces.push_back({0, 1, 5});
  CHECK_THROWS_AS(bad_face.validate(), DimensionError);

  OrientedPointSet ok = grid2d(2, 3);
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("bounding_box of an empty shape throws") {
  OrientedPointSet empty;
  empty.points.resize(0, 2);
  CHECK_THROWS_AS(bounding_box(empty), EmptyShape);
}

TEST_CASE("bounding box spans the data") {
  OrientedPointSet s = grid2d(4, 3);
  const BoundingBox box = bounding_box(s);
  CHECK(box.min[0] == 0.0);
  CHECK(box.min[1] == 0.0);
  CHECK(box.max[0] == 3.0);
  CHECK(box.max[1] == 2.0);
  CHECK(box.diagonal() == doctest::Approx(std::sqrt(13.0)));
}

TEST_CASE("subsample returns everything when m >= n") {
  OrientedPointSet s = grid2d(3, 3);
  const SubsampleResult r = subsample(s, 20, 7);
  CHECK(r.shape.size() == 9);
  for (int i = 0; i < 9; ++i) CHECK(r.indices[i] == i);
  CHECK(r.shape.points == s.points);
}

TEST_CASE("subsample is deterministic, sorted, and unique") {
  OrientedPointSet s = grid2d(10, 10);
  const SubsampleResult a = subsample(s, 25, 42);
  const SubsampleResult b = subsample(s, 25, 42);
  CHECK(a.indices == b.indices);
  CHECK(static_cast<int>(a.indices.size()) == 25);

  std::set<int> seen(a.indices.begin(), a.indices.end());
  CHECK(seen.size() == a.indices.size());
  for (size_t i = 1; i < a.indices.size(); ++i) CHECK(a.indices[i] > a.indices[i - 1]);
  for (int i = 0; i < 25; ++i)
    CHECK(a.shape.points.row(i) == s.points.row(a.indices[i]));

  const SubsampleResult c = subsample(s, 25, 43);
  CHECK(a.indices != c.indices);
}

TEST_CASE("subsample carries normals and drops connectivity") {
  OrientedPointSet s = grid2d(6, 6);
  s.connectivity = OrientedPointSet::Connectivity::closed_polyline;
  s.normals.resize(s.size(), 2);
  for (int i = 0; i < s.size(); ++i) s.normals.row(i) << std::cos(i * 0.1), std::sin(i * 0.1);
  const SubsampleResult r = subsample(s, 10, 3);
  CHECK(r.shape.connectivity == OrientedPointSet::Connectivity::none);
  for (int i = 0; i < 10; ++i) CHECK(r.shape.normals.row(i) == s.normals.row(r.indices[i]));
}

TEST_CASE("normalize_to_unit_box uses one uniform scale") {
  OrientedPointSet s;
  s.points.resize(3, 2);
  s.points << -2, 1, 6, 1, 2, 3;
  const NormalizeResult r = normalize_to_unit_box(s);

  // longest side (x, length 8) maps to [0, 1]; y keeps the same scale
  CHECK(r.shape.points.col(0).minCoeff() == doctest::Approx(0.0));
  CHECK(r.shape.points.col(0).maxCoeff() == doctest::Approx(1.0));
  CHECK(r.shape.points.col(1).maxCoeff() == doctest::Approx(2.0 / 8.0));
  CHECK(r.map.scale == doctest::Approx(1.0 / 8.0));

  const Eigen::MatrixXd back = r.map.invert(r.shape.points);
  CHECK((back - s.points).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize_to_unit_box leaves normals alone") {
  OrientedPointSet s = grid2d(5, 2);
  s.normals.resize(s.size(), 2);
  for (int i = 0; i < s.size(); ++i) s.normals.row(i) << 0.0, 1.0;
  const NormalizeResult r = normalize_to_unit_box(s);
  CHECK(r.shape.normals == s.normals);
}

TEST_CASE("normalize_to_unit_box rejects degenerate input") {
  OrientedPointSet s;
  s.points.resize(4, 2);
  s.points.setConstant(2.5);  // zero extent
  CHECK_THROWS_AS(normalize_to_unit_box(s), DegenerateShape);
}
