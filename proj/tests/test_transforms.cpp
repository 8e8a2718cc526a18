#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "dirreg/transforms.hpp"
#include "doctest.h"

using namespace dirreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd random_points(int n, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) pts(i, c) = coord(rng);
  return pts;
}

ThinPlateSpline affine_only_tps(const Eigen::MatrixXd& a, const Eigen::VectorXd& t) {
  const int d = static_cast<int>(a.rows());
  ThinPlateSpline tps;
  tps.affine = a;
  tps.translation = t;
  tps.control_points = random_points(4, d, 5);
  tps.weights = Eigen::MatrixXd::Zero(4, d);
  return tps;
}

}  // namespace

TEST_CASE("2D rotation matrix") {
  const Rotation2D quarter{kPi / 2.0};
  const Eigen::Matrix2d m = quarter.matrix();
  CHECK(m(0, 0) == doctest::Approx(0.0));
  CHECK(m(0, 1) == doctest::Approx(-1.0));
  CHECK(m(1, 0) == doctest::Approx(1.0));
  CHECK(m(1, 1) == doctest::Approx(0.0));
  CHECK((m * m.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-14);
}

TEST_CASE("3D rotation from axis-angle") {
  const Rotation3D r = Rotation3D::from_axis_angle({0.0, 0.0, 1.0}, kPi / 2.0);
  CHECK(r.q[0] == doctest::Approx(std::cos(kPi / 4.0)));
  CHECK(r.q[3] == doctest::Approx(std::sin(kPi / 4.0)));
  const Eigen::Vector3d mapped = r.matrix() * Eigen::Vector3d(1.0, 0.0, 0.0);
  CHECK(mapped.x() == doctest::Approx(0.0));
  CHECK(mapped.y() == doctest::Approx(1.0));
  CHECK(mapped.z() == doctest::Approx(0.0));
}

TEST_CASE("rotation matrices preserve distances") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Rotation3D r = Rotation3D::from_axis_angle(
        Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized(), gauss(rng));
    const Eigen::Matrix3d m = r.matrix();
    CHECK((m * m.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-13);
    CHECK(m.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("TPS identity maps points to themselves") {
  const Eigen::MatrixXd grid = random_points(6, 2, 1);
  const ThinPlateSpline tps = ThinPlateSpline::identity(grid);
  const Eigen::MatrixXd pts = random_points(50, 2, 2);
  CHECK((apply_to_points(tps, pts) - pts).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("TPS radial terms use r^2 log r in 2D and r in 3D") {
  // 2D: one control at the origin with weight (1, 0)
  ThinPlateSpline tps2;
  tps2.affine = Eigen::Matrix2d::Identity();
  tps2.translation = Eigen::Vector2d::Zero();
  tps2.control_points = Eigen::MatrixXd::Zero(1, 2);
  tps2.weights.resize(1, 2);
  tps2.weights << 1.0, 0.0;
  Eigen::MatrixXd x(1, 2);
  const double e = std::exp(1.0);
  x << e, 0.0;
  Eigen::MatrixXd y = apply_to_points(tps2, x);
  CHECK(y(0, 0) == doctest::Approx(e + e * e));  // r^2 log r = e^2 at r = e
  CHECK(y(0, 1) == doctest::Approx(0.0));

  // at a control point itself r = 0 must contribute nothing (no NaN)
  Eigen::MatrixXd origin = Eigen::MatrixXd::Zero(1, 2);
  CHECK((apply_to_points(tps2, origin)).cwiseAbs().maxCoeff() < 1e-14);

  // 3D: U(r) = r
  ThinPlateSpline tps3;
  tps3.affine = Eigen::Matrix3d::Identity();
  tps3.translation = Eigen::Vector3d::Zero();
  tps3.control_points = Eigen::MatrixXd::Zero(1, 3);
  tps3.weights.resize(1, 3);
  tps3.weights << 0.0, 0.0, 1.0;
  Eigen::MatrixXd p(1, 3);
  p << 3.0, 4.0, 0.0;
  Eigen::MatrixXd q = apply_to_points(tps3, p);
  CHECK(q(0, 2) == doctest::Approx(5.0));  // |p| = 5
}

TEST_CASE("TPS jacobian of an affine-only warp is the affine matrix") {
  Eigen::Matrix2d a;
  a << 2.0, 0.3, -0.1, 1.5;
  const ThinPlateSpline tps = affine_only_tps(a, Eigen::Vector2d(1.0, -2.0));
  const Eigen::MatrixXd j = tps.jacobian_at(Eigen::Vector2d(0.2, 0.4));
  CHECK((j - a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("TPS jacobian matches finite differences of the warp") {
  ThinPlateSpline tps;
  tps.affine = Eigen::Matrix2d::Identity();
  tps.affine(0, 1) = 0.2;
  tps.translation = Eigen::Vector2d(0.1, 0.0);
  tps.control_points = random_points(5, 2, 13);
  tps.weights = 0.05 * random_points(5, 2, 14);

  const Eigen::Vector2d x(0.37, -0.21);
  const Eigen::MatrixXd j = tps.jacobian_at(x);
  const double eps = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd hi(1, 2), lo(1, 2);
    hi.row(0) = x.transpose();
    lo.row(0) = x.transpose();
    hi(0, c) += eps;
    lo(0, c) -= eps;
    const Eigen::MatrixXd fd =
        (apply_to_points(tps, hi) - apply_to_points(tps, lo)) / (2.0 * eps);
    CHECK((j.col(c).transpose() - fd.row(0)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("normals transform by rotation and by inverse-transpose jacobian") {
  // rotations rotate normals exactly
  const Rotation2D rot{0.7};
  Eigen::MatrixXd nrm(1, 2);
  nrm << 1.0, 0.0;
  const Eigen::MatrixXd rotated =
      apply_to_normals(rot, random_points(1, 2, 3), nrm);
  CHECK(rotated(0, 0) == doctest::Approx(std::cos(0.7)));
  CHECK(rotated(0, 1) == doctest::Approx(std::sin(0.7)));

  // anisotropic stretch diag(2, 1): x-normals survive, diagonals tilt toward y
  Eigen::Matrix2d stretch = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  const ThinPlateSpline tps = affine_only_tps(stretch, Eigen::Vector2d::Zero());
  Eigen::MatrixXd dirs(2, 2);
  dirs << 1.0, 0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const Eigen::MatrixXd out = apply_to_normals(tps, random_points(2, 2, 4), dirs);
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(out(0, 1) == doctest::Approx(0.0));
  // A^{-T} (1,1)/sqrt2 = (0.5, 1)/sqrt2, normalized = (1, 2)/sqrt5
  CHECK(out(1, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(out(1, 1) == doctest::Approx(2.0 / std::sqrt(5.0)));

  // a collapsed warp has no well-defined normal image
  const ThinPlateSpline flat =
      affine_only_tps(Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(apply_to_normals(flat, random_points(1, 2, 5), nrm),
                  SingularJacobian);
}

TEST_CASE("interpolate hits endpoints and blends angles") {
  const Transform a = Rotation2D{0.0};
  const Transform b = Rotation2D{kPi / 2.0};
  const auto mid = interpolate({a, b}, {0.5, 0.5});
  CHECK(std::get<Rotation2D>(mid).angle == doctest::Approx(kPi / 4.0));
  CHECK(std::get<Rotation2D>(interpolate({a, b}, {1.0, 0.0})).angle ==
        doctest::Approx(0.0));
  CHECK(std::get<Rotation2D>(interpolate({a, b}, {0.0, 1.0})).angle ==
        doctest::Approx(kPi / 2.0));
}

TEST_CASE("quaternion interpolation ignores the q/-q double cover") {
  Rotation3D r = Rotation3D::from_axis_angle({0.0, 1.0, 0.0}, 1.1);
  Rotation3D flipped = r;
  flipped.q = -flipped.q;
  const auto blend = interpolate({Transform{r}, Transform{flipped}}, {0.5, 0.5});
  CHECK((std::get<Rotation3D>(blend).matrix() - r.matrix()).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(std::get<Rotation3D>(blend).q.norm() == doctest::Approx(1.0));
}

TEST_CASE("TPS interpolation is componentwise and rejects mismatched grids") {
  const Eigen::MatrixXd grid = random_points(6, 2, 21);
  ThinPlateSpline a = ThinPlateSpline::identity(grid);
  ThinPlateSpline b = ThinPlateSpline::identity(grid);
  b.translation << 1.0, 2.0;
  const auto mid = interpolate({Transform{a}, Transform{b}}, {0.5, 0.5});
  CHECK(std::get<ThinPlateSpline>(mid).translation(0) == doctest::Approx(0.5));
  CHECK(std::get<ThinPlateSpline>(mid).translation(1) == doctest::Approx(1.0));

  ThinPlateSpline other = ThinPlateSpline::identity(random_points(6, 2, 22));
  CHECK_THROWS_AS(interpolate({Transform{a}, Transform{other}}, {0.5, 0.5}),
                  GridMismatch);
}

TEST_CASE("control_grid spans the box with corners included") {
  BoundingBox box;
  box.min = Eigen::Vector2d(0.0, 0.0);
  box.max = Eigen::Vector2d(1.0, 2.0);
  const Eigen::MatrixXd grid = control_grid(box, {4, 3});
  CHECK(grid.rows() == 12);
  CHECK(grid.col(0).minCoeff() == doctest::Approx(0.0));
  CHECK(grid.col(0).maxCoeff() == doctest::Approx(1.0));
  CHECK(grid.col(1).maxCoeff() == doctest::Approx(2.0));

  // interior spacing is regular on each axis: 4 x-levels, each used 3 times
  std::vector<double> xs(grid.col(0).data(), grid.col(0).data() + 12);
  std::sort(xs.begin(), xs.end());
  CHECK(xs[2] == doctest::Approx(0.0));
  CHECK(xs[3] == doctest::Approx(1.0 / 3.0));
  CHECK(xs[6] == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(control_grid(box, {1, 3}), Error);
}

TEST_CASE("default grid shape follows the long axis in 2D, 5^3 in 3D") {
  BoundingBox wide;
  wide.min = Eigen::Vector2d(0.0, 0.0);
  wide.max = Eigen::Vector2d(2.0, 1.0);
  CHECK(default_grid_shape(wide) == std::vector<int>{4, 3});

  BoundingBox tall;
  tall.min = Eigen::Vector2d(0.0, 0.0);
  tall.max = Eigen::Vector2d(1.0, 2.0);
  CHECK(default_grid_shape(tall) == std::vector<int>{3, 4});

  BoundingBox cube;
  cube.min = Eigen::Vector3d(0.0, 0.0, 0.0);
  cube.max = Eigen::Vector3d(1.0, 1.0, 1.0);
  CHECK(default_grid_shape(cube) == std::vector<int>{5, 5, 5});
}

TEST_CASE("transform JSON round-trips every family") {
  const Eigen::MatrixXd pts = random_points(100, 2, 31);
  const Eigen::MatrixXd pts3 = random_points(100, 3, 32);

  const Transform r2 = Rotation2D{0.83};
  const Transform back2 = transform_from_json(transform_to_json(r2));
  CHECK((apply_to_points(back2, pts) - apply_to_points(r2, pts)).cwiseAbs().maxCoeff() <
        1e-15);

  const Transform r3 = Rotation3D::from_axis_angle({1.0, 2.0, 2.0}, 0.4);
  const Transform back3 = transform_from_json(transform_to_json(r3));
  CHECK((apply_to_points(back3, pts3) - apply_to_points(r3, pts3)).cwiseAbs().maxCoeff() <
        1e-15);

  ThinPlateSpline tps = ThinPlateSpline::identity(random_points(8, 2, 33));
  tps.weights = 0.1 * random_points(8, 2, 34);
  tps.translation << 0.2, -0.1;
  const Transform back_tps = transform_from_json(transform_to_json(Transform{tps}));
  CHECK((apply_to_points(back_tps, pts) - apply_to_points(Transform{tps}, pts))
            .cwiseAbs()
            .maxCoeff() < 1e-15);

  CHECK_THROWS_AS(transform_from_json(nlohmann::json{{"family", "scale"}}), ParseError);
}
