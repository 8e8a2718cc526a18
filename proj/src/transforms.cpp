#include "dirreg/transforms.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "dirreg/normals.hpp"

namespace dirreg {

namespace {

double tps_kernel(double r, int d) {
  if (d == 2) return r > 0.0 ? r * r * std::log(r) : 0.0;
  return r;
}

// gradient of U(|x - c|) w.r.t. x
Eigen::VectorXd tps_kernel_grad(const Eigen::VectorXd& diff, int d) {
  const double r = diff.norm();
  if (r == 0.0) return Eigen::VectorXd::Zero(d);
  if (d == 2) return (2.0 * std::log(r) + 1.0) * diff;
  return diff / r;
}

}  // namespace

Eigen::Matrix2d Rotation2D::matrix() const {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

Eigen::Matrix3d Rotation3D::matrix() const {
  Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  quat.normalize();
  return quat.toRotationMatrix();
}

Rotation3D Rotation3D::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  Eigen::Quaterniond quat(Eigen::AngleAxisd(angle, axis.normalized()));
  Rotation3D r;
  r.q << quat.w(), quat.x(), quat.y(), quat.z();
  return r;
}

ThinPlateSpline ThinPlateSpline::identity(const Eigen::MatrixXd& control_points) {
  const int d = static_cast<int>(control_points.cols());
  ThinPlateSpline t;
  t.affine = Eigen::MatrixXd::Identity(d, d);
  t.translation = Eigen::VectorXd::Zero(d);
  t.control_points = control_points;
  t.weights = Eigen::MatrixXd::Zero(control_points.rows(), d);
  return t;
}

Eigen::MatrixXd ThinPlateSpline::jacobian_at(const Eigen::VectorXd& x) const {
  const int d = dim();
  Eigen::MatrixXd jac = affine;
  for (int j = 0; j < control_points.rows(); ++j) {
    const Eigen::VectorXd diff = x - control_points.row(j).transpose();
    jac += weights.row(j).transpose() * tps_kernel_grad(diff, d).transpose();
  }
  return jac;
}

int transform_dim(const Transform& t) {
  if (std::holds_alternative<Rotation2D>(t)) return 2;
  if (std::holds_alternative<Rotation3D>(t)) return 3;
  return std::get<ThinPlateSpline>(t).dim();
}

Eigen::MatrixXd apply_to_points(const Transform& t, const Eigen::MatrixXd& pts) {
  if (transform_dim(t) != pts.cols())
    throw DimensionError("transform dimension does not match point dimension");
  if (const auto* r2 = std::get_if<Rotation2D>(&t)) return pts * r2->matrix().transpose();
  if (const auto* r3 = std::get_if<Rotation3D>(&t)) return pts * r3->matrix().transpose();

  const auto& tps = std::get<ThinPlateSpline>(t);
  const int d = tps.dim();
  const int n = static_cast<int>(pts.rows());
  const int nc = static_cast<int>(tps.control_points.rows());
  Eigen::MatrixXd out = pts * tps.affine.transpose();
  out.rowwise() += tps.translation.transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < nc; ++j) {
      const double r = (pts.row(i) - tps.control_points.row(j)).norm();
      out.row(i) += tps_kernel(r, d) * tps.weights.row(j);
    }
  }
  return out;
}

Eigen::MatrixXd apply_to_normals(const Transform& t, const Eigen::MatrixXd& pts,
                                 const Eigen::MatrixXd& nrm, NormalMode mode) {
  if (pts.rows() != nrm.rows()) throw DimensionError("points/normals length mismatch");
  if (const auto* r2 = std::get_if<Rotation2D>(&t)) return nrm * r2->matrix().transpose();
  if (const auto* r3 = std::get_if<Rotation3D>(&t)) return nrm * r3->matrix().transpose();

  const auto& tps = std::get<ThinPlateSpline>(t);
  if (mode == NormalMode::recompute)
    throw Error("recompute mode requires the full shape; use apply_transform");
  Eigen::MatrixXd out(nrm.rows(), nrm.cols());
  for (int i = 0; i < nrm.rows(); ++i) {
    const Eigen::MatrixXd jac = tps.jacobian_at(pts.row(i).transpose());
    if (std::abs(jac.determinant()) < 1e-12)
      throw SingularJacobian("TPS Jacobian singular at point " + std::to_string(i));
    Eigen::VectorXd mapped = jac.transpose().partialPivLu().solve(nrm.row(i).transpose());
    out.row(i) = mapped.normalized().transpose();
  }
  return out;
}

OrientedPointSet apply_transform(const Transform& t, const OrientedPointSet& shape,
                                 NormalMode mode, int recompute_k) {
  OrientedPointSet out = shape;
  out.points = apply_to_points(t, shape.points);
  if (!shape.has_normals()) return out;

  const bool is_tps = std::holds_alternative<ThinPlateSpline>(t);
  if (mode == NormalMode::recompute && is_tps) {
    if (shape.dim() == 3) {
      out.normals = normals_knn_pca(out.points, recompute_k);
    } else if (shape.connectivity == OrientedPointSet::Connectivity::open_polyline ||
               shape.connectivity == OrientedPointSet::Connectivity::closed_polyline) {
      out.normals = normals_spline2d(
          out.points, shape.connectivity == OrientedPointSet::Connectivity::closed_polyline);
    } else {
      throw Error("cannot recompute 2D normals without polyline connectivity");
    }
  } else {
    out.normals = apply_to_normals(t, shape.points, shape.normals, NormalMode::jacobian);
  }
  return out;
}

Transform interpolate(const std::vector<Transform>& params,
                      const std::vector<double>& alphas) {
  if (params.empty() || params.size() != alphas.size())
    throw Error("interpolate needs matching transform/alpha counts");
  const auto& first = params.front();
  for (const auto& p : params)
    if (p.index() != first.index()) throw FamilyMismatch("mixed transform families");

  if (std::holds_alternative<Rotation2D>(first)) {
    double angle = 0.0;
    for (size_t i = 0; i < params.size(); ++i)
      angle += alphas[i] * std::get<Rotation2D>(params[i]).angle;
    return Rotation2D{angle};
  }

  if (std::holds_alternative<Rotation3D>(first)) {
    const Eigen::Vector4d ref = std::get<Rotation3D>(first).q;
    Eigen::Vector4d q = Eigen::Vector4d::Zero();
    for (size_t i = 0; i < params.size(); ++i) {
      Eigen::Vector4d qi = std::get<Rotation3D>(params[i]).q;
      if (qi.dot(ref) < 0.0) qi = -qi;  // pick the same double-cover sheet
      q += alphas[i] * qi;
    }
    if (q.norm() < 1e-12) throw Error("degenerate quaternion blend");
    Rotation3D out;
    out.q = q.normalized();
    return out;
  }

  const auto& tps0 = std::get<ThinPlateSpline>(first);
  ThinPlateSpline out;
  out.control_points = tps0.control_points;
  out.affine = Eigen::MatrixXd::Zero(tps0.affine.rows(), tps0.affine.cols());
  out.translation = Eigen::VectorXd::Zero(tps0.translation.size());
  out.weights = Eigen::MatrixXd::Zero(tps0.weights.rows(), tps0.weights.cols());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& tps = std::get<ThinPlateSpline>(params[i]);
    if (tps.control_points.rows() != tps0.control_points.rows() ||
        (tps.control_points - tps0.control_points).cwiseAbs().maxCoeff() > 1e-12)
      throw GridMismatch("TPS control grids differ");
    out.affine += alphas[i] * tps.affine;
    out.translation += alphas[i] * tps.translation;
    out.weights += alphas[i] * tps.weights;
  }
  return out;
}

Eigen::MatrixXd control_grid(const BoundingBox& box, const std::vector<int>& per_axis) {
  const int d = box.dim();
  if (static_cast<int>(per_axis.size()) != d)
    throw DimensionError("per-axis counts must match box dimension");
  for (int c : per_axis)
    if (c < 2) throw Error("control grid needs >= 2 points per axis");
  if ((box.max - box.min).minCoeff() <= 0.0)
    throw DegenerateShape("degenerate bounding box");

  int total = 1;
  for (int c : per_axis) total *= c;
  Eigen::MatrixXd grid(total, d);
  std::vector<int> idx(d, 0);
  for (int row = 0; row < total; ++row) {
    for (int a = 0; a < d; ++a) {
      const double frac = static_cast<double>(idx[a]) / (per_axis[a] - 1);
      grid(row, a) = box.min[a] + frac * (box.max[a] - box.min[a]);
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < per_axis[a]) break;
      idx[a] = 0;
    }
  }
  return grid;
}

std::vector<int> default_grid_shape(const BoundingBox& box) {
  if (box.dim() == 3) return {5, 5, 5};
  const Eigen::VectorXd extent = box.max - box.min;
  if (extent[0] >= extent[1]) return {4, 3};
  return {3, 4};
}

nlohmann::json transform_to_json(const Transform& t) {
  nlohmann::json j;
  if (const auto* r2 = std::get_if<Rotation2D>(&t)) {
    j["family"] = "rotation2d";
    j["angle"] = r2->angle;
    return j;
  }
  if (const auto* r3 = std::get_if<Rotation3D>(&t)) {
    j["family"] = "rotation3d";
    j["quaternion"] = {r3->q[0], r3->q[1], r3->q[2], r3->q[3]};
    return j;
  }
  const auto& tps = std::get<ThinPlateSpline>(t);
  const int d = tps.dim();
  j["family"] = "tps";
  j["dim"] = d;
  auto dump = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < m.rows(); ++i)
      rows.emplace_back(m.row(i).begin(), m.row(i).end());
    return rows;
  };
  j["affine"] = dump(tps.affine);
  j["translation"] = std::vector<double>(tps.translation.begin(), tps.translation.end());
  j["control_points"] = dump(tps.control_points);
  j["weights"] = dump(tps.weights);
  return j;
}

Transform transform_from_json(const nlohmann::json& j) {
  const std::string family = j.at("family");
  if (family == "rotation2d") return Rotation2D{j.at("angle").get<double>()};
  if (family == "rotation3d") {
    Rotation3D r;
    const auto q = j.at("quaternion");
    for (int i = 0; i < 4; ++i) r.q[i] = q.at(i).get<double>();
    r.q.normalize();
    return r;
  }
  if (family != "tps") throw ParseError("unknown transform family: " + family);
  auto load = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.at(0).size());
    for (int i = 0; i < m.rows(); ++i)
      for (int c = 0; c < m.cols(); ++c) m(i, c) = rows.at(i).at(c).get<double>();
    return m;
  };
  ThinPlateSpline tps;
  tps.affine = load(j.at("affine"));
  const auto tr = j.at("translation");
  tps.translation.resize(tr.size());
  for (int i = 0; i < tps.translation.size(); ++i) tps.translation[i] = tr.at(i).get<double>();
  tps.control_points = load(j.at("control_points"));
  tps.weights = load(j.at("weights"));
  return tps;
}

}  // namespace dirreg
