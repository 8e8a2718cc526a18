#include "dirreg/costs.hpp"

#include <cmath>

#include "dirreg/normals.hpp"

namespace dirreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::ArrayXXd pairwise_sq_dist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::ArrayXXd d = (-2.0 * a * b.transpose()).array();
  d.colwise() += a.rowwise().squaredNorm().array();
  d.rowwise() += b.rowwise().squaredNorm().array().transpose();
  return d.max(0.0);
}

// Elementwise log C3 for a matrix of concentrations. kappa entries are >= 0.
// Vectorized form of log_c3 for the bulk branch (kappa > 1e-4); the few tiny
// entries are patched with the scalar series afterwards.
Eigen::ArrayXXd log_c3_array(const Eigen::ArrayXXd& kappa) {
  constexpr double log_4pi = 2.5310242469692907930;
  constexpr double log_2 = 0.69314718055994530942;
  const Eigen::ArrayXXd safe = kappa.max(1e-4);
  Eigen::ArrayXXd out =
      safe.log() - log_4pi - safe - (-2.0 * safe).exp().unaryExpr([](double v) {
        return std::log1p(-v);
      }) + log_2;
  for (Eigen::Index i = 0; i < kappa.size(); ++i)
    if (kappa(i) <= 1e-4) out(i) = log_c3(kappa(i));
  return out;
}

// Directional data for cost evaluation: 2D normals embedded in S^2 so the C3
// closed form applies throughout.
struct DirData {
  Eigen::MatrixXd u1, u2;
  int du = 3;
};

DirData directional(const OrientedPointSet& model, const OrientedPointSet& target) {
  if (!model.has_normals() || !target.has_normals())
    throw MissingNormals("cost family requires normals on both shapes");
  DirData d;
  d.u1 = model.dim() == 2 ? embed_s1_in_s2(model.normals) : model.normals;
  d.u2 = target.dim() == 2 ? embed_s1_in_s2(target.normals) : target.normals;
  return d;
}

void check_shapes(const OrientedPointSet& model, const OrientedPointSet& target) {
  if (model.size() == 0 || target.size() == 0) throw EmptyShape("empty shape in cost");
  if (model.dim() != target.dim()) throw DimensionError("shape dimensions differ");
}

double log_gauss_const(double h1, double h2, int d) {
  const double s = h1 * h1 + h2 * h2;
  if (s <= 0.0) throw DegenerateKernel("h1 = h2 = 0");
  return -0.5 * d * std::log(2.0 * kPi * s);
}

// log <vMF(u_i,k1)|vMF(u_j,k1)> over all model pairs, via the combined
// concentration k1 sqrt(2 + 2 u_i.u_j).
Eigen::ArrayXXd log_vmf_self(const Eigen::MatrixXd& u1, double kappa1, int du) {
  const Eigen::ArrayXXd dot = (u1 * u1.transpose()).array().min(1.0).max(-1.0);
  const Eigen::ArrayXXd kap = kappa1 * (2.0 + 2.0 * dot).max(0.0).sqrt();
  return 2.0 * log_cd(kappa1, du) - log_c3_array(kap);
}

Eigen::ArrayXXd log_vmf_cross(const DirData& dir, double kappa1, double kappa2,
                              bool vmf_variant) {
  const Eigen::ArrayXXd dot = (dir.u1 * dir.u2.transpose()).array().min(1.0).max(-1.0);
  if (!vmf_variant) return log_cd(kappa1, dir.du) + kappa1 * dot;
  const Eigen::ArrayXXd kap =
      (kappa1 * kappa1 + kappa2 * kappa2 + 2.0 * kappa1 * kappa2 * dot).max(0.0).sqrt();
  return log_cd(kappa1, dir.du) + log_cd(kappa2, dir.du) - log_c3_array(kap);
}

// Deterministic accumulation: per-row sums first, rows added in index order.
double sum_rows(const Eigen::ArrayXXd& terms) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < terms.rows(); ++i) total += terms.row(i).sum();
  return total;
}

}  // namespace

CostFamily cost_family_from_string(const std::string& name) {
  if (name == "x") return CostFamily::cx;
  if (name == "x-delta") return CostFamily::cx_delta;
  if (name == "u") return CostFamily::cu;
  if (name == "u-delta") return CostFamily::cu_delta;
  if (name == "xu") return CostFamily::cxu;
  if (name == "xu-delta") return CostFamily::cxu_delta;
  throw Error("unknown cost family: " + name);
}

std::string to_string(CostFamily family) {
  switch (family) {
    case CostFamily::cx: return "x";
    case CostFamily::cx_delta: return "x-delta";
    case CostFamily::cu: return "u";
    case CostFamily::cu_delta: return "u-delta";
    case CostFamily::cxu: return "xu";
    case CostFamily::cxu_delta: return "xu-delta";
  }
  return "?";
}

bool family_needs_normals(CostFamily family) {
  return family != CostFamily::cx && family != CostFamily::cx_delta;
}

void CostSpec::validate(const Transform& t) const {
  kernel.validate();
  const bool is_tps = std::holds_alternative<ThinPlateSpline>(t);
  if (mode == CostMode::rigid_scalar_product && is_tps)
    throw Error("rigid scalar-product mode requires a rotation transform");
  if ((family == CostFamily::cu || family == CostFamily::cu_delta) && is_tps)
    throw FamilyMismatch("normal-only cost families are not valid for TPS transforms");
}

double cost_x(const OrientedPointSet& model, const OrientedPointSet& target,
              const KernelParams& k, const CorrespondenceSet* corr) {
  check_shapes(model, target);
  const int d = model.dim();
  const int n1 = model.size(), n2 = target.size();

  if (corr) {
    const int n = static_cast<int>(corr->pairs.size());
    double self = 0.0, cross = 0.0;
    const double log_cs = log_gauss_const(k.h1, k.h1, d);
    const double log_cc = log_gauss_const(k.h1, k.h2, d);
    const double s = 2.0 * (k.h1 * k.h1 + k.h2 * k.h2);
    for (const auto& [i, j] : corr->pairs) {
      self += std::exp(log_cs);
      cross += std::exp(log_cc - (model.points.row(i) - target.points.row(j)).squaredNorm() / s);
    }
    return self / n - 2.0 * cross / n;
  }

  const Eigen::ArrayXXd sd1 = pairwise_sq_dist(model.points, model.points);
  const Eigen::ArrayXXd sd12 = pairwise_sq_dist(model.points, target.points);
  const double self =
      sum_rows((log_gauss_const(k.h1, k.h1, d) - sd1 / (4.0 * k.h1 * k.h1)).exp());
  const double sc = 2.0 * (k.h1 * k.h1 + k.h2 * k.h2);
  const double cross = sum_rows((log_gauss_const(k.h1, k.h2, d) - sd12 / sc).exp());
  return self / (static_cast<double>(n1) * n1) -
         2.0 * cross / (static_cast<double>(n1) * n2);
}

double cost_u(const OrientedPointSet& model, const OrientedPointSet& target,
              const KernelParams& k, bool vmf_variant, CostMode mode) {
  check_shapes(model, target);
  const DirData dir = directional(model, target);
  const int n1 = model.size(), n2 = target.size();

  const double cross =
      sum_rows(log_vmf_cross(dir, k.kappa1, k.kappa2, vmf_variant).exp());
  const double cross_term = 2.0 * cross / (static_cast<double>(n1) * n2);
  if (mode == CostMode::rigid_scalar_product) return -cross_term;

  const double self = sum_rows(log_vmf_self(dir.u1, k.kappa1, dir.du).exp());
  return self / (static_cast<double>(n1) * n1) - cross_term;
}

double cost_xu(const OrientedPointSet& model, const OrientedPointSet& target,
               const KernelParams& k, bool vmf_variant, CostMode mode,
               const CorrespondenceSet* corr) {
  check_shapes(model, target);
  const DirData dir = directional(model, target);
  const int d = model.dim();
  const int n1 = model.size(), n2 = target.size();

  if (corr) {
    const int n = static_cast<int>(corr->pairs.size());
    const double log_cc = log_gauss_const(k.h1, k.h2, d);
    const double sc = 2.0 * (k.h1 * k.h1 + k.h2 * k.h2);
    const double log_dir_const = log_cd(k.kappa1, dir.du) +
                                 (vmf_variant ? log_cd(k.kappa2, dir.du) : 0.0);
    double self = 0.0, cross = 0.0;
    for (const auto& [i, j] : corr->pairs) {
      // diagonal self term: zero distance, aligned normal with itself
      self += std::exp(2.0 * log_cd(k.kappa1, dir.du) - log_cd(2.0 * k.kappa1, dir.du) +
                       log_gauss_const(k.h1, k.h1, d));
      const double dot = dir.u1.row(i).dot(dir.u2.row(j));
      double log_dir;
      if (vmf_variant) {
        const double kap = std::sqrt(std::max(
            0.0, k.kappa1 * k.kappa1 + k.kappa2 * k.kappa2 + 2.0 * k.kappa1 * k.kappa2 * dot));
        log_dir = log_dir_const - log_cd(kap, dir.du);
      } else {
        log_dir = log_dir_const + k.kappa1 * dot;
      }
      const double sq = (model.points.row(i) - target.points.row(j)).squaredNorm();
      cross += std::exp(log_dir + log_cc - sq / sc);
    }
    const double cross_term = 2.0 * cross / n;
    if (mode == CostMode::rigid_scalar_product) return -cross_term;
    return self / n - cross_term;
  }

  const Eigen::ArrayXXd sd12 = pairwise_sq_dist(model.points, target.points);
  const double sc = 2.0 * (k.h1 * k.h1 + k.h2 * k.h2);
  const Eigen::ArrayXXd log_cross = log_vmf_cross(dir, k.kappa1, k.kappa2, vmf_variant) +
                                    log_gauss_const(k.h1, k.h2, d) - sd12 / sc;
  const double cross_term =
      2.0 * sum_rows(log_cross.exp()) / (static_cast<double>(n1) * n2);
  if (mode == CostMode::rigid_scalar_product) return -cross_term;

  const Eigen::ArrayXXd sd1 = pairwise_sq_dist(model.points, model.points);
  const Eigen::ArrayXXd log_self = log_vmf_self(dir.u1, k.kappa1, dir.du) +
                                   log_gauss_const(k.h1, k.h1, d) -
                                   sd1 / (4.0 * k.h1 * k.h1);
  return sum_rows(log_self.exp()) / (static_cast<double>(n1) * n1) - cross_term;
}

double cost_value(const CostSpec& spec, const OrientedPointSet& model,
                  const OrientedPointSet& target, const Transform& t) {
  spec.validate(t);
  OrientedPointSet moved = apply_transform(t, model, NormalMode::jacobian);
  const CorrespondenceSet* corr =
      spec.correspondences ? &*spec.correspondences : nullptr;
  KernelParams k = spec.kernel;
  switch (spec.family) {
    case CostFamily::cx:
      return cost_x(moved, target, k, corr);
    case CostFamily::cx_delta:
      k.h2 = 0.0;
      return cost_x(moved, target, k, corr);
    case CostFamily::cu:
      return cost_u(moved, target, k, true, spec.mode);
    case CostFamily::cu_delta:
      return cost_u(moved, target, k, false, spec.mode);
    case CostFamily::cxu:
      return cost_xu(moved, target, k, true, spec.mode, corr);
    case CostFamily::cxu_delta:
      return cost_xu(moved, target, k, false, spec.mode, corr);
  }
  throw Error("unreachable cost family");
}

}  // namespace dirreg
