#include "dirreg/harness.hpp"

#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "dirreg/normals.hpp"

namespace dirreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double tps_kernel(double r, int d) {
  if (d == 2) return r > 0.0 ? r * r * std::log(r) : 0.0;
  return r;
}

// 9 anchor points on the bounding box: corners + edge midpoints + center (2D),
// corners + center (3D).
Eigen::MatrixXd anchor_points(const BoundingBox& box) {
  const int d = box.dim();
  const Eigen::VectorXd mid = 0.5 * (box.min + box.max);
  Eigen::MatrixXd anchors(9, d);
  if (d == 2) {
    const double xs[3] = {box.min[0], mid[0], box.max[0]};
    const double ys[3] = {box.min[1], mid[1], box.max[1]};
    int row = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        anchors(row, 0) = xs[i];
        anchors(row, 1) = ys[j];
        ++row;
      }
  } else {
    int row = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          anchors(row, 0) = i ? box.max[0] : box.min[0];
          anchors(row, 1) = j ? box.max[1] : box.min[1];
          anchors(row, 2) = k ? box.max[2] : box.min[2];
          ++row;
        }
    anchors.row(8) = mid.transpose();
  }
  return anchors;
}

struct MidpointCache {
  std::map<std::pair<int, int>, int> edges;
  int midpoint(std::vector<Eigen::Vector3d>& verts, int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = edges.find(key);
    if (it != edges.end()) return it->second;
    verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
    const int idx = static_cast<int>(verts.size()) - 1;
    edges[key] = idx;
    return idx;
  }
};

}  // namespace

// Interpolating TPS mapping anchors onto targets (standard side-condition fit).
ThinPlateSpline fit_tps(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& targets) {
  const int n = static_cast<int>(anchors.rows());
  const int d = static_cast<int>(anchors.cols());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + d + 1, n + d + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = tps_kernel((anchors.row(i) - anchors.row(j)).norm(), d);
  for (int i = 0; i < n; ++i) {
    m(i, n) = 1.0;
    m(n, i) = 1.0;
    for (int c = 0; c < d; ++c) {
      m(i, n + 1 + c) = anchors(i, c);
      m(n + 1 + c, i) = anchors(i, c);
    }
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + d + 1, d);
  rhs.topRows(n) = targets;
  const Eigen::MatrixXd sol = m.fullPivLu().solve(rhs);

  ThinPlateSpline tps;
  tps.control_points = anchors;
  tps.weights = sol.topRows(n);
  tps.translation = sol.row(n).transpose();
  tps.affine = sol.bottomRows(d).transpose();
  return tps;
}

OrientedPointSet gen_curve(int n, std::uint64_t seed, double amplitude) {
  if (n < 8) throw Error("gen_curve needs n >= 8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.0, amplitude);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::array<double, 4> a{}, phi{};
  for (int k = 0; k < 4; ++k) {
    a[k] = amplitude > 0.0 ? amp(rng) : 0.0;
    phi[k] = phase(rng);
  }

  OrientedPointSet curve;
  curve.points.resize(n, 2);
  curve.normals.resize(n, 2);
  curve.connectivity = OrientedPointSet::Connectivity::closed_polyline;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * kPi * i / n;
    double r = 1.0, dr = 0.0;
    for (int k = 0; k < 4; ++k) {
      const int freq = k + 2;
      r += a[k] * std::cos(freq * t + phi[k]);
      dr -= a[k] * freq * std::sin(freq * t + phi[k]);
    }
    const double c = std::cos(t), s = std::sin(t);
    curve.points(i, 0) = r * c;
    curve.points(i, 1) = r * s;
    // tangent = r'(cos,sin) + r(-sin,cos); outward normal = (ty, -tx)
    Eigen::Vector2d tangent(dr * c - r * s, dr * s + r * c);
    tangent.normalize();
    curve.normals(i, 0) = tangent[1];
    curve.normals(i, 1) = -tangent[0];
  }
  return curve;
}

OrientedPointSet gen_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    MidpointCache cache;
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = cache.midpoint(verts, f[0], f[1]);
      const int bc = cache.midpoint(verts, f[1], f[2]);
      const int ca = cache.midpoint(verts, f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  OrientedPointSet mesh;
  mesh.points.resize(verts.size(), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.points.row(i) = verts[i].transpose();
  mesh.faces = std::move(faces);
  mesh.connectivity = OrientedPointSet::Connectivity::mesh;
  mesh.normals = normals_mesh(mesh.points, mesh.faces);
  return mesh;
}

OrientedPointSet gen_torus(int n_major, int n_minor, double major_radius,
                           double minor_radius, double squash) {
  if (n_major < 3 || n_minor < 3) throw Error("torus needs >= 3 segments per ring");
  OrientedPointSet mesh;
  mesh.points.resize(n_major * n_minor, 3);
  for (int i = 0; i < n_major; ++i) {
    const double u = 2.0 * kPi * i / n_major;
    for (int j = 0; j < n_minor; ++j) {
      const double v = 2.0 * kPi * j / n_minor;
      const int row = i * n_minor + j;
      const double ring = major_radius + minor_radius * std::cos(v);
      mesh.points(row, 0) = ring * std::cos(u);
      mesh.points(row, 1) = ring * std::sin(u);
      mesh.points(row, 2) = squash * minor_radius * std::sin(v);
    }
  }
  for (int i = 0; i < n_major; ++i) {
    const int i1 = (i + 1) % n_major;
    for (int j = 0; j < n_minor; ++j) {
      const int j1 = (j + 1) % n_minor;
      const int a = i * n_minor + j, b = i1 * n_minor + j;
      const int c = i1 * n_minor + j1, d = i * n_minor + j1;
      mesh.faces.push_back({a, b, c});
      mesh.faces.push_back({a, c, d});
    }
  }
  mesh.connectivity = OrientedPointSet::Connectivity::mesh;
  mesh.normals = normals_mesh(mesh.points, mesh.faces);
  return mesh;
}

OrientedPointSet perturb_radial(const OrientedPointSet& mesh, double amplitude,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> freq(1.0, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::array<Eigen::Vector3d, 3> dirs;
  std::array<double, 3> f{}, ph{};
  for (int k = 0; k < 3; ++k) {
    dirs[k] = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
    f[k] = freq(rng);
    ph[k] = phase(rng);
  }

  OrientedPointSet out = mesh;
  for (int i = 0; i < mesh.size(); ++i) {
    const Eigen::Vector3d p = mesh.points.row(i).transpose();
    const Eigen::Vector3d dir = p.normalized();
    double bump = 0.0;
    for (int k = 0; k < 3; ++k)
      bump += std::cos(kPi * f[k] * dirs[k].dot(dir) + ph[k]);
    out.points.row(i) = ((1.0 + amplitude * bump / 3.0) * p).transpose();
  }
  if (!out.faces.empty()) out.normals = normals_mesh(out.points, out.faces);
  return out;
}

Transform deform_tps_transform(const OrientedPointSet& shape, int degree,
                               std::uint64_t seed) {
  if (degree < 1) throw Error("deformation degree must be >= 1");
  const BoundingBox box = bounding_box(shape);
  const Eigen::MatrixXd anchors = anchor_points(box);
  const double sigma = 0.02 * degree * box.diagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixXd targets = anchors;
  for (int i = 0; i < targets.rows(); ++i)
    for (int c = 0; c < targets.cols(); ++c) targets(i, c) += gauss(rng);
  return fit_tps(anchors, targets);
}

OrientedPointSet deform_tps(const OrientedPointSet& shape, int degree,
                            std::uint64_t seed) {
  return apply_transform(deform_tps_transform(shape, degree, seed), shape,
                         NormalMode::jacobian);
}

RemovalResult remove_fraction(const OrientedPointSet& shape, double fraction,
                              std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw InvalidFraction("removal fraction must be in [0, 1)");
  const int n = shape.size();
  // tolerate binary rounding in fraction * n (0.07 * 100 is not exactly 7)
  const int drop = static_cast<int>(std::ceil(fraction * n - 1e-9));
  const int keep = n - drop;
  const SubsampleResult kept = subsample(shape, keep, seed);
  return {kept.shape, kept.indices};
}

OrientedPointSet add_gauss_noise(const OrientedPointSet& shape, double sigma,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  OrientedPointSet out = shape;
  for (int i = 0; i < out.points.rows(); ++i)
    for (int c = 0; c < out.points.cols(); ++c) out.points(i, c) += gauss(rng);
  out.normals.resize(0, 0);  // caller must re-estimate
  return out;
}

OrientedPointSet rotate_shape(const OrientedPointSet& shape, const Transform& rot) {
  return apply_transform(rot, shape);
}

double mean_error(const Eigen::MatrixXd& transformed_model, const Eigen::MatrixXd& target) {
  if (transformed_model.rows() != target.rows() ||
      transformed_model.cols() != target.cols())
    throw CountMismatch("mean_error needs index-aligned sets of equal size");
  return (transformed_model - target).rowwise().norm().mean();
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "rigid2d") return Scenario::rigid2d;
  if (name == "rigid2d_missing") return Scenario::rigid2d_missing;
  if (name == "nonrigid2d") return Scenario::nonrigid2d;
  if (name == "nonrigid2d_rot") return Scenario::nonrigid2d_rot;
  if (name == "nonrigid2d_missing") return Scenario::nonrigid2d_missing;
  if (name == "rigid3d_same") return Scenario::rigid3d_same;
  if (name == "rigid3d_resampled") return Scenario::rigid3d_resampled;
  if (name == "rigid3d_noise") return Scenario::rigid3d_noise;
  if (name == "nonrigid3d") return Scenario::nonrigid3d;
  throw Error("unknown scenario: " + name);
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::rigid2d: return "rigid2d";
    case Scenario::rigid2d_missing: return "rigid2d_missing";
    case Scenario::nonrigid2d: return "nonrigid2d";
    case Scenario::nonrigid2d_rot: return "nonrigid2d_rot";
    case Scenario::nonrigid2d_missing: return "nonrigid2d_missing";
    case Scenario::rigid3d_same: return "rigid3d_same";
    case Scenario::rigid3d_resampled: return "rigid3d_resampled";
    case Scenario::rigid3d_noise: return "rigid3d_noise";
    case Scenario::nonrigid3d: return "nonrigid3d";
  }
  return "?";
}

namespace {

bool is_rigid(Scenario s) {
  return s == Scenario::rigid2d || s == Scenario::rigid2d_missing ||
         s == Scenario::rigid3d_same || s == Scenario::rigid3d_resampled ||
         s == Scenario::rigid3d_noise;
}

bool is_3d(Scenario s) {
  return s == Scenario::rigid3d_same || s == Scenario::rigid3d_resampled ||
         s == Scenario::rigid3d_noise || s == Scenario::nonrigid3d;
}

TransformFamily family_for(Scenario s) {
  if (!is_rigid(s)) return TransformFamily::tps;
  return is_3d(s) ? TransformFamily::rotation3d : TransformFamily::rotation2d;
}

Rotation3D random_rotation3d(double magnitude_rad, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Vector3d axis =
      Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
  return Rotation3D::from_axis_angle(axis, magnitude_rad);
}

AnnealingSchedule schedule_for(const ExperimentSpec& spec, TransformFamily family,
                               const OrientedPointSet& model) {
  AnnealingSchedule sched = default_schedule(family, model);
  if (spec.annealing_steps > 0 && spec.annealing_steps != sched.steps) {
    const int steps = spec.annealing_steps;
    sched.h_final = sched.h_init * std::pow(sched.h_step, steps - 1);
    sched.kappa_final = sched.kappa_init * std::pow(sched.kappa_step, steps - 1);
    sched.steps = steps;
    sched.validate();
  }
  return sched;
}

int noise_knn(double sigma) {
  if (sigma <= 0.0011) return 40;
  if (sigma <= 0.0021) return 60;
  return 120;
}

}  // namespace

ExperimentRow run_trial(const ExperimentSpec& spec, double sweep_value, int trial,
                        CostFamily family) {
  ExperimentRow row;
  row.scenario = to_string(spec.scenario);
  row.sweep_value = sweep_value;
  row.trial = trial;
  row.family = to_string(family);

  const std::uint64_t seed =
      mix_seed(spec.seed, static_cast<std::uint64_t>(sweep_value * 1e6), trial);
  std::mt19937_64 rng(seed);

  const TransformFamily tf = family_for(spec.scenario);
  CostSpec cost;
  cost.family = family;
  cost.mode = is_rigid(spec.scenario) ? CostMode::rigid_scalar_product : CostMode::full;

  RegisterOptions opts;
  opts.seed = seed;
  opts.subsample_m = spec.subsample_m;
  opts.use_correspondences = spec.use_correspondences && !is_rigid(spec.scenario);
  // rotations have symmetric local minima (curves at 180 degrees, blobby
  // spheres where the coarse stages favour a wrong basin); use the restarts
  opts.multi_start = is_rigid(spec.scenario) ? (is_3d(spec.scenario) ? 10 : 6) : 1;

  OrientedPointSet model, reg_target;
  Eigen::MatrixXd eval_model, eval_target;  // index-aligned ground truth pair

  if (!is_3d(spec.scenario)) {
    model = normalize_to_unit_box(gen_curve(spec.n_points, seed)).shape;
    switch (spec.scenario) {
      case Scenario::rigid2d: {
        const Rotation2D rot{sweep_value * kPi / 180.0};
        reg_target = rotate_shape(model, rot);
        eval_model = model.points;
        eval_target = reg_target.points;
        break;
      }
      case Scenario::rigid2d_missing: {
        const Rotation2D rot{60.0 * kPi / 180.0};
        const OrientedPointSet full = rotate_shape(model, rot);
        reg_target = remove_fraction(full, sweep_value, seed + 1).shape;
        eval_model = model.points;
        eval_target = full.points;
        break;
      }
      case Scenario::nonrigid2d: {
        reg_target = deform_tps(model, static_cast<int>(sweep_value), seed + 1);
        eval_model = model.points;
        eval_target = reg_target.points;
        break;
      }
      case Scenario::nonrigid2d_rot: {
        const OrientedPointSet warped = deform_tps(model, 4, seed + 1);
        reg_target = rotate_shape(warped, Rotation2D{sweep_value * kPi / 180.0});
        eval_model = model.points;
        eval_target = reg_target.points;
        break;
      }
      case Scenario::nonrigid2d_missing: {
        const OrientedPointSet full_target = deform_tps(model, 4, seed + 1);
        const RemovalResult red = remove_fraction(model, sweep_value, seed + 2);
        eval_target.resize(red.shape.size(), 2);
        for (int i = 0; i < red.shape.size(); ++i)
          eval_target.row(i) = full_target.points.row(red.kept[i]);
        model = red.shape;
        reg_target = full_target;
        eval_model = model.points;
        break;
      }
      default:
        throw Error("unhandled 2D scenario");
    }
  } else {
    // The resampling scenarios draw two independent subsamples; on the
    // coarse mesh two 500-point draws from 642 vertices share most of their
    // points, which quietly restores the one-to-one correspondence the
    // scenario is meant to break. Use a finer sphere there.
    const bool resampled = spec.scenario == Scenario::rigid3d_resampled ||
                           spec.scenario == Scenario::rigid3d_noise;
    OrientedPointSet mesh = gen_icosphere(resampled ? 4 : 3);
    mesh = perturb_radial(mesh, 0.15, seed);
    mesh = normalize_to_unit_box(mesh).shape;
    const double mag_deg =
        spec.scenario == Scenario::rigid3d_noise ? 30.0 : sweep_value;
    const Rotation3D rot = random_rotation3d(mag_deg * kPi / 180.0, rng);
    switch (spec.scenario) {
      case Scenario::rigid3d_same: {
        model = subsample(mesh, spec.n_points, seed + 1).shape;
        reg_target = rotate_shape(model, rot);
        eval_model = model.points;
        eval_target = reg_target.points;
        break;
      }
      case Scenario::rigid3d_resampled: {
        model = subsample(mesh, spec.n_points, seed + 1).shape;
        reg_target = rotate_shape(subsample(mesh, spec.n_points, seed + 2).shape, rot);
        eval_model = mesh.points;
        eval_target = rotate_shape(mesh, rot).points;
        break;
      }
      case Scenario::rigid3d_noise: {
        model = subsample(mesh, spec.n_points, seed + 1).shape;
        OrientedPointSet clean = rotate_shape(subsample(mesh, spec.n_points, seed + 2).shape, rot);
        reg_target = add_gauss_noise(clean, sweep_value, seed + 3);
        reg_target.normals =
            normals_knn_pca(reg_target.points, noise_knn(sweep_value));
        eval_model = mesh.points;
        eval_target = rotate_shape(mesh, rot).points;
        break;
      }
      case Scenario::nonrigid3d: {
        model = subsample(mesh, spec.n_points, seed + 1).shape;
        reg_target = deform_tps(model, static_cast<int>(sweep_value), seed + 2);
        eval_model = model.points;
        eval_target = reg_target.points;
        break;
      }
      default:
        throw Error("unhandled 3D scenario");
    }
  }

  const AnnealingSchedule sched = schedule_for(spec, tf, model);
  const OptimizeReport report =
      register_shapes(model, reg_target, cost, tf, sched, opts);

  row.error = mean_error(apply_to_points(report.transform, eval_model), eval_target);
  row.seconds = report.seconds;
  for (const auto& st : report.stages) row.iterations += st.iterations;
  return row;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw Error("experiment needs trials >= 1");
  ExperimentResult result;
  for (double value : spec.sweep) {
    for (int trial = 0; trial < spec.trials; ++trial) {
      for (CostFamily family : spec.families) {
        try {
          result.rows.push_back(run_trial(spec, value, trial, family));
        } catch (const std::exception&) {
          ExperimentRow row;
          row.scenario = to_string(spec.scenario);
          row.sweep_value = value;
          row.trial = trial;
          row.family = to_string(family);
          result.rows.push_back(row);  // error stays NaN
        }
      }
    }
  }
  return result;
}

std::string ExperimentResult::csv() const {
  std::ostringstream out;
  out << "scenario,sweep_value,trial,family,mean_error,seconds,iterations\n";
  out.precision(9);
  for (const auto& r : rows)
    out << r.scenario << ',' << r.sweep_value << ',' << r.trial << ',' << r.family
        << ',' << r.error << ',' << r.seconds << ',' << r.iterations << '\n';
  return out.str();
}

std::string ExperimentResult::summary_json() const {
  std::map<std::pair<double, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.sweep_value, r.family}].push_back(r.error);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& [key, errs] : groups) {
    double mean = 0.0;
    int valid = 0;
    for (double e : errs)
      if (std::isfinite(e)) { mean += e; ++valid; }
    mean = valid ? mean / valid : std::numeric_limits<double>::quiet_NaN();
    double var = 0.0;
    for (double e : errs)
      if (std::isfinite(e)) var += (e - mean) * (e - mean);
    const double stderr_mean =
        valid > 1 ? std::sqrt(var / (valid - 1) / valid) : 0.0;
    j.push_back({{"sweep_value", key.first},
                 {"family", key.second},
                 {"mean_error", mean},
                 {"standard_error", stderr_mean},
                 {"trials", errs.size()},
                 {"failed", errs.size() - valid}});
  }
  return j.dump(2);
}

}  // namespace dirreg
