#include "dirreg/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace dirreg {

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& theta) {
  if (!std::isfinite(f(theta))) throw NonFiniteObjective("objective not finite at theta");
  const int n = static_cast<int>(theta.size());
  Eigen::VectorXd grad(n);
  Eigen::VectorXd probe = theta;
  for (int i = 0; i < n; ++i) {
    const double eps = std::max(1e-6, 1e-6 * std::abs(theta[i]));
    probe[i] = theta[i] + eps;
    const double fp = f(probe);
    probe[i] = theta[i] - eps;
    const double fm = f(probe);
    probe[i] = theta[i];
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

namespace {

// Eigenvectors of the point covariance, ascending eigenvalue order.
Eigen::MatrixXd principal_axes(const Eigen::MatrixXd& pts) {
  const Eigen::MatrixXd c = pts.rowwise() - pts.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.transpose() * c);
  return es.eigenvectors();
}

// Ridge-regularized least-squares fit of a TPS (with proto's control grid)
// mapping x_i -> y_i. Linear in all parameters, so one normal-equations solve.
ThinPlateSpline fit_tps_to_pairs(const ThinPlateSpline& proto, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& y) {
  const int d = proto.dim();
  const int nc = static_cast<int>(proto.control_points.rows());
  const int n = static_cast<int>(x.rows());
  const int p = d + 1 + nc;
  Eigen::MatrixXd m(n, p);
  for (int i = 0; i < n; ++i) {
    m.block(i, 0, 1, d) = x.row(i);
    m(i, d) = 1.0;
    for (int k = 0; k < nc; ++k) {
      const double r = (x.row(i) - proto.control_points.row(k)).norm();
      m(i, d + 1 + k) = d == 2 ? (r > 0.0 ? r * r * std::log(r) : 0.0) : r;
    }
  }
  Eigen::MatrixXd gram = m.transpose() * m;
  for (int k = 0; k < nc; ++k) gram(d + 1 + k, d + 1 + k) += 1e-8 * n;  // weights only
  const Eigen::MatrixXd sol = gram.ldlt().solve(m.transpose() * y);
  ThinPlateSpline out = proto;
  out.affine = sol.topRows(d).transpose();
  out.translation = sol.row(d).transpose();
  out.weights = sol.bottomRows(nc);
  return out;
}

void project(Eigen::VectorXd& x, const std::optional<std::pair<int, int>>& block) {
  if (!block) return;
  auto seg = x.segment(block->first, block->second - block->first);
  const double norm = seg.norm();
  if (norm > 0.0) seg /= norm;
}

}  // namespace

MinimizeResult minimize_inner(const Objective& f, const Eigen::VectorXd& theta0,
                              const MinimizeOptions& opts) {
  const int n = static_cast<int>(theta0.size());
  MinimizeResult res;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  Eigen::VectorXd x = theta0;
  project(x, opts.unit_norm_block);
  double fx = eval(x);
  if (!std::isfinite(fx)) throw NonFiniteObjective("objective not finite at start");
  res.trace.push_back(fx);

  Eigen::VectorXd best_x = x;
  double best_f = fx;

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad = fd_gradient([&](const Eigen::VectorXd& p) { return eval(p); }, x);

  while (evals < opts.max_evals) {
    ++res.iterations;
    if (grad.norm() < opts.grad_tol) break;

    Eigen::VectorXd dir = -hinv * grad;
    if (dir.dot(grad) >= 0.0) {  // not a descent direction, reset
      hinv.setIdentity();
      dir = -grad;
    }

    // Armijo backtracking
    double step = 1.0;
    const double slope = grad.dot(dir);
    Eigen::VectorXd x_new;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40 && evals < opts.max_evals; ++ls) {
      x_new = x + step * dir;
      project(x_new, opts.unit_norm_block);
      f_new = eval(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }

    Eigen::VectorXd grad_new =
        fd_gradient([&](const Eigen::VectorXd& p) { return eval(p); }, x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }

    const double rel_change = std::abs(fx - f_new) / std::max(1.0, std::abs(fx));
    x = x_new;
    fx = f_new;
    grad = grad_new;
    res.trace.push_back(fx);
    if (fx < best_f) { best_f = fx; best_x = x; }
    if (rel_change < opts.rel_cost_tol) break;
  }

  res.x = best_x;
  res.f = best_f;
  res.evals = evals;
  return res;
}

AnnealingSchedule AnnealingSchedule::geometric(double h_init, double h_final,
                                               double kappa_init, double kappa_final,
                                               int steps) {
  AnnealingSchedule s;
  s.h_init = h_init;
  s.h_final = h_final;
  s.kappa_init = kappa_init;
  s.kappa_final = kappa_final;
  s.steps = steps;
  s.h_step = steps > 1 ? std::pow(h_final / h_init, 1.0 / (steps - 1)) : 1.0;
  s.kappa_step = steps > 1 ? std::pow(kappa_final / kappa_init, 1.0 / (steps - 1)) : 1.0;
  s.validate();
  return s;
}

void AnnealingSchedule::validate() const {
  if (steps < 1) throw ScheduleExhausted("annealing schedule needs steps >= 1");
  if (h_init <= 0.0 || h_final <= 0.0) throw Error("bandwidths must be > 0");
  if (h_init < h_final) throw Error("h_init must be >= h_final");
  if (kappa_init > kappa_final) throw Error("kappa_init must be <= kappa_final");
  if (steps > 1) {
    if (h_step <= 0.0 || h_step > 1.0) throw Error("h_step must be in (0, 1]");
    if (kappa_step < 1.0) throw Error("kappa_step must be >= 1");
    const double h_end = h_init * std::pow(h_step, steps - 1);
    const double k_end = kappa_init * std::pow(kappa_step, steps - 1);
    if (std::abs(h_end - h_final) > 1e-6 * h_final ||
        std::abs(k_end - kappa_final) > 1e-6 * kappa_final)
      throw Error("annealing schedule factors inconsistent with endpoints");
  }
}

double AnnealingSchedule::h_at(int step) const {
  return h_init * std::pow(h_step, step);
}

double AnnealingSchedule::kappa_at(int step) const {
  return kappa_init * std::pow(kappa_step, step);
}

AnnealingSchedule default_schedule(TransformFamily family, const OrientedPointSet& model) {
  const double diag = bounding_box(model).diagonal();
  int steps = 6;
  switch (family) {
    case TransformFamily::rotation2d: steps = 6; break;
    case TransformFamily::rotation3d: steps = 8; break;
    case TransformFamily::tps: steps = model.dim() == 2 ? 5 : 8; break;
  }
  AnnealingSchedule s;
  s.h_init = 0.5 * diag;
  s.h_step = 0.5;
  s.h_final = s.h_init * std::pow(s.h_step, steps - 1);
  s.kappa_init = 1.0;
  s.kappa_step = 2.0;
  s.kappa_final = s.kappa_init * std::pow(s.kappa_step, steps - 1);
  s.steps = steps;
  s.validate();
  return s;
}

Eigen::VectorXd pack_transform(const Transform& t) {
  if (const auto* r2 = std::get_if<Rotation2D>(&t)) {
    Eigen::VectorXd theta(1);
    theta[0] = r2->angle;
    return theta;
  }
  if (const auto* r3 = std::get_if<Rotation3D>(&t)) return r3->q;
  const auto& tps = std::get<ThinPlateSpline>(t);
  const int d = tps.dim();
  const int nc = static_cast<int>(tps.control_points.rows());
  Eigen::VectorXd theta(d * d + d + nc * d);
  int at = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) theta[at++] = tps.affine(i, j);
  for (int i = 0; i < d; ++i) theta[at++] = tps.translation[i];
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < d; ++j) theta[at++] = tps.weights(i, j);
  return theta;
}

Transform unpack_transform(const Eigen::VectorXd& theta, const Transform& prototype) {
  if (std::holds_alternative<Rotation2D>(prototype)) return Rotation2D{theta[0]};
  if (std::holds_alternative<Rotation3D>(prototype)) {
    Rotation3D r;
    r.q = theta;
    r.q.normalize();
    return r;
  }
  const auto& proto = std::get<ThinPlateSpline>(prototype);
  ThinPlateSpline tps = proto;
  const int d = proto.dim();
  const int nc = static_cast<int>(proto.control_points.rows());
  int at = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) tps.affine(i, j) = theta[at++];
  for (int i = 0; i < d; ++i) tps.translation[i] = theta[at++];
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < d; ++j) tps.weights(i, j) = theta[at++];
  return tps;
}

OptimizeReport register_shapes(const OrientedPointSet& model,
                               const OrientedPointSet& target, CostSpec spec,
                               TransformFamily family,
                               const AnnealingSchedule& sched,
                               const RegisterOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  sched.validate();
  if (family_needs_normals(spec.family) &&
      (!model.has_normals() || !target.has_normals()))
    throw MissingNormals("cost family requires normals");

  const SubsampleResult sub_model = subsample(model, opts.subsample_m, opts.seed);
  const SubsampleResult sub_target = subsample(target, opts.subsample_m, opts.seed + 1);

  Transform current;
  switch (family) {
    case TransformFamily::rotation2d:
      current = Rotation2D{0.0};
      break;
    case TransformFamily::rotation3d:
      current = Rotation3D{};
      break;
    case TransformFamily::tps: {
      const BoundingBox box = bounding_box(sub_model.shape);
      const auto shape = opts.grid_shape.empty() ? default_grid_shape(box) : opts.grid_shape;
      current = ThinPlateSpline::identity(control_grid(box, shape));
      break;
    }
  }

  MinimizeOptions mopts;
  mopts.max_evals = opts.max_evals_per_step;
  if (family == TransformFamily::rotation3d) mopts.unit_norm_block = {{0, 4}};

  std::mt19937_64 start_rng(opts.seed ^ 0x9e3779b97f4a7c15ull);

  // Annealing stages [begin, end) from a given initial transform.
  const auto anneal = [&](Transform init, int begin, int end) {
    CostSpec run_spec = spec;
    Transform cur = std::move(init);
    OptimizeReport rep;
    for (int step = begin; step < end; ++step) {
      StageReport stage;
      stage.h = sched.h_at(step);
      stage.kappa = sched.kappa_at(step);
      run_spec.kernel.h1 = run_spec.kernel.h2 = stage.h;
      run_spec.kernel.kappa1 = run_spec.kernel.kappa2 = stage.kappa;

      if (opts.use_correspondences &&
          (!opts.freeze_correspondences || !run_spec.correspondences)) {
        stage.alpha = sched.steps > 1
                          ? 1.0 - static_cast<double>(step) / (sched.steps - 1)
                          : 0.0;
        const Eigen::MatrixXd moved = apply_to_points(cur, sub_model.shape.points);
        run_spec.correspondences = estimate_correspondences(
            moved, sub_target.shape.points, stage.alpha, opts.corr_k);
      } else if (run_spec.correspondences) {
        stage.alpha = run_spec.correspondences->alpha;
      }

      const Objective f = [&](const Eigen::VectorXd& theta) {
        return cost_value(run_spec, sub_model.shape, sub_target.shape,
                          unpack_transform(theta, cur));
      };

      // TPS warm start: the stage's correspondence pairs pin down all TPS
      // parameters linearly, which puts the quasi-Newton loop straight into
      // the right basin. The cost decides whether the fit is an improvement.
      if (run_spec.correspondences && std::holds_alternative<ThinPlateSpline>(cur)) {
        const auto& pairs = run_spec.correspondences->pairs;
        const int d = sub_model.shape.dim();
        Eigen::MatrixXd xs(pairs.size(), d), ys(pairs.size(), d);
        for (size_t i = 0; i < pairs.size(); ++i) {
          xs.row(i) = sub_model.shape.points.row(pairs[i].first);
          ys.row(i) = sub_target.shape.points.row(pairs[i].second);
        }
        try {
          const ThinPlateSpline fitted =
              fit_tps_to_pairs(std::get<ThinPlateSpline>(cur), xs, ys);
          // Judge the fit with the full density cost, not the pair cost: a
          // warp threaded through wrong pairs scores perfectly on those same
          // pairs, so the pair cost cannot veto it.
          CostSpec judge = run_spec;
          judge.correspondences.reset();
          const double c_fit =
              cost_value(judge, sub_model.shape, sub_target.shape, fitted);
          if (std::isfinite(c_fit) &&
              c_fit < cost_value(judge, sub_model.shape, sub_target.shape, cur))
            cur = fitted;
        } catch (const Error&) {
          // fit produced a degenerate warp (e.g. folded jacobian); ignore it
        }
      }

      // Early stages only need to land in the right basin — the broad kernels
      // make the cost nearly flat there and grinding it down is wasted work.
      // The final (sharpest) stage gets the configured precision.
      mopts.rel_cost_tol =
          step + 1 < sched.steps
              ? std::max(1e-8, MinimizeOptions{}.rel_cost_tol)
              : std::min(1e-15, MinimizeOptions{}.rel_cost_tol);

      MinimizeResult best = minimize_inner(f, pack_transform(cur), mopts);
      Transform minned = unpack_transform(best.x, cur);
      if (run_spec.correspondences && std::holds_alternative<ThinPlateSpline>(cur)) {
        // Early-stage pairs can be badly wrong (the descriptor distance is
        // nearly uniform on an evenly sampled curve), and a TPS has enough
        // freedom to chase them into a mangled warp. Keep the minimizer's
        // result only when the full density cost agrees it helped.
        CostSpec judge = run_spec;
        judge.correspondences.reset();
        const double c_min =
            cost_value(judge, sub_model.shape, sub_target.shape, minned);
        if (std::isfinite(c_min) &&
            c_min < cost_value(judge, sub_model.shape, sub_target.shape, cur))
          cur = std::move(minned);
      } else {
        cur = std::move(minned);
      }
      stage.entry_cost = best.trace.front();
      stage.exit_cost = best.f;
      stage.iterations = best.iterations;
      stage.evals = best.evals;
      stage.trace = std::move(best.trace);
      rep.stages.push_back(std::move(stage));
    }
    rep.transform = cur;
    return rep;
  };

  OptimizeReport report;
  // Optional random restarts for local-minimum regimes (near-symmetric
  // shapes): every start runs the coarse half of the schedule and the
  // candidates are compared at the mid kernel — broad enough that the cost
  // is not yet a forest of per-point spikes, sharp enough that competing
  // basins separate by more than optimizer noise. Only the winner pays for
  // the expensive sharp stages.
  if (opts.multi_start > 1 && family != TransformFamily::tps && sched.steps > 1) {
    const int select_at = std::max(1, sched.steps - 3);
    OptimizeReport head = anneal(current, 0, select_at);

    // Alternative starts: principal-axes alignments of the two point sets
    // (every proper sign combination), padded with random rotations. They
    // deliberately skip the coarse stages — on near-symmetric shapes those
    // can funnel every start into the same shallow basin — and are only
    // polished at the last coarse stage, whose kernel all candidates share,
    // so the exit costs are directly comparable.
    std::vector<Transform> alts;
    const Eigen::MatrixXd v1 = principal_axes(sub_model.shape.points);
    const Eigen::MatrixXd v2 = principal_axes(sub_target.shape.points);
    const int d = static_cast<int>(v1.rows());
    for (int mask = 0; mask < (1 << d); ++mask) {
      Eigen::VectorXd sign(d);
      for (int i = 0; i < d; ++i) sign[i] = (mask >> i & 1) ? -1.0 : 1.0;
      const Eigen::MatrixXd rot = v2 * sign.asDiagonal() * v1.transpose();
      if (rot.determinant() < 0.0) continue;
      if (family == TransformFamily::rotation2d) {
        alts.push_back(Rotation2D{std::atan2(rot(1, 0), rot(0, 0))});
      } else {
        const Eigen::Matrix3d rot3 = rot;
        const Eigen::Quaterniond q(rot3);
        Rotation3D r3;
        r3.q << q.w(), q.x(), q.y(), q.z();
        alts.push_back(r3);
      }
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-M_PI, M_PI);
    while (static_cast<int>(alts.size()) + 1 < opts.multi_start) {
      if (family == TransformFamily::rotation2d) {
        alts.push_back(Rotation2D{uni(start_rng)});
      } else {
        Rotation3D r3;
        for (int i = 0; i < 4; ++i) r3.q[i] = gauss(start_rng);
        r3.q.normalize();
        alts.push_back(r3);
      }
    }
    for (auto& alt : alts) {
      OptimizeReport r = anneal(std::move(alt), select_at - 1, select_at);
      if (r.stages.back().exit_cost < head.stages.back().exit_cost)
        head = std::move(r);
    }
    OptimizeReport tail = anneal(head.transform, select_at, sched.steps);
    report = std::move(head);
    for (auto& st : tail.stages) report.stages.push_back(std::move(st));
    report.transform = tail.transform;
  } else {
    report = anneal(current, 0, sched.steps);
  }

  // Nothing constrains the angle during optimization, so it can pick up
  // whole turns in the flat early stages; report the canonical value.
  if (auto* rot = std::get_if<Rotation2D>(&report.transform))
    rot->angle = std::remainder(rot->angle, 2.0 * M_PI);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dirreg
