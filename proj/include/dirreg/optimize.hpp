#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dirreg/correspond.hpp"
#include "dirreg/costs.hpp"

namespace dirreg {

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Central differences with per-coordinate step max(1e-6, 1e-6 |theta_i|).
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& theta);

struct MinimizeOptions {
  int max_evals = 10000;
  double grad_tol = 1e-8;
  double rel_cost_tol = 1e-10;
  // half-open [begin, end) slice renormalized to unit length after every step
  std::optional<std::pair<int, int>> unit_norm_block;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  int iterations = 0;
  bool stalled = false;
  std::vector<double> trace;  // accepted cost values, initial first
};

// Quasi-Newton (BFGS inverse-Hessian update) with Armijo backtracking and
// finite-difference gradients. Returns the best point seen.
MinimizeResult minimize_inner(const Objective& f, const Eigen::VectorXd& theta0,
                              const MinimizeOptions& opts = {});

enum class TransformFamily { rotation2d, rotation3d, tps };

// Geometric decrease of h and increase of kappa across `steps` stages.
struct AnnealingSchedule {
  double h_init, h_final, h_step;
  double kappa_init, kappa_final, kappa_step;
  int steps = 1;

  static AnnealingSchedule geometric(double h_init, double h_final,
                                     double kappa_init, double kappa_final, int steps);
  void validate() const;
  double h_at(int step) const;
  double kappa_at(int step) const;
};

// Defaults: 6 steps for 2D rotation, 8 for 3D rotation, 5 for 2D TPS, 8 for
// 3D TPS; h from half the bounding-box diagonal down by factors of 2, kappa
// from 1 up by factors of 2.
AnnealingSchedule default_schedule(TransformFamily family, const OrientedPointSet& model);

struct RegisterOptions {
  int subsample_m = 1000;
  std::uint64_t seed = 0;
  bool use_correspondences = false;
  int corr_k = 5;
  bool freeze_correspondences = false;
  int max_evals_per_step = 50000;
  int multi_start = 1;
  std::vector<int> grid_shape;  // TPS control grid; empty = default
  NormalMode tps_normal_mode = NormalMode::jacobian;
};

struct StageReport {
  double h = 0.0, kappa = 0.0, alpha = -1.0;
  double entry_cost = 0.0, exit_cost = 0.0;
  int iterations = 0, evals = 0;
  std::vector<double> trace;
};

struct OptimizeReport {
  Transform transform;
  std::vector<StageReport> stages;
  double seconds = 0.0;
};

// Algorithm: start at the identity, subsample m points per shape, minimize at
// each (h, kappa) stage, then anneal. Correspondences, when enabled, are
// re-estimated each stage with alpha stepping linearly from 1 to 0.
OptimizeReport register_shapes(const OrientedPointSet& model,
                               const OrientedPointSet& target, CostSpec spec,
                               TransformFamily family,
                               const AnnealingSchedule& sched,
                               const RegisterOptions& opts = {});

// Parameter packing used by the optimizer; exposed for tests.
Eigen::VectorXd pack_transform(const Transform& t);
Transform unpack_transform(const Eigen::VectorXd& theta, const Transform& prototype);

}  // namespace dirreg
