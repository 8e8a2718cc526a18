#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dirreg/optimize.hpp"

namespace dirreg {

// Smooth closed 2D curve: Fourier-perturbed unit circle
// r(t) = 1 + sum_{k=2..5} a_k cos(k t + phi_k), a_k ~ U[0, 0.15], with exact
// analytic outward unit normals. a_k = 0 for seed-independent circles is
// available via amplitude = 0.
OrientedPointSet gen_curve(int n, std::uint64_t seed, double amplitude = 0.15);

// Unit icosphere mesh (subdivided icosahedron) with face-averaged normals.
OrientedPointSet gen_icosphere(int subdivisions);

// Torus mesh, optionally squashed, with face-averaged normals.
OrientedPointSet gen_torus(int n_major, int n_minor, double major_radius = 1.0,
                           double minor_radius = 0.35, double squash = 1.0);

// Smooth seeded radial perturbation of a (roughly spherical) mesh; normals are
// recomputed from the perturbed faces.
OrientedPointSet perturb_radial(const OrientedPointSet& mesh, double amplitude,
                                std::uint64_t seed);

// TPS warp anchored at 9 bounding-box control points (corners + edge midpoints
// + center in 2D, corners + center in 3D), each displaced by Gaussian noise
// with std 0.02 * degree * bbox diagonal. Normals follow in jacobian mode.
OrientedPointSet deform_tps(const OrientedPointSet& shape, int degree,
                            std::uint64_t seed);
// Same warp, exposed as a Transform (for ground-truth checks).
Transform deform_tps_transform(const OrientedPointSet& shape, int degree,
                               std::uint64_t seed);

// Interpolating TPS that maps each anchor exactly onto its target
// (side-condition fit; the generator behind deform_tps).
ThinPlateSpline fit_tps(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& targets);

struct RemovalResult {
  OrientedPointSet shape;
  std::vector<int> kept;  // surviving source indices
};

RemovalResult remove_fraction(const OrientedPointSet& shape, double fraction,
                              std::uint64_t seed);

// Adds iid Gaussian displacement to points and drops the (now invalid)
// normals; callers re-estimate via knn_pca.
OrientedPointSet add_gauss_noise(const OrientedPointSet& shape, double sigma,
                                 std::uint64_t seed);

OrientedPointSet rotate_shape(const OrientedPointSet& shape, const Transform& rot);

// Mean Euclidean distance over ground-truth-corresponding pairs (the paper's
// "MSE": the norm, not its square).
double mean_error(const Eigen::MatrixXd& transformed_model, const Eigen::MatrixXd& target);

enum class Scenario {
  rigid2d,
  rigid2d_missing,
  nonrigid2d,
  nonrigid2d_rot,
  nonrigid2d_missing,
  rigid3d_same,
  rigid3d_resampled,
  rigid3d_noise,
  nonrigid3d,
};

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario s);

struct ExperimentSpec {
  Scenario scenario = Scenario::rigid2d;
  std::vector<double> sweep;  // rotation degrees, removal fractions, degrees, sigmas
  int trials = 10;
  std::vector<CostFamily> families{CostFamily::cxu};
  int n_points = 100;
  std::uint64_t seed = 0;
  int subsample_m = 1000;
  bool use_correspondences = false;
  int annealing_steps = 0;  // 0 = family default
};

struct ExperimentRow {
  std::string scenario;
  double sweep_value = 0.0;
  int trial = 0;
  std::string family;
  double error = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  int iterations = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::string csv() const;
  // per (sweep value, family) mean and standard error
  std::string summary_json() const;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

// One registration trial for a scenario; exposed for tests and acceptance.
ExperimentRow run_trial(const ExperimentSpec& spec, double sweep_value, int trial,
                        CostFamily family);

}  // namespace dirreg
