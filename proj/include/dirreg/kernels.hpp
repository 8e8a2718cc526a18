#pragma once

#include <Eigen/Dense>

#include "dirreg/error.hpp"

namespace dirreg {

// Gaussian bandwidths and vMF concentrations for the two shapes.
// h2 = 0 encodes the Dirac position variant of the target model.
struct KernelParams {
  double h1 = 0.1;
  double h2 = 0.1;
  double kappa1 = 1.0;
  double kappa2 = 1.0;

  void validate() const;
};

// log of the S^2 vMF normalizing constant kappa / (4 pi sinh kappa).
// Stable for kappa up to ~1e4 and at the kappa -> 0 (uniform) limit.
double log_c3(double kappa);

// log of the vMF normalizing constant on S^{d-1}. d = 3 is closed form,
// d = 2 uses log I0, other d fall back to adaptive numerical integration.
double log_cd(double kappa, int d);

// log I0(kappa): power series below kappa = 15, asymptotic expansion above.
double log_bessel_i0(double kappa);

// <N(mu1,h1^2) | N(mu2,h2^2)> = N(mu1; mu2, h1^2 + h2^2), full d-dimensional
// normalizing constant.
double sp_gauss_gauss(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                      double h1, double h2);

double log_sp_gauss_gauss(double sq_dist, double h1, double h2, int d);

// log <vMF(mu1,k1) | vMF(mu2,k2)> = log Cd(k1) + log Cd(k2) - log Cd(|k1 mu1 + k2 mu2|).
double log_sp_vmf_vmf(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                      double kappa1, double kappa2, int d);

// log <vMF(mu,kappa) | delta(u)> = log Cd(kappa) + kappa mu.u
double log_sp_vmf_dirac(const Eigen::VectorXd& mu, double kappa,
                        const Eigen::VectorXd& u, int d);

}  // namespace dirreg
