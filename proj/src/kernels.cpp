#include "dirreg/kernels.hpp"

#include <cmath>
#include <functional>

namespace dirreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// log sinh(kappa), stable over the whole range.
double log_sinh(double kappa) {
  constexpr double eps = 1e-4;
  if (kappa <= eps) {
    // sinh k = k (1 + k^2/6 + k^4/120 + ...)
    const double k2 = kappa * kappa;
    return std::log(kappa) + std::log1p(k2 / 6.0 + k2 * k2 / 120.0);
  }
  return kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0);
}

// Adaptive Simpson on [a,b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Surface area of S^{d-1} embedded in R^d.
double sphere_area(int d) {
  return 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);
}

// log of the defining integral int_{S^{d-1}} exp(kappa mu.u) du, by reducing to
// the polar angle: A(S^{d-2}) int_0^pi exp(kappa cos t) sin^{d-2} t dt.
double log_vmf_integral(double kappa, int d) {
  const double area_slice = sphere_area(d - 1);
  auto f = [&](double t) {
    return std::exp(kappa * (std::cos(t) - 1.0)) * std::pow(std::sin(t), d - 2);
  };
  const double val = integrate(f, 0.0, kPi, 1e-12);
  return std::log(area_slice) + kappa + std::log(val);
}

}  // namespace

void KernelParams::validate() const {
  if (h1 <= 0.0) throw DegenerateKernel("h1 must be > 0");
  if (h2 < 0.0) throw DegenerateKernel("h2 must be >= 0");
  if (kappa1 <= 0.0) throw InvalidConcentration("kappa1 must be > 0");
  if (kappa2 < 0.0) throw InvalidConcentration("kappa2 must be >= 0");
}

double log_c3(double kappa) {
  if (kappa < 0.0) throw InvalidConcentration("kappa must be >= 0");
  constexpr double log_4pi = 2.5310242469692907930;  // log(4 pi)
  if (kappa == 0.0) return -log_4pi;
  return std::log(kappa) - log_4pi - log_sinh(kappa);
}

double log_bessel_i0(double kappa) {
  if (kappa < 50.0) {
    // I0(k) = sum ( (k/2)^{2m} / (m!)^2 ), all-positive so no cancellation
    double term = 1.0, sum = 1.0;
    const double q = 0.25 * kappa * kappa;
    for (int m = 1; m < 400; ++m) {
      term *= q / (static_cast<double>(m) * m);
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    return std::log(sum);
  }
  // I0(k) ~ e^k / sqrt(2 pi k) sum a_n / k^n, a_n = a_{n-1} (2n-1)^2 / (8n);
  // asymptotic, so stop once terms start growing again
  double term = 1.0, sum = 1.0;
  for (int n = 1; n <= 12; ++n) {
    const double next = term * (2.0 * n - 1.0) * (2.0 * n - 1.0) / (8.0 * n * kappa);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * sum) break;
  }
  return kappa - 0.5 * std::log(2.0 * kPi * kappa) + std::log(sum);
}

double log_cd(double kappa, int d) {
  if (d < 2) throw InvalidDimension("vMF dimension must be >= 2");
  if (kappa < 0.0) throw InvalidConcentration("kappa must be >= 0");
  if (d == 3) return log_c3(kappa);
  if (d == 2) return -std::log(2.0 * kPi) - log_bessel_i0(kappa);
  if (kappa == 0.0) return -std::log(sphere_area(d));
  return -log_vmf_integral(kappa, d);
}

double log_sp_gauss_gauss(double sq_dist, double h1, double h2, int d) {
  const double s = h1 * h1 + h2 * h2;
  if (s <= 0.0) throw DegenerateKernel("h1 = h2 = 0");
  return -0.5 * d * std::log(2.0 * kPi * s) - sq_dist / (2.0 * s);
}

double sp_gauss_gauss(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                      double h1, double h2) {
  if (mu1.size() != mu2.size()) throw DimensionError("Gaussian means differ in dimension");
  const double sq = (mu1 - mu2).squaredNorm();
  return std::exp(log_sp_gauss_gauss(sq, h1, h2, static_cast<int>(mu1.size())));
}

double log_sp_vmf_vmf(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                      double kappa1, double kappa2, int d) {
  const double kappa = (kappa1 * mu1 + kappa2 * mu2).norm();
  return log_cd(kappa1, d) + log_cd(kappa2, d) - log_cd(kappa, d);
}

double log_sp_vmf_dirac(const Eigen::VectorXd& mu, double kappa,
                        const Eigen::VectorXd& u, int d) {
  return log_cd(kappa, d) + kappa * mu.dot(u);
}

}  // namespace dirreg
