#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "atomkernel/domain.hpp"
#include "atomkernel/measurements.hpp"
#include "atomkernel/rkhs.hpp"

namespace atomkernel {

// Quartic interpolation kernel (sin(pi M x) / sin(pi x))^4 with M = m/2 + 1,
// evaluated together with its first two derivatives. Integer arguments are
// removable singularities handled by a short even Taylor series. For odd m
// the frequency drops to floor(m/2) + 1 so the degree never exceeds m.
struct Fejer4 {
  double value = 0.0;
  double deriv = 0.0;
  double second = 0.0;
};
Fejer4 fejer4(int m, double x);

// Frequency parameter M used by fejer4 for this m.
int fejer4_freq(int m);

// Fourier coefficients of the quartic kernel, indexed k + m for k = -m..m.
// Computed by convolving the triangle weights (M - |j|)_+ with themselves.
Eigen::VectorXd fejer4_hat(int m);

// A dual interpolation certificate psi = M* nu for one of the three settings.
// psi matches the unit signs omega on the support, is flat there, and is
// meant to stay strictly below 1 in modulus everywhere else; validate()
// measures how well the constructed candidate does.
struct Certificate {
  KernelSpace space;
  MeasurementOperator op;
  std::vector<DomainPoint> support;
  Eigen::VectorXcd omega;
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd beta;
  Eigen::VectorXcd nu;  // coefficients over the measurement family

  // Interpolation-system diagnostics. condition refers to the row/column
  // rescaled system actually solved; condition_raw to the unscaled one.
  double condition = 0.0;
  double condition_raw = 0.0;
  double interp_residual = 0.0;  // max_j |psi(x_j) - omega_j|
  double deriv_residual = 0.0;   // max_j scaled flatness residual at x_j
  bool separation_warning = false;

  // Norm of nu plus the a-priori ceiling reported for the windowed family.
  double nu_norm = 0.0;
  double nu_norm_bound = 0.0;

  // Plane-only metadata: the atom-site coherence sum minus one and the
  // measured deviation of the interpolation matrix from the identity.
  double sigma_down_minus_1 = -1.0;
  double phi_deviation = -1.0;

  cplx psi(const DomainPoint& x) const;        // certificate value
  cplx psi_deriv(const DomainPoint& x) const;  // d/dx (torus: in x; line: in t)
};

// Interpolates omega on torus support T with the quartic-kernel ansatz
// q = sum_j alpha_j kappa(. - x_j) + beta_j kappa'(. - x_j), forcing
// q'(x_j) = 0. Separation below 2/m only raises the warning flag; a
// rescaled condition number beyond 1e12 throws SeparationError.
Certificate build_torus_certificate(const SupportSet& T, const Eigen::VectorXcd& omega,
                                    int m);

// Windowed-family certificate psi(t) = q(t/L) h(t) for line supports inside
// [-L/2, L/2]. The same quartic system is solved with right-hand sides
// omega_k / h(t_k) and the flatness condition for the product, and nu holds
// the Fourier coefficients of q. nu_norm_bound carries the a-priori value
// sqrt(2 L / (rho sinc(rho/2L)^2)) for comparison.
Certificate build_pw_certificate(const SupportSet& T, const Eigen::VectorXcd& omega,
                                 int m, double rho, double L);

// Coherent-state certificate g = sum_k alpha_k eta_{w_k} + beta_k d eta_{w_k}
// on the plane. Solves the Hermitian pair-interpolation system, checks its
// deviation from the identity against sigma_down - 1, and verifies the
// Neumann coefficient bounds |alpha_k - omega_k|, |beta_k| <= 2e/(1-2e).
// sigma_down - 1 >= 1/2 throws SeparationError. truncation_N < 0 picks the
// tail rule for the space radius.
Certificate build_bargmann_certificate(const KernelSpace& space, const SupportSet& W,
                                       const Eigen::VectorXcd& omega,
                                       int truncation_N = -1);

// Coherence sums over the plane support: sigma_bar(W, z) adds
// exp(-d^2/2)(1 + d + d^2 + d^3) over atoms, sigma_down takes the maximum
// over atom sites, sigma_up estimates the global supremum by a grid sweep
// with an analytic Lipschitz pad.
double sigma_bar(const SupportSet& W, cplx z);
double sigma_down(const SupportSet& W);
double sigma_up(const SupportSet& W, double R, double grid_res = 1.0 / 128.0);

// Separation condition: the Gaussian coherence sum over points farther than
// (sqrt(5)-1)/(4 sigma_up) from W must stay below 1 - tau.
struct SeparationCheck {
  double sup_value = 0.0;  // grid estimate plus Lipschitz pad
  double radius = 0.0;     // exclusion radius around atoms
  double margin = 0.0;     // (1 - tau) - sup_value
  bool ok = false;
};
SeparationCheck check_separation(const SupportSet& W, double tau, double R,
                                 double grid_res = 1.0 / 128.0);

// Grid-based certificate quality report. Near regions are metric balls of
// near_radius around the support; elsewhere the modulus is compared to
// 1 - far_gap. Torus and windowed certificates additionally check the
// quadratic envelope 1 - c m^2 d^2 on near points; plane certificates check
// negative definiteness of the curvature matrix of |psi|^2 instead, a strict
// modulus bound out to the absolute radius (sqrt(5)-1)/4, and the far_gap
// margin beyond it.
struct ValidationReport {
  double interp_residual = 0.0;
  double deriv_residual = 0.0;
  double offgrid_sup = 0.0;    // sup |psi| outside the near regions
  double sup_norm = 0.0;       // sup |psi| over every grid point
  double near_margin = 0.0;    // min over near grid of (envelope - |psi|)
  double far_margin = 0.0;     // far ceiling minus the far-region supremum
  double hessian_margin = 0.0; // plane: -(largest curvature eigenvalue)
  double beyond_window_sup = 0.0;  // windowed family: sup |psi| for |t| > L/2
  bool near_bound_ok = false;
  bool far_bound_ok = false;
  bool hessian_ok = true;  // plane only; true elsewhere
  double grid_res = 0.0;
  double near_radius = 0.0;
  double far_bound = 0.0;  // ceiling actually enforced on the far region

  bool ok() const { return near_bound_ok && far_bound_ok && hessian_ok; }
};

// Defaults (parameter <= 0): grid_res 1/(64 m) on the torus and the window,
// near-ball/16 on the plane; near_radius 0.16749/m (plane: the curvature
// radius derived from sigma_up); far_gap 0.3354*0.16749^2 on the torus,
// 0.34*0.16749^2 for the windowed family, 0.01 on the plane. The grid must
// put at least 8 points in every near region or GridTooCoarseError is thrown.
ValidationReport validate(const Certificate& cert, double grid_res = 0.0,
                          double near_radius = 0.0, double far_gap = 0.0);

nlohmann::json certificate_to_json(const Certificate& cert);
nlohmann::json validation_to_json(const ValidationReport& report);

}  // namespace atomkernel
