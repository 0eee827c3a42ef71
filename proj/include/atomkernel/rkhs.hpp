#pragma once

#include <Eigen/Dense>

#include "atomkernel/domain.hpp"
#include "atomkernel/measure.hpp"

namespace atomkernel {

// One of the three concrete kernel spaces:
//   TrigTorus(m)  trigonometric polynomials of degree m on [0,1), Dirichlet kernel
//   PaleyWiener   unit-band functions on the line, sinc kernel
//   Bargmann(R)   Gaussian-localized analytic functions on the plane, atoms
//                 confined to the disc of radius R
// All kernels are normalized so K(x, x) = 1.
struct KernelSpace {
  enum class Type { TrigTorus, PaleyWiener, Bargmann };

  Type type;
  int m = 0;      // trig degree (TrigTorus)
  double R = 0.0; // working radius (Bargmann)

  static KernelSpace trig_torus(int m);
  static KernelSpace paley_wiener();
  static KernelSpace bargmann(double R);

  DomainKind domain() const;
  const char* name() const;
};

// Normalized Dirichlet kernel sin(pi (2m+1) x) / ((2m+1) sin(pi x)), value 1
// at integers. Removable singularities are handled by a short Taylor series
// once |x - round(x)| < 1e-4.
double dirichlet(int m, double x);

// sin(pi x) / (pi x) with the same series treatment near zero.
double sinc_pi(double x);

// Kernel section evaluation K_x(y); Hermitian in (x, y), unit diagonal.
cplx kernel_eval(const KernelSpace& space, const DomainPoint& x, const DomainPoint& y);

// Gram matrix G(i, j) = kernel_eval(x_j, x_i); Hermitian positive semidefinite.
Eigen::MatrixXcd gram(const KernelSpace& space, const SupportSet& T);

struct HrtResult {
  bool independent = false;
  double min_eigenvalue = 0.0;
};

// Linear independence of the kernel sections at T: smallest Gram eigenvalue
// compared against tol.
HrtResult hrt_check(const KernelSpace& space, const SupportSet& T, double tol);

// Pointwise form of K*mu, the function synthesized from an atomic measure.
class SynthFunction {
 public:
  SynthFunction(KernelSpace space, AtomicMeasure mu);

  cplx operator()(const DomainPoint& y) const;
  const KernelSpace& space() const { return space_; }
  const AtomicMeasure& measure() const { return mu_; }

  // Native norm, computed through the Gram matrix of the support.
  double norm() const;

 private:
  KernelSpace space_;
  AtomicMeasure mu_;
};

SynthFunction synthesize(const KernelSpace& space, const AtomicMeasure& mu);

// Pointwise values of the normalized Bargmann kernel family and its first two
// covariant derivatives. Arguments follow (center w, evaluation point z).
cplx bargmann_eta(cplx w, cplx z);
cplx bargmann_deta(cplx w, cplx z);
cplx bargmann_d2eta(cplx w, cplx z);

// Closed-form pairwise inner products among the eta family. These drive the
// interpolation systems and curvature checks on the plane and are verified
// against two-dimensional quadrature in the test suite.
cplx ip_eta_eta(cplx v, cplx w);     // <eta_v, eta_w>
cplx ip_deta_eta(cplx v, cplx w);    // <d eta_v, eta_w>
cplx ip_deta_deta(cplx v, cplx w);   // <d eta_v, d eta_w>
cplx ip_d2eta_eta(cplx v, cplx w);   // <d^2 eta_v, eta_w>
cplx ip_d2eta_deta(cplx v, cplx w);  // <d^2 eta_v, d eta_w>

}  // namespace atomkernel
