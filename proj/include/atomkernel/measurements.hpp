#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "atomkernel/measure.hpp"
#include "atomkernel/rkhs.hpp"

namespace atomkernel {

// Linear measurement families with Bessel bound 1:
//   TorusFourier       exponentials exp(2 pi i j x), j = -m..m, on the torus;
//                      the normalization flag scales them by (2m+1)^{-1/2}
//   MollifiedFourier   frequency-window averages of bandlimited signals on a
//                      length-L observation window, indices k = -m..m
//   BargmannMonomials  normalized monomials of degree 0..N+1 on the plane
// MollifiedFourier and BargmannMonomials are orthonormal as constructed, so
// the normalization flag leaves them unchanged.
struct MeasurementOperator {
  enum class Type { TorusFourier, MollifiedFourier, BargmannMonomials };

  Type type;
  int m = 0;
  double L = 0.0;
  double rho = 0.0;
  int N = 0;
  bool normalized = true;

  static MeasurementOperator torus_fourier(int m, bool normalized = true);
  static MeasurementOperator mollified_fourier(int m, double L, double rho,
                                               bool normalized = true);
  static MeasurementOperator bargmann_monomials(int N, bool normalized = true);

  int count() const;  // number of measurement functionals
  DomainKind domain() const;
  const char* name() const;
};

struct MeasurementVector {
  MeasurementOperator op;
  Eigen::VectorXcd values;
};

// Response of a unit atom at x, one entry per measurement functional.
Eigen::VectorXcd atom_response(const MeasurementOperator& op, const DomainPoint& x);

// Derivatives of the response in the atom position. For torus and line atoms
// only d_first is filled (d/dx); plane atoms get d/dx and d/dy.
struct ResponseDerivs {
  Eigen::VectorXcd d_first;
  Eigen::VectorXcd d_second;
};
ResponseDerivs atom_response_derivs(const MeasurementOperator& op, const DomainPoint& x);

// Measure the synthesized signal of mu (plus optional contamination).
MeasurementVector apply(const MeasurementOperator& op, const KernelSpace& space,
                        const AtomicMeasure& mu,
                        const ContaminationSpec* contamination = nullptr);

// Pointwise form of the adjoint applied to a coefficient vector.
class AdjointFunction {
 public:
  AdjointFunction(MeasurementOperator op, Eigen::VectorXcd nu);
  cplx operator()(const DomainPoint& x) const;
  const Eigen::VectorXcd& coefficients() const { return nu_; }
  const MeasurementOperator& op() const { return op_; }

 private:
  MeasurementOperator op_;
  Eigen::VectorXcd nu_;
};

AdjointFunction adjoint_function(const MeasurementOperator& op, const Eigen::VectorXcd& nu);

// Additive noise with exact Euclidean norm eps, direction drawn from a
// seeded complex Gaussian. eps = 0 returns the input untouched.
MeasurementVector add_noise(const MeasurementVector& mv, double eps, std::uint64_t seed);

// Degree-m trigonometric polynomial given by coefficients c_k, k = -m..m.
struct TrigPoly {
  int m = 0;
  Eigen::VectorXcd coeffs;  // index k + m
  cplx eval(double y) const;
};

// Re-encode mollified measurements as the polynomial sum_k v_k exp(2 pi i k y).
TrigPoly encode_trig_poly(const MeasurementVector& mv);

// Window profile of the mollified family and its derivative in t.
double mollifier_window(double L, double rho, double t);
double mollifier_window_deriv(double L, double rho, double t);

// Monomial truncation degree for atoms in the disc of radius R: smallest N
// with R^2 e / (N + 2) <= 1/2 whose omitted single-atom energy is below
// tail_tol uniformly over the disc.
int bargmann_truncation_degree(double R, double tail_tol = 1e-10);
double bargmann_tail_mass(double R, int N);

// Gaussian-windowed chirp reflector with complex reflectivity.
struct Reflector {
  cplx r;
  double tau = 0.0;    // delay
  double omega = 0.0;  // Doppler shift
};

// Image of a reflector sum under the Gaussian-window short-time transform at
// width parameter lambda, expressed over unit-norm plane atoms. The reflector
// (r, tau, omega) lands at lambda tau - i pi omega / lambda with weight
// r exp(i pi tau omega).
AtomicMeasure radar_to_bargmann(const std::vector<Reflector>& reflectors, double lambda);

nlohmann::json op_to_json(const MeasurementOperator& op);
MeasurementOperator op_from_json(const nlohmann::json& j);
nlohmann::json measurement_to_json(const MeasurementVector& mv);
MeasurementVector measurement_from_json(const nlohmann::json& j);

}  // namespace atomkernel
