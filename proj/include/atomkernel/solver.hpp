#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "atomkernel/measure.hpp"
#include "atomkernel/measurements.hpp"
#include "atomkernel/rkhs.hpp"

namespace atomkernel {

// Total-variation minimization over atomic measures, run as a grid LASSO
// with residual-targeted regularization followed by continuous refinement
// of atom positions and weights.
struct SolverConfig {
  int grid_size = 0;        // 0 picks the operator default (8 per bandwidth
                            // unit for Fourier families, lattice on the disc)
  double reg_lambda = 0.0;  // > 0 fixes the LASSO weight; otherwise it is
                            // chosen so the grid residual lands in
                            // [0.9 eps, eps]
  double eps = 0.0;         // residual budget; 0 means noiseless, solved at
                            // 1e-9 * |b|
  int max_outer_iters = 40;
  double prox_tol = 1e-9;   // duality-gap tolerance and feasibility slack
  struct Refine {
    int max_iters = 80;
    double grad_tol = 1e-11;
  } refine;
  double merge_radius = 0.0;   // 0 means 1.5 grid cells
  int max_inner_iters = 20000; // proximal iteration cap per LASSO call
};

struct LassoResult {
  Eigen::VectorXcd coef;  // one entry per grid node
  int iterations = 0;
  bool converged = false;
  double gap = 0.0;  // duality gap at exit
  double residual_norm = 0.0;
};

struct SolverResult {
  AtomicMeasure measure;
  double tv_value = 0.0;
  double residual_norm = 0.0;
  double dual_sup = 0.0;  // max grid value of |M* nu_dual|
  int iterations = 0;
  bool converged = false;
  double reg_lambda = 0.0;   // final LASSO weight
  Eigen::VectorXcd dual_nu;  // (b - A x)/lambda at the LASSO solution
};

// Discretization nodes for the operator's domain: uniform wrap-around grid
// on the torus, uniform cover of [-L/2, L/2] for the windowed family, and a
// square lattice restricted to the disc of the space radius on the plane.
// Fourier-type grids below 8 (2m+1) nodes are rejected.
std::vector<DomainPoint> solver_grid(const MeasurementOperator& op,
                                     const KernelSpace& space, int grid_size = 0);

// Penalized grid program min 1/2 |A x - b|^2 + reg_lambda sum_j |x_j|,
// solved by accelerated proximal iteration from zero until the duality gap
// drops below prox_tol (relative to max(1, |b|^2/2)). Non-convergence within
// max_inner_iters flags the result, it does not throw.
LassoResult beurling_lasso(const MeasurementOperator& op, const MeasurementVector& b,
                           double reg_lambda, const std::vector<DomainPoint>& grid,
                           const SolverConfig& cfg = SolverConfig());

// Full pipeline: residual-targeted LASSO, cluster extraction (threshold
// 1e-4 of the leading coefficient, merge within merge_radius), then
// alternating exact least-squares on weights and damped Gauss-Newton on
// positions. Throws InfeasibleError when eps is below the reachable
// residual. eps = 0 solves the noiseless program at 1e-9 |b|.
SolverResult solve(const MeasurementOperator& op, const KernelSpace& space,
                   const MeasurementVector& b, const SolverConfig& cfg = SolverConfig());

// A-posteriori dual feasibility: evaluates psi = M* nu_dual on the grid
// (solver default when empty) and checks sup |psi| <= 1 + 1e-6 together
// with |psi(x_i) - c_i/|c_i|| <= 1e-3 at the recovered atoms.
struct DualCheck {
  double sup_value = 0.0;
  double sign_err = 0.0;
  bool ok = false;
};
DualCheck dual_optimality_check(const SolverResult& result, const MeasurementOperator& op,
                                const KernelSpace& space,
                                const std::vector<DomainPoint>& grid = {});

// Objective value of solve() under the same configuration defaults.
double tv_min_value(const MeasurementOperator& op, const KernelSpace& space,
                    const MeasurementVector& b, double eps);

nlohmann::json solver_result_to_json(const SolverResult& result);

}  // namespace atomkernel
