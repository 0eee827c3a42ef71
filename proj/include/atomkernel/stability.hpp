#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "atomkernel/measure.hpp"
#include "atomkernel/measurements.hpp"
#include "atomkernel/rkhs.hpp"
#include "atomkernel/solver.hpp"

namespace atomkernel {

// Upper estimate of the interpolation constant C(lambda, delta): the largest
// dual-coefficient norm over `trials` random unit sign patterns on T. Each
// pattern's certificate must interpolate the signs, stay below 1 + 1e-9 in
// modulus everywhere, and stay below 1 - lambda outside the
// delta-neighborhood of T; a pattern with no such certificate raises
// CertificateSetEmptyError. Trials draw independent sub-seeds from `seed`,
// so their order never changes the sampled patterns, and the max is reduced
// in trial order.
double estimate_C(const KernelSpace& space, const MeasurementOperator& op, const SupportSet& T,
                  double lambda, double delta, int trials, std::uint64_t seed);

// Right-hand side of the mass-concentration guarantee. The signal's atomic
// norm is not computable directly, so both sandwich proxies derived from the
// clean atoms and the contamination mass are carried; `rhs` uses the lower
// end, the one the guarantee actually certifies.
struct ConcentrationBound {
  double lambda = 0.0;
  double delta = 0.0;
  double eps = 0.0;
  double C_upper = 0.0;
  double tv_contamination = 0.0;
  double f_A_lower = 0.0;  // sum of clean moduli minus contamination mass
  double f_A_upper = 0.0;  // plus contamination mass, informational
  double rhs = 0.0;        // f_A_lower - (2 C_upper eps + tv_c)/(1 - lambda)
  double rhs_upper = 0.0;  // same expression from f_A_upper
};
ConcentrationBound concentration_bound(const AtomicMeasure& mu0, const ContaminationSpec& mu_c,
                                       double eps, double lambda, double delta, double C_upper);

// Compares the recovered mass near the true support against the
// concentration right-hand side; satisfied within a 1e-9 slack.
struct StabilityReport {
  double lambda = 0.0;
  double delta = 0.0;
  double C_upper = 0.0;
  double bound_rhs = 0.0;
  double observed_mass = 0.0;
  bool satisfied = false;
  double eps = 0.0;
  double tv_contamination = 0.0;
  double f_A_proxy = 0.0;
};
StabilityReport check_concentration(const SolverResult& result, const SupportSet& T, double delta,
                                    const ConcentrationBound& bound);

// Closed-form right-hand sides for the windowed bandlimited setting,
// computed exactly as displayed: the concentration bound with constant
// 2 sqrt(2L/(rho sinc(rho/2L)^2)) over 1 - 0.34 min(delta, 0.16749)^2, and
// the L2 reconstruction-error ceiling with the same window constant. The
// delta argument is in the scaled coordinate t/L.
struct BandlimitedBound {
  double concentration_rhs = 0.0;
  double l2_error_rhs = 0.0;
  double C_window = 0.0;  // sqrt(2L/(rho sinc(rho/2L)^2))
};
BandlimitedBound bandlimited_error_bound(double rho, double L, double eps, double tv_mu_c,
                                         double f_A_proxy, double delta);

nlohmann::json stability_report_to_json(const StabilityReport& report);

// Flat tabular form: a fixed header and one value row per report.
std::string stability_report_csv_header();
std::string stability_report_csv_row(const StabilityReport& report);

}  // namespace atomkernel
