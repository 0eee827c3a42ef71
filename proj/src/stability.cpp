#include "atomkernel/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "atomkernel/certificate.hpp"
#include "atomkernel/errors.hpp"
#include "atomkernel/rng.hpp"

namespace atomkernel {

namespace {

Certificate build_setting_certificate(const KernelSpace& space, const MeasurementOperator& op,
                                      const SupportSet& T, const Eigen::VectorXcd& omega) {
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier:
      return build_torus_certificate(T, omega, op.m);
    case MeasurementOperator::Type::MollifiedFourier:
      return build_pw_certificate(T, omega, op.m, op.rho, op.L);
    case MeasurementOperator::Type::BargmannMonomials:
      return build_bargmann_certificate(space, T, omega);
  }
  throw InvalidValueError("unknown measurement family");
}

}  // namespace

double estimate_C(const KernelSpace& space, const MeasurementOperator& op, const SupportSet& T,
                  double lambda, double delta, int trials, std::uint64_t seed) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw InvalidValueError("interpolation gap lambda must lie strictly between 0 and 1");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw InvalidValueError("neighborhood radius delta must be positive");
  if (trials < 1) throw InvalidValueError("estimate_C needs at least one sign-pattern trial");
  if (T.empty()) throw InvalidValueError("support set is empty");

  double c_max = 0.0;
  for (int t = 0; t < trials; ++t) {
    // independent sub-seed per trial; the splitmix step decorrelates
    // consecutive seeds, and the max below is reduced in trial order
    Rng rng(Rng(seed + static_cast<std::uint64_t>(t)).next_u64());
    Eigen::VectorXcd omega(static_cast<Eigen::Index>(T.size()));
    for (Eigen::Index j = 0; j < omega.size(); ++j) omega[j] = rng.unit_phase();

    try {
      const Certificate cert = build_setting_certificate(space, op, T, omega);
      const ValidationReport rep = validate(cert, 0.0, delta, lambda);
      if (!(rep.far_bound_ok && rep.sup_norm <= 1.0 + 1e-9))
        throw CertificateSetEmptyError(
            "no interpolating certificate stays below 1 - lambda off the delta-neighborhood "
            "for the sampled sign pattern");
      c_max = std::max(c_max, cert.nu_norm);
    } catch (const SeparationError& e) {
      throw CertificateSetEmptyError(
          std::string("certificate construction failed for a sampled sign pattern: ") + e.what());
    } catch (const GridTooCoarseError& e) {
      throw CertificateSetEmptyError(
          std::string("certificate validation cannot resolve (lambda, delta): ") + e.what());
    }
  }
  return c_max;
}

ConcentrationBound concentration_bound(const AtomicMeasure& mu0, const ContaminationSpec& mu_c,
                                       double eps, double lambda, double delta, double C_upper) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw InvalidValueError("interpolation gap lambda must lie strictly between 0 and 1");
  if (eps < 0.0 || !std::isfinite(eps))
    throw InvalidValueError("noise level must be nonnegative");
  if (C_upper < 0.0) throw InvalidValueError("interpolation constant must be nonnegative");

  ConcentrationBound out;
  out.lambda = lambda;
  out.delta = delta;
  out.eps = eps;
  out.C_upper = C_upper;
  out.tv_contamination = mu_c.tv();
  const double clean_mass = tv_norm(mu0);
  out.f_A_lower = clean_mass - out.tv_contamination;
  out.f_A_upper = clean_mass + out.tv_contamination;
  const double escape = (2.0 * C_upper * eps + out.tv_contamination) / (1.0 - lambda);
  out.rhs = out.f_A_lower - escape;
  out.rhs_upper = out.f_A_upper - escape;
  return out;
}

StabilityReport check_concentration(const SolverResult& result, const SupportSet& T, double delta,
                                    const ConcentrationBound& bound) {
  StabilityReport rep;
  rep.lambda = bound.lambda;
  rep.delta = delta;
  rep.C_upper = bound.C_upper;
  rep.bound_rhs = bound.rhs;
  rep.eps = bound.eps;
  rep.tv_contamination = bound.tv_contamination;
  rep.f_A_proxy = bound.f_A_lower;
  rep.observed_mass = mass_in_neighborhood(result.measure, T, delta);
  rep.satisfied = rep.observed_mass >= rep.bound_rhs - 1e-9;
  return rep;
}

BandlimitedBound bandlimited_error_bound(double rho, double L, double eps, double tv_mu_c,
                                         double f_A_proxy, double delta) {
  if (!(rho > 0.0) || !(L > 0.0)) throw InvalidValueError("window parameters must be positive");
  if (eps < 0.0 || tv_mu_c < 0.0)
    throw InvalidValueError("noise level and contamination mass must be nonnegative");
  if (!(delta > 0.0)) throw InvalidValueError("neighborhood radius delta must be positive");

  BandlimitedBound out;
  const double s = sinc_pi(rho / (2.0 * L));
  out.C_window = std::sqrt(2.0 * L / rho) / s;
  const double d = std::min(delta, 0.16749);
  out.concentration_rhs =
      f_A_proxy - (2.0 * out.C_window * eps + tv_mu_c) / (1.0 - 0.34 * d * d);
  // the displayed error ceiling; its inner divisor carries the bare
  // min(delta, 0.16749)^2, not the 0.34-scaled one
  out.l2_error_rhs =
      std::sqrt(L / (2.0 * rho)) / s * eps +
      (out.C_window + 1.0) *
          (f_A_proxy * eps + tv_mu_c + (out.C_window * eps + tv_mu_c) / (1.0 - d * d));
  return out;
}

nlohmann::json stability_report_to_json(const StabilityReport& report) {
  nlohmann::json j;
  j["lambda"] = report.lambda;
  j["delta"] = report.delta;
  j["C_upper"] = report.C_upper;
  j["bound_rhs"] = report.bound_rhs;
  j["observed_mass"] = report.observed_mass;
  j["satisfied"] = report.satisfied;
  j["eps"] = report.eps;
  j["tv_contamination"] = report.tv_contamination;
  j["f_A_proxy"] = report.f_A_proxy;
  return j;
}

std::string stability_report_csv_header() {
  return "lambda,delta,C_upper,bound_rhs,observed_mass,satisfied,eps,tv_contamination,"
         "f_A_proxy";
}

std::string stability_report_csv_row(const StabilityReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g",
                report.lambda, report.delta, report.C_upper, report.bound_rhs,
                report.observed_mass, report.satisfied ? 1 : 0, report.eps,
                report.tv_contamination, report.f_A_proxy);
  return buf;
}

}  // namespace atomkernel
