#include "atomkernel/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace atomkernel {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_half(double x) { return x - std::round(x); }

void require_unit_signs(const Eigen::VectorXcd& omega, std::size_t s) {
  if (static_cast<std::size_t>(omega.size()) != s)
    throw InvalidValueError("sign vector length must match the support size");
  for (Eigen::Index j = 0; j < omega.size(); ++j)
    if (std::abs(std::abs(omega[j]) - 1.0) > 1e-9)
      throw InvalidValueError("sign entries must have unit modulus");
}

Eigen::VectorXcd normalize_signs(const Eigen::VectorXcd& omega) {
  Eigen::VectorXcd out = omega;
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] /= std::abs(out[j]);
  return out;
}

// Solves the real 2s x 2s quartic-kernel system for a complex right-hand
// side, refining until the componentwise backward error drops to 1e-12.
struct QuarticSolve {
  Eigen::VectorXcd alpha;
  Eigen::VectorXcd beta;
  double cond_scaled = 0.0;
  double cond_raw = 0.0;
};

double svd_condition(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  double smin = sv[sv.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

QuarticSolve solve_quartic_system(const std::vector<double>& y, int m,
                                  const Eigen::VectorXcd& v, const Eigen::VectorXcd& d) {
  const int s = static_cast<int>(y.size());
  const int n = 2 * s;
  Eigen::MatrixXd A(n, n);
  for (int k = 0; k < s; ++k) {
    for (int j = 0; j < s; ++j) {
      Fejer4 f = fejer4(m, y[k] - y[j]);
      A(k, j) = f.value;
      A(k, s + j) = f.deriv;
      A(s + k, j) = f.deriv;
      A(s + k, s + j) = f.second;
    }
  }

  // Rescale rows/columns by the kernel's value and curvature scales before
  // reading off a condition number: the raw blocks differ by a factor of
  // order m^2, which is a property of the units, not of the geometry.
  Fejer4 f0 = fejer4(m, 0.0);
  const double sigma = std::sqrt(std::abs(f0.second) / f0.value);
  Eigen::VectorXd scale(n);
  for (int i = 0; i < s; ++i) scale[i] = 1.0 / std::sqrt(f0.value);
  for (int i = s; i < n; ++i) scale[i] = 1.0 / (sigma * std::sqrt(f0.value));
  Eigen::MatrixXd scaled = scale.asDiagonal() * A * scale.asDiagonal();

  QuarticSolve out;
  out.cond_scaled = svd_condition(scaled);
  out.cond_raw = svd_condition(A);
  if (!(out.cond_scaled < 1e12))
    throw SeparationError("separation too small: interpolation system condition " +
                          std::to_string(out.cond_scaled));

  Eigen::MatrixXd B(n, 2);
  for (int k = 0; k < s; ++k) {
    B(k, 0) = v[k].real();
    B(k, 1) = v[k].imag();
    B(s + k, 0) = d[k].real();
    B(s + k, 1) = d[k].imag();
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::MatrixXd X = lu.solve(B);
  Eigen::MatrixXd absA = A.cwiseAbs();
  for (int pass = 0; pass < 6; ++pass) {
    Eigen::MatrixXd R = B - A * X;
    Eigen::MatrixXd denom = absA * X.cwiseAbs() + B.cwiseAbs();
    double err = 0.0;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c)
        err = std::max(err, std::abs(R(i, c)) / (denom(i, c) + 1e-300));
    if (err <= 1e-12) break;
    X += lu.solve(R);
  }

  out.alpha.resize(s);
  out.beta.resize(s);
  for (int k = 0; k < s; ++k) {
    out.alpha[k] = cplx(X(k, 0), X(k, 1));
    out.beta[k] = cplx(X(s + k, 0), X(s + k, 1));
  }
  return out;
}

// q and q' for the quartic-kernel ansatz at a torus coordinate.
struct QVal {
  cplx value;
  cplx deriv;
};

QVal eval_q(const std::vector<double>& y, int m, const Eigen::VectorXcd& alpha,
            const Eigen::VectorXcd& beta, double x) {
  QVal out{cplx(0, 0), cplx(0, 0)};
  for (std::size_t j = 0; j < y.size(); ++j) {
    Fejer4 f = fejer4(m, x - y[j]);
    out.value += alpha[j] * f.value + beta[j] * f.deriv;
    out.deriv += alpha[j] * f.deriv + beta[j] * f.second;
  }
  return out;
}

// Fourier coefficients of q over k = -m..m.
Eigen::VectorXcd q_hat(const std::vector<double>& y, int m, const Eigen::VectorXcd& alpha,
                       const Eigen::VectorXcd& beta) {
  Eigen::VectorXd hat = fejer4_hat(m);
  Eigen::VectorXcd out(2 * m + 1);
  for (int k = -m; k <= m; ++k) {
    cplx acc(0, 0);
    for (std::size_t j = 0; j < y.size(); ++j) {
      cplx phase = std::exp(cplx(0, -2.0 * kPi * k * y[j]));
      acc += (alpha[j] + cplx(0, 2.0 * kPi * k) * beta[j]) * phase;
    }
    out[k + m] = hat[k + m] * acc;
  }
  return out;
}

std::vector<double> torus_coords(const SupportSet& T) {
  std::vector<double> y;
  y.reserve(T.size());
  for (const auto& p : T) y.push_back(p.coord());
  return y;
}

// Value and derivative of the trig polynomial with coefficients nu(k + m).
QVal eval_trig_from_nu(const Eigen::VectorXcd& nu, int m, double y) {
  QVal out{cplx(0, 0), cplx(0, 0)};
  for (int k = -m; k <= m; ++k) {
    cplx e = std::exp(cplx(0, 2.0 * kPi * k * y));
    out.value += nu[k + m] * e;
    out.deriv += cplx(0, 2.0 * kPi * k) * nu[k + m] * e;
  }
  return out;
}

// <g, eta_z>, <g, d eta_z>, <g, d^2 eta_z> for a coherent-state certificate.
struct PlaneLocals {
  cplx g_eta;
  cplx g_deta;
  cplx g_d2eta;
};

PlaneLocals plane_locals(const Certificate& cert, cplx z) {
  PlaneLocals out{cplx(0, 0), cplx(0, 0), cplx(0, 0)};
  if (cert.alpha.size() == 0) {
    // Coefficient-only certificate: pair nu against the monomial expansions
    // of eta_z, d eta_z, d^2 eta_z.
    Eigen::VectorXcd a = atom_response(cert.op, DomainPoint::plane(z));
    for (Eigen::Index n = 0; n < cert.nu.size(); ++n) {
      const double rn = std::sqrt(static_cast<double>(n));
      cplx dn = (n > 0 ? rn * a[n - 1] : cplx(0, 0)) - z * a[n];
      cplx ddn = (n > 1 ? std::sqrt(static_cast<double>(n * (n - 1))) * a[n - 2]
                        : cplx(0, 0)) -
                 2.0 * z * (n > 0 ? rn * a[n - 1] : cplx(0, 0)) + z * z * a[n];
      out.g_eta += cert.nu[n] * std::conj(a[n]);
      out.g_deta += cert.nu[n] * std::conj(dn);
      out.g_d2eta += cert.nu[n] * std::conj(ddn);
    }
    return out;
  }
  for (std::size_t j = 0; j < cert.support.size(); ++j) {
    cplx w = cert.support[j].z();
    out.g_eta += cert.alpha[j] * ip_eta_eta(w, z) + cert.beta[j] * ip_deta_eta(w, z);
    out.g_deta += cert.alpha[j] * std::conj(ip_deta_eta(z, w)) +
                  cert.beta[j] * ip_deta_deta(w, z);
    out.g_d2eta += cert.alpha[j] * std::conj(ip_d2eta_eta(z, w)) +
                   cert.beta[j] * std::conj(ip_d2eta_deta(z, w));
  }
  return out;
}

// Coherent certificate value through the single-exponential form; equal to
// <g, eta_z> from the closed-form pair table.
cplx coherent_value(const Certificate& cert, cplx z) {
  cplx acc(0, 0);
  for (std::size_t j = 0; j < cert.support.size(); ++j) {
    cplx w = cert.support[j].z();
    cplx dz = z - w;
    double d2 = std::norm(dz);
    double phase = std::imag(std::conj(w) * z);
    cplx envelope = std::exp(-0.5 * d2) * cplx(std::cos(phase), std::sin(phase));
    acc += (cert.alpha[j] + cert.beta[j] * dz) * envelope;
  }
  return acc;
}

double largest_curvature_eig(const Certificate& cert, cplx z) {
  PlaneLocals loc = plane_locals(cert, z);
  double a = std::norm(loc.g_deta) - std::norm(loc.g_eta);
  double b = std::abs(loc.g_eta) * std::abs(loc.g_d2eta);
  return a + b;
}

double phi_coherence(double d) {
  return std::exp(-0.5 * d * d) * (1.0 + d * (1.0 + d * (1.0 + d)));
}

double plane_min_dist(const SupportSet& W, cplx z) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : W) best = std::min(best, std::abs(z - p.z()));
  return best;
}

nlohmann::json complex_vector_json(const Eigen::VectorXcd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

}  // namespace

int fejer4_freq(int m) {
  if (m < 1) throw InvalidValueError("quartic kernel needs degree m >= 1");
  return m / 2 + 1;
}

Fejer4 fejer4(int m, double x) {
  const double M = static_cast<double>(fejer4_freq(m));
  const double u = wrap_half(x);

  double r, dr, ddr;
  const double cut = std::min(1e-4, 0.05 / (kPi * M));
  if (std::abs(u) < cut) {
    // Even Taylor expansion of sin(pi M u) / sin(pi u) around the lattice.
    const double c2 = kPi * kPi * (1.0 - M * M) / 6.0;
    const double c4 = std::pow(kPi, 4) * ((M * M * M * M - 1.0) / 120.0 -
                                          (M * M - 1.0) / 36.0);
    const double u2 = u * u;
    r = M * (1.0 + c2 * u2 + c4 * u2 * u2);
    dr = M * (2.0 * c2 * u + 4.0 * c4 * u2 * u);
    ddr = M * (2.0 * c2 + 12.0 * c4 * u2);
  } else {
    const double un = std::sin(kPi * M * u);
    const double dun = kPi * M * std::cos(kPi * M * u);
    const double ddun = -kPi * kPi * M * M * un;
    const double vn = std::sin(kPi * u);
    const double dvn = kPi * std::cos(kPi * u);
    const double ddvn = -kPi * kPi * vn;
    r = un / vn;
    dr = (dun - r * dvn) / vn;
    ddr = (ddun - 2.0 * dr * dvn - r * ddvn) / vn;
  }

  Fejer4 out;
  const double r2 = r * r;
  out.value = r2 * r2;
  out.deriv = 4.0 * r2 * r * dr;
  out.second = 12.0 * r2 * dr * dr + 4.0 * r2 * r * ddr;
  return out;
}

Eigen::VectorXd fejer4_hat(int m) {
  const int M = fejer4_freq(m);
  Eigen::VectorXd hat = Eigen::VectorXd::Zero(2 * m + 1);
  for (int k = -2 * (M - 1); k <= 2 * (M - 1); ++k) {
    double acc = 0.0;
    for (int j = std::max(-(M - 1), k - (M - 1)); j <= std::min(M - 1, k + (M - 1)); ++j)
      acc += static_cast<double>((M - std::abs(j)) * (M - std::abs(k - j)));
    hat[k + m] = acc;
  }
  return hat;
}

cplx Certificate::psi(const DomainPoint& x) const {
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier: {
      if (x.kind() != DomainKind::Torus)
        throw InvalidValueError("torus certificate expects a torus point");
      if (alpha.size() == 0)  // raw coefficient certificate (tests, duals)
        return adjoint_function(op, nu)(x);
      std::vector<double> y = torus_coords(SupportSet(support));
      return eval_q(y, op.m, alpha, beta, x.coord()).value;
    }
    case MeasurementOperator::Type::MollifiedFourier: {
      if (x.kind() != DomainKind::Line)
        throw InvalidValueError("windowed certificate expects a line point");
      if (alpha.size() == 0) return adjoint_function(op, nu)(x);
      const double t = x.coord();
      std::vector<double> y;
      y.reserve(support.size());
      for (const auto& p : support) y.push_back(p.coord() / op.L);
      QVal q = eval_q(y, op.m, alpha, beta, t / op.L);
      return q.value * mollifier_window(op.L, op.rho, t);
    }
    case MeasurementOperator::Type::BargmannMonomials: {
      if (x.kind() != DomainKind::Plane)
        throw InvalidValueError("plane certificate expects a plane point");
      if (alpha.size() == 0) return adjoint_function(op, nu)(x);
      return coherent_value(*this, x.z());
    }
  }
  throw InvalidValueError("unknown certificate operator");
}

cplx Certificate::psi_deriv(const DomainPoint& x) const {
  switch (op.type) {
    case MeasurementOperator::Type::TorusFourier: {
      if (x.kind() != DomainKind::Torus)
        throw InvalidValueError("torus certificate expects a torus point");
      if (alpha.size() == 0) {
        const double scale = op.normalized ? 1.0 / std::sqrt(double(2 * op.m + 1)) : 1.0;
        return scale * eval_trig_from_nu(nu, op.m, x.coord()).deriv;
      }
      std::vector<double> y = torus_coords(SupportSet(support));
      return eval_q(y, op.m, alpha, beta, x.coord()).deriv;
    }
    case MeasurementOperator::Type::MollifiedFourier: {
      if (x.kind() != DomainKind::Line)
        throw InvalidValueError("windowed certificate expects a line point");
      const double t = x.coord();
      const double h = mollifier_window(op.L, op.rho, t);
      const double dh = mollifier_window_deriv(op.L, op.rho, t);
      if (alpha.size() == 0) {
        QVal q = eval_trig_from_nu(nu, op.m, t / op.L);
        return q.deriv * (h / op.L) + q.value * dh;
      }
      std::vector<double> y;
      y.reserve(support.size());
      for (const auto& p : support) y.push_back(p.coord() / op.L);
      QVal q = eval_q(y, op.m, alpha, beta, t / op.L);
      return q.deriv * (h / op.L) + q.value * dh;
    }
    case MeasurementOperator::Type::BargmannMonomials: {
      if (x.kind() != DomainKind::Plane)
        throw InvalidValueError("plane certificate expects a plane point");
      return plane_locals(*this, x.z()).g_deta;
    }
  }
  throw InvalidValueError("unknown certificate operator");
}

Certificate build_torus_certificate(const SupportSet& T, const Eigen::VectorXcd& omega,
                                    int m) {
  if (T.empty()) throw InvalidValueError("certificate needs a nonempty support");
  if (T.kind() != DomainKind::Torus)
    throw InvalidValueError("torus certificate needs torus support points");
  require_unit_signs(omega, T.size());
  if (m < 1) throw InvalidValueError("certificate degree must be positive");

  Certificate cert;
  cert.space = KernelSpace::trig_torus(m);
  cert.op = MeasurementOperator::torus_fourier(m, true);
  cert.support = T.points();
  cert.omega = normalize_signs(omega);
  if (T.size() >= 2 && min_separation(T) < 2.0 / m) cert.separation_warning = true;

  std::vector<double> y = torus_coords(T);
  const int s = static_cast<int>(y.size());
  Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(s);
  QuarticSolve sol = solve_quartic_system(y, m, cert.omega, zero);
  cert.alpha = sol.alpha;
  cert.beta = sol.beta;
  cert.condition = sol.cond_scaled;
  cert.condition_raw = sol.cond_raw;

  const double scale = 1.0 / std::sqrt(static_cast<double>(2 * m + 1));
  cert.nu = q_hat(y, m, cert.alpha, cert.beta) / scale;
  cert.nu_norm = cert.nu.norm();
  cert.nu_norm_bound = std::sqrt(static_cast<double>(2 * m + 1));

  for (int k = 0; k < s; ++k) {
    QVal q = eval_q(y, m, cert.alpha, cert.beta, y[k]);
    cert.interp_residual = std::max(cert.interp_residual, std::abs(q.value - cert.omega[k]));
    cert.deriv_residual = std::max(cert.deriv_residual, std::abs(q.deriv) / (2.0 * kPi * m));
  }
  return cert;
}

Certificate build_pw_certificate(const SupportSet& T, const Eigen::VectorXcd& omega,
                                 int m, double rho, double L) {
  if (T.empty()) throw InvalidValueError("certificate needs a nonempty support");
  if (T.kind() != DomainKind::Line)
    throw InvalidValueError("windowed certificate needs line support points");
  require_unit_signs(omega, T.size());

  Certificate cert;
  cert.space = KernelSpace::paley_wiener();
  cert.op = MeasurementOperator::mollified_fourier(m, L, rho);  // validates m, rho, L
  cert.support = T.points();
  cert.omega = normalize_signs(omega);

  const int s = static_cast<int>(T.size());
  std::vector<double> y(s);
  Eigen::VectorXcd v(s), d(s);
  for (int k = 0; k < s; ++k) {
    const double t = T[k].coord();
    if (std::abs(t) > L / 2.0 + 1e-12)
      throw InvalidValueError("windowed certificate supports must lie in [-L/2, L/2]");
    y[k] = t / L;
    const double h = mollifier_window(L, rho, t);
    const double dh = mollifier_window_deriv(L, rho, t);
    v[k] = cert.omega[k] / h;
    d[k] = -L * cert.omega[k] * dh / (h * h);
  }

  {
    // The scaled separation drives solvability exactly as on the torus.
    std::vector<DomainPoint> wrapped;
    wrapped.reserve(y.size());
    for (double yk : y) wrapped.push_back(DomainPoint::torus(yk));
    SupportSet Y{wrapped};
    if (Y.size() >= 2 && min_separation(Y) < 2.0 / m) cert.separation_warning = true;
  }

  QuarticSolve sol = solve_quartic_system(y, m, v, d);
  cert.alpha = sol.alpha;
  cert.beta = sol.beta;
  cert.condition = sol.cond_scaled;
  cert.condition_raw = sol.cond_raw;

  cert.nu = q_hat(y, m, cert.alpha, cert.beta);
  cert.nu_norm = cert.nu.norm();
  cert.nu_norm_bound = std::sqrt(2.0 * L / rho) / sinc_pi(rho / (2.0 * L));

  for (int k = 0; k < s; ++k) {
    DomainPoint t = T[k];
    cert.interp_residual = std::max(cert.interp_residual, std::abs(cert.psi(t) - cert.omega[k]));
    cert.deriv_residual =
        std::max(cert.deriv_residual, std::abs(cert.psi_deriv(t)) * L / (2.0 * kPi * m));
  }
  return cert;
}

Certificate build_bargmann_certificate(const KernelSpace& space, const SupportSet& W,
                                       const Eigen::VectorXcd& omega, int truncation_N) {
  if (space.type != KernelSpace::Type::Bargmann)
    throw InvalidValueError("coherent certificate needs the plane kernel space");
  if (W.empty()) throw InvalidValueError("certificate needs a nonempty support");
  if (W.kind() != DomainKind::Plane)
    throw InvalidValueError("coherent certificate needs plane support points");
  require_unit_signs(omega, W.size());
  for (const auto& p : W)
    if (std::abs(p.z()) > space.R + 1e-12)
      throw InvalidValueError("support point outside the working disc");

  Certificate cert;
  cert.space = space;
  cert.support = W.points();
  cert.omega = normalize_signs(omega);

  cert.sigma_down_minus_1 = sigma_down(W) - 1.0;
  if (cert.sigma_down_minus_1 >= 0.5)
    throw SeparationError("separation condition violated: coherence sum " +
                          std::to_string(1.0 + cert.sigma_down_minus_1));

  const int s = static_cast<int>(W.size());
  const int n = 2 * s;
  Eigen::MatrixXcd Phi(n, n);
  for (int k = 0; k < s; ++k) {
    for (int j = 0; j < s; ++j) {
      cplx wj = W[j].z(), wk = W[k].z();
      Phi(k, j) = ip_eta_eta(wj, wk);
      Phi(k, s + j) = ip_deta_eta(wj, wk);
      Phi(s + k, j) = std::conj(ip_deta_eta(wk, wj));
      Phi(s + k, s + j) = ip_deta_deta(wj, wk);
    }
  }

  Eigen::MatrixXcd dev = Phi - Eigen::MatrixXcd::Identity(n, n);
  cert.phi_deviation = dev.cwiseAbs().rowwise().sum().maxCoeff();
  if (cert.phi_deviation > cert.sigma_down_minus_1 + 1e-12)
    throw Error("interpolation matrix deviation exceeds the coherence bound");

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Phi,
                                                       Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    cert.condition = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
    cert.condition_raw = cert.condition;
  }
  if (!(cert.condition < 1e12))
    throw SeparationError("separation too small: interpolation system condition " +
                          std::to_string(cert.condition));

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs.head(s) = cert.omega;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Phi);
  Eigen::VectorXcd x = lu.solve(rhs);
  Eigen::MatrixXd absPhi = Phi.cwiseAbs();
  for (int pass = 0; pass < 6; ++pass) {
    Eigen::VectorXcd r = rhs - Phi * x;
    Eigen::VectorXd denom = absPhi * x.cwiseAbs() + rhs.cwiseAbs();
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(r[i]) / (denom[i] + 1e-300));
    if (err <= 1e-12) break;
    x += lu.solve(r);
  }
  cert.alpha = x.head(s);
  cert.beta = x.tail(s);

  // Neumann-series coefficient bounds, with the measured deviation in the
  // role of the perturbation size.
  const double eps = cert.phi_deviation;
  if (eps < 0.5) {
    const double bound = 2.0 * eps / (1.0 - 2.0 * eps);
    for (int k = 0; k < s; ++k) {
      if (std::abs(cert.alpha[k] - cert.omega[k]) > bound + 1e-10 ||
          std::abs(cert.beta[k]) > bound + 1e-10)
        throw Error("coefficients violate the Neumann perturbation bound");
    }
  }

  const int N =
      truncation_N >= 0 ? truncation_N : bargmann_truncation_degree(space.R, 1e-10);
  cert.op = MeasurementOperator::bargmann_monomials(N);
  cert.nu = Eigen::VectorXcd::Zero(N + 2);
  for (int k = 0; k < s; ++k) {
    cplx w = W[k].z();
    Eigen::VectorXcd a = atom_response(cert.op, W[k]);
    cert.nu += cert.alpha[k] * a;
    for (int nn = 0; nn <= N + 1; ++nn) {
      cplx dcomp = (nn > 0 ? std::sqrt(static_cast<double>(nn)) * a[nn - 1] : cplx(0, 0)) -
                   w * a[nn];
      cert.nu[nn] += cert.beta[k] * dcomp;
    }
  }
  cert.nu_norm = cert.nu.norm();

  for (int k = 0; k < s; ++k) {
    PlaneLocals loc = plane_locals(cert, W[k].z());
    cert.interp_residual =
        std::max(cert.interp_residual, std::abs(loc.g_eta - cert.omega[k]));
    cert.deriv_residual = std::max(cert.deriv_residual, std::abs(loc.g_deta));
  }
  return cert;
}

double sigma_bar(const SupportSet& W, cplx z) {
  if (W.kind() != DomainKind::Plane)
    throw InvalidValueError("coherence sums are defined for plane supports");
  double acc = 0.0;
  for (const auto& p : W) acc += phi_coherence(std::abs(z - p.z()));
  return acc;
}

double sigma_down(const SupportSet& W) {
  double best = 0.0;
  for (const auto& p : W) best = std::max(best, sigma_bar(W, p.z()));
  return best;
}

double sigma_up(const SupportSet& W, double R, double grid_res) {
  if (W.kind() != DomainKind::Plane)
    throw InvalidValueError("coherence sums are defined for plane supports");
  if (!(grid_res > 0.0)) throw InvalidValueError("grid resolution must be positive");
  (void)R;  // the sweep tracks the atoms, which are confined to the disc

  // Sweep windows around each atom; outside of them the sum is provably
  // below what any window already contains.
  const double half = 4.0;
  const std::size_t s = W.size();
  double best = 0.0;
  for (const auto& p : W) {
    cplx w = p.z();
    const int steps = static_cast<int>(std::ceil(2.0 * half / grid_res));
    for (int ix = 0; ix <= steps; ++ix) {
      double zx = w.real() - half + ix * grid_res;
      for (int iy = 0; iy <= steps; ++iy) {
        double zy = w.imag() - half + iy * grid_res;
        best = std::max(best, sigma_bar(W, cplx(zx, zy)));
      }
    }
  }
  // Per-atom slope of the coherence profile stays below 1.9, so half a cell
  // diagonal of drift is covered by the pad below.
  const double pad = static_cast<double>(s) * 1.9 * grid_res * 0.7071067811865476;
  const double outside = static_cast<double>(s) * phi_coherence(half);
  return std::max(best + pad, outside);
}

SeparationCheck check_separation(const SupportSet& W, double tau, double R,
                                 double grid_res) {
  if (!(tau > 0.0) || tau >= 1.0)
    throw InvalidValueError("separation margin tau must lie in (0, 1)");
  SeparationCheck out;
  out.radius = (std::sqrt(5.0) - 1.0) / (4.0 * sigma_up(W, R, grid_res));

  const double half = 4.0 + out.radius;
  const std::size_t s = W.size();
  const double cell = grid_res * 0.7071067811865476;
  double best = 0.0;
  for (const auto& p : W) {
    cplx w = p.z();
    const int steps = static_cast<int>(std::ceil(2.0 * half / grid_res));
    for (int ix = 0; ix <= steps; ++ix) {
      double zx = w.real() - half + ix * grid_res;
      for (int iy = 0; iy <= steps; ++iy) {
        cplx z(zx, w.imag() - half + iy * grid_res);
        if (plane_min_dist(W, z) <= out.radius) continue;
        double acc = 0.0;
        double slope = 0.0;
        for (const auto& q : W) {
          const double d = std::abs(z - q.z());
          acc += std::exp(-0.5 * d * d);
          // max of t exp(-t^2/2) over the cell's distance range around d;
          // unimodal with peak at t = 1
          const double lo = std::max(0.0, d - cell), hi = d + cell;
          double g = (lo <= 1.0 && 1.0 <= hi)
                         ? std::exp(-0.5)
                         : std::max(lo * std::exp(-0.5 * lo * lo),
                                    hi * std::exp(-0.5 * hi * hi));
          slope += g;
        }
        best = std::max(best, acc + slope * cell);
      }
    }
  }
  const double outside =
      static_cast<double>(s) * std::exp(-0.5 * half * half);
  out.sup_value = std::max(best, outside);
  out.margin = (1.0 - tau) - out.sup_value;
  out.ok = out.margin >= 0.0;
  return out;
}

namespace {

ValidationReport validate_periodic(const Certificate& cert, double grid_res,
                                   double near_radius, double far_gap) {
  const bool windowed = cert.op.type == MeasurementOperator::Type::MollifiedFourier;
  const int m = cert.op.m;
  ValidationReport rep;
  rep.near_radius = near_radius > 0.0 ? near_radius : 0.16749 / m;
  rep.far_bound = 1.0 - (far_gap > 0.0
                             ? far_gap
                             : (windowed ? 0.34 : 0.3354) * 0.16749 * 0.16749);
  const double near_const = windowed ? 0.34 : 0.3354;

  double res = grid_res > 0.0 ? grid_res : 1.0 / (64.0 * m);
  int n = std::max(8, static_cast<int>(std::lround(1.0 / res)));
  rep.grid_res = 1.0 / n;
  if (2.0 * rep.near_radius * n < 8.0 - 1e-12)
    throw GridTooCoarseError("grid leaves fewer than 8 points per near region");

  std::vector<double> y;
  y.reserve(cert.support.size());
  for (const auto& p : cert.support)
    y.push_back(windowed ? p.coord() / cert.op.L : p.coord());

  const double L = cert.op.L;
  double near_margin = std::numeric_limits<double>::infinity();
  double offgrid = 0.0, supnorm = 0.0, maxq = 0.0;
  bool near_ok = true;

  const bool coeff_form = cert.alpha.size() > 0;
  const double nu_scale =
      (!windowed && cert.op.normalized) ? 1.0 / std::sqrt(double(2 * m + 1)) : 1.0;
  auto q_at = [&](double x) {
    if (coeff_form) return eval_q(y, m, cert.alpha, cert.beta, x);
    QVal q = eval_trig_from_nu(cert.nu, m, x);
    q.value *= nu_scale;
    q.deriv *= nu_scale;
    return q;
  };

  for (int i = 0; i < n; ++i) {
    const double x = -0.5 + static_cast<double>(i) / n;  // one full period
    double dmin = std::numeric_limits<double>::infinity();
    for (double yk : y) dmin = std::min(dmin, std::abs(wrap_half(x - yk)));

    QVal q = q_at(x);
    double val = std::abs(q.value);
    if (windowed) {
      maxq = std::max(maxq, val);
      val *= mollifier_window(L, cert.op.rho, x * L);
    }
    supnorm = std::max(supnorm, val);
    if (dmin <= rep.near_radius) {
      const double envelope = 1.0 - near_const * m * m * dmin * dmin;
      near_margin = std::min(near_margin, envelope - val);
      if (val > envelope + 1e-9) near_ok = false;
    } else {
      offgrid = std::max(offgrid, val);
    }
  }

  if (windowed) {
    // Informational sweep past the observation window. The envelope
    // maxq * sqrt(L/2 rho) / (pi t) caps everything beyond the swept range.
    const double amp = maxq * std::sqrt(L / (2.0 * cert.op.rho)) / kPi;
    const double t_end = std::min(100.0 * L, std::max(L, amp / 0.1));
    const double step = L / n;
    double beyond = 0.0;
    for (double t = L / 2.0; t <= t_end; t += step) {
      QVal qp = q_at(t / L);
      QVal qm = q_at(-t / L);
      beyond = std::max(beyond, std::abs(qp.value) *
                                    std::abs(mollifier_window(L, cert.op.rho, t)));
      beyond = std::max(beyond, std::abs(qm.value) *
                                    std::abs(mollifier_window(L, cert.op.rho, -t)));
    }
    rep.beyond_window_sup = std::max(beyond, amp / t_end);
  }

  rep.near_margin = near_margin;
  rep.offgrid_sup = offgrid;
  rep.sup_norm = supnorm;
  rep.near_bound_ok = near_ok;
  rep.far_margin = rep.far_bound - offgrid;
  rep.far_bound_ok = rep.far_margin >= -1e-9;

  for (std::size_t k = 0; k < cert.support.size(); ++k) {
    rep.interp_residual =
        std::max(rep.interp_residual, std::abs(cert.psi(cert.support[k]) - cert.omega[k]));
    double scale = windowed ? L / (2.0 * kPi * m) : 1.0 / (2.0 * kPi * m);
    rep.deriv_residual =
        std::max(rep.deriv_residual, std::abs(cert.psi_deriv(cert.support[k])) * scale);
  }
  return rep;
}

ValidationReport validate_plane(const Certificate& cert, double grid_res,
                                double near_radius, double far_gap) {
  SupportSet W{cert.support};
  const double R = cert.space.R;
  const double sup_coh = sigma_up(W, R);

  ValidationReport rep;
  rep.near_radius =
      near_radius > 0.0 ? near_radius : (std::sqrt(3.0) - 1.0) / (4.0 * sup_coh);
  const double gap = far_gap > 0.0 ? far_gap : 0.01;
  rep.far_bound = 1.0 - gap;
  const double r_abs = (std::sqrt(5.0) - 1.0) / 4.0;

  double res = grid_res > 0.0 ? grid_res : rep.near_radius / 16.0;
  rep.grid_res = res;
  if (res > rep.near_radius * std::sqrt(kPi / 8.0))
    throw GridTooCoarseError("grid leaves fewer than 8 points per near region");

  double hess_max = -std::numeric_limits<double>::infinity();
  double strict_min_gap = std::numeric_limits<double>::infinity();
  double far_sup = 0.0, offgrid = 0.0, supnorm = 0.0;
  bool strict_ok = true, hess_ok = true;

  const bool coeff_form = cert.alpha.size() > 0;
  auto value_at = [&](cplx z) {
    return coeff_form ? coherent_value(cert, z) : plane_locals(cert, z).g_eta;
  };

  const int steps = static_cast<int>(std::ceil(2.0 * R / res));
  for (int ix = 0; ix <= steps; ++ix) {
    const double zx = -R + ix * res;
    for (int iy = 0; iy <= steps; ++iy) {
      const cplx z(zx, -R + iy * res);
      if (std::abs(z) > R) continue;
      const double d = plane_min_dist(W, z);
      if (d <= rep.near_radius) {
        const double eig = largest_curvature_eig(cert, z);
        hess_max = std::max(hess_max, eig);
        if (!(eig < 0.0)) hess_ok = false;
        supnorm = std::max(supnorm, std::abs(value_at(z)));
      } else {
        const double val = std::abs(value_at(z));
        supnorm = std::max(supnorm, val);
        offgrid = std::max(offgrid, val);
        if (d <= r_abs) {
          strict_min_gap = std::min(strict_min_gap, 1.0 - val);
          if (val > 1.0 - 1e-9) strict_ok = false;
        } else {
          far_sup = std::max(far_sup, val);
        }
      }
    }
  }

  rep.hessian_margin = -hess_max;
  rep.hessian_ok = hess_ok;
  rep.near_margin = strict_min_gap;
  rep.near_bound_ok = strict_ok;
  rep.offgrid_sup = offgrid;
  rep.sup_norm = supnorm;
  rep.far_margin = rep.far_bound - far_sup;
  rep.far_bound_ok = rep.far_margin >= -1e-9;

  for (std::size_t k = 0; k < cert.support.size(); ++k) {
    PlaneLocals loc = plane_locals(cert, cert.support[k].z());
    rep.interp_residual =
        std::max(rep.interp_residual, std::abs(loc.g_eta - cert.omega[k]));
    rep.deriv_residual = std::max(rep.deriv_residual, std::abs(loc.g_deta));
  }
  return rep;
}

}  // namespace

ValidationReport validate(const Certificate& cert, double grid_res, double near_radius,
                          double far_gap) {
  if (cert.support.empty()) throw InvalidValueError("certificate has no support");
  switch (cert.op.type) {
    case MeasurementOperator::Type::TorusFourier:
    case MeasurementOperator::Type::MollifiedFourier:
      return validate_periodic(cert, grid_res, near_radius, far_gap);
    case MeasurementOperator::Type::BargmannMonomials:
      return validate_plane(cert, grid_res, near_radius, far_gap);
  }
  throw InvalidValueError("unknown certificate operator");
}

nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json j;
  j["space"] = cert.space.name();
  j["operator"] = op_to_json(cert.op);
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : cert.support) {
    if (p.kind() == DomainKind::Plane)
      pts.push_back({p.z().real(), p.z().imag()});
    else
      pts.push_back(p.coord());
  }
  j["support"] = pts;
  j["omega"] = complex_vector_json(cert.omega);
  j["alpha"] = complex_vector_json(cert.alpha);
  j["beta"] = complex_vector_json(cert.beta);
  j["nu"] = complex_vector_json(cert.nu);
  j["condition"] = cert.condition;
  j["condition_raw"] = cert.condition_raw;
  j["interp_residual"] = cert.interp_residual;
  j["deriv_residual"] = cert.deriv_residual;
  j["separation_warning"] = cert.separation_warning;
  j["nu_norm"] = cert.nu_norm;
  if (cert.nu_norm_bound > 0.0) j["nu_norm_bound"] = cert.nu_norm_bound;
  if (cert.op.type == MeasurementOperator::Type::TorusFourier ||
      cert.op.type == MeasurementOperator::Type::MollifiedFourier)
    j["quartic_freq"] = fejer4_freq(cert.op.m);
  if (cert.sigma_down_minus_1 >= 0.0) {
    j["sigma_down_minus_1"] = cert.sigma_down_minus_1;
    j["phi_deviation"] = cert.phi_deviation;
  }
  return j;
}

nlohmann::json validation_to_json(const ValidationReport& rep) {
  nlohmann::json j;
  j["interp_residual"] = rep.interp_residual;
  j["deriv_residual"] = rep.deriv_residual;
  j["offgrid_sup"] = rep.offgrid_sup;
  j["sup_norm"] = rep.sup_norm;
  j["near_margin"] = rep.near_margin;
  j["far_margin"] = rep.far_margin;
  j["hessian_margin"] = rep.hessian_margin;
  j["beyond_window_sup"] = rep.beyond_window_sup;
  j["near_bound_ok"] = rep.near_bound_ok;
  j["far_bound_ok"] = rep.far_bound_ok;
  j["hessian_ok"] = rep.hessian_ok;
  j["grid_res"] = rep.grid_res;
  j["near_radius"] = rep.near_radius;
  j["far_bound"] = rep.far_bound;
  j["ok"] = rep.ok();
  return j;
}

}  // namespace atomkernel
