#include "atomkernel/rkhs.hpp"

#include <cmath>

namespace atomkernel {

KernelSpace KernelSpace::trig_torus(int m) {
  if (m < 1) throw InvalidValueError("trig degree must be positive");
  KernelSpace s;
  s.type = Type::TrigTorus;
  s.m = m;
  return s;
}

KernelSpace KernelSpace::paley_wiener() {
  KernelSpace s;
  s.type = Type::PaleyWiener;
  return s;
}

KernelSpace KernelSpace::bargmann(double R) {
  if (!(R > 0.0) || !std::isfinite(R)) throw InvalidValueError("Bargmann radius must be positive");
  KernelSpace s;
  s.type = Type::Bargmann;
  s.R = R;
  return s;
}

DomainKind KernelSpace::domain() const {
  switch (type) {
    case Type::TrigTorus: return DomainKind::Torus;
    case Type::PaleyWiener: return DomainKind::Line;
    case Type::Bargmann: return DomainKind::Plane;
  }
  return DomainKind::Line;
}

const char* KernelSpace::name() const {
  switch (type) {
    case Type::TrigTorus: return "trig_torus";
    case Type::PaleyWiener: return "paley_wiener";
    case Type::Bargmann: return "bargmann";
  }
  return "?";
}

namespace {

constexpr double kSeriesThreshold = 1e-4;

// sin(u)/u as a truncated series, valid for small |u|.
double sin_ratio_series(double u) {
  const double u2 = u * u;
  return 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2 * u2 * u2 / 5040.0;
}

void require_domain(const KernelSpace& space, const DomainPoint& p, const char* where) {
  if (p.kind() != space.domain()) {
    throw VariantMismatchError(std::string(where) + ": " + to_string(p.kind()) +
                               " point in a " + space.name() + " space");
  }
}

}  // namespace

double dirichlet(int m, double x) {
  const int N = 2 * m + 1;
  // The kernel is 1-periodic and even; reduce to [-1/2, 1/2].
  const double t = x - std::round(x);
  if (std::fabs(t) < kSeriesThreshold) {
    return sin_ratio_series(M_PI * N * t) / sin_ratio_series(M_PI * t);
  }
  return std::sin(M_PI * N * t) / (N * std::sin(M_PI * t));
}

double sinc_pi(double x) {
  if (std::fabs(x) < kSeriesThreshold) return sin_ratio_series(M_PI * x);
  return std::sin(M_PI * x) / (M_PI * x);
}

cplx kernel_eval(const KernelSpace& space, const DomainPoint& x, const DomainPoint& y) {
  require_domain(space, x, "kernel_eval");
  require_domain(space, y, "kernel_eval");
  switch (space.type) {
    case KernelSpace::Type::TrigTorus:
      return cplx(dirichlet(space.m, y.coord() - x.coord()), 0.0);
    case KernelSpace::Type::PaleyWiener:
      return cplx(sinc_pi(x.coord() - y.coord()), 0.0);
    case KernelSpace::Type::Bargmann:
      return bargmann_eta(x.z(), y.z());
  }
  return cplx(0.0, 0.0);
}

Eigen::MatrixXcd gram(const KernelSpace& space, const SupportSet& T) {
  const Eigen::Index n = static_cast<Eigen::Index>(T.size());
  Eigen::MatrixXcd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    G(i, i) = cplx(1.0, 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const cplx v = kernel_eval(space, T[static_cast<std::size_t>(j)],
                                 T[static_cast<std::size_t>(i)]);
      G(i, j) = v;
      G(j, i) = std::conj(v);
    }
  }
  return G;
}

HrtResult hrt_check(const KernelSpace& space, const SupportSet& T, double tol) {
  if (T.empty()) throw InvalidValueError("hrt_check needs a nonempty support");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram(space, T),
                                                     Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  return HrtResult{min_eig > tol, min_eig};
}

SynthFunction::SynthFunction(KernelSpace space, AtomicMeasure mu)
    : space_(space), mu_(std::move(mu)) {
  for (const auto& a : mu_) require_domain(space_, a.x, "synthesize");
}

cplx SynthFunction::operator()(const DomainPoint& y) const {
  require_domain(space_, y, "SynthFunction");
  cplx acc(0.0, 0.0);
  for (const auto& a : mu_) acc += a.c * kernel_eval(space_, a.x, y);
  return acc;
}

double SynthFunction::norm() const {
  if (mu_.empty()) return 0.0;
  const Eigen::Index n = static_cast<Eigen::Index>(mu_.size());
  Eigen::VectorXcd c(n);
  std::vector<DomainPoint> pts;
  pts.reserve(mu_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i) = mu_[static_cast<std::size_t>(i)].c;
    pts.push_back(mu_[static_cast<std::size_t>(i)].x);
  }
  // Locations may repeat here, so bypass the distinctness check of gram().
  Eigen::MatrixXcd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      G(i, j) = kernel_eval(space_, pts[static_cast<std::size_t>(j)],
                            pts[static_cast<std::size_t>(i)]);
    }
  }
  const double q = std::real(c.dot(G * c));
  return std::sqrt(std::max(0.0, q));
}

SynthFunction synthesize(const KernelSpace& space, const AtomicMeasure& mu) {
  return SynthFunction(space, mu);
}

// ---------------------------------------------------------------------------
// Bargmann family. Everything below works with the unit-norm kernel sections
//   eta_w(z) = exp(-(|w|^2 + |z|^2)/2) exp(conj(w) z)
// and their first two derivative vectors in the center,
//   d eta_w(z)   = eta_w(z) (z - w)
//   d^2 eta_w(z) = eta_w(z) (z - w)^2.
// The pairwise inner products reduce to Gaussian moment integrals and come
// out as exp(-(|v|^2+|w|^2)/2) exp(conj(v) w) times a low-degree polynomial
// in (w - v).

cplx bargmann_eta(cplx w, cplx z) {
  const double e = -0.5 * (std::norm(w) + std::norm(z));
  return std::exp(e + std::conj(w) * z);
}

cplx bargmann_deta(cplx w, cplx z) { return bargmann_eta(w, z) * (z - w); }

cplx bargmann_d2eta(cplx w, cplx z) {
  const cplx d = z - w;
  return bargmann_eta(w, z) * d * d;
}

namespace {
cplx eta_pair_factor(cplx v, cplx w) {
  const double e = -0.5 * (std::norm(v) + std::norm(w));
  return std::exp(e + std::conj(v) * w);
}
}  // namespace

cplx ip_eta_eta(cplx v, cplx w) { return eta_pair_factor(v, w); }

cplx ip_deta_eta(cplx v, cplx w) { return eta_pair_factor(v, w) * (w - v); }

cplx ip_deta_deta(cplx v, cplx w) {
  return eta_pair_factor(v, w) * (1.0 - std::norm(w - v));
}

cplx ip_d2eta_eta(cplx v, cplx w) {
  const cplx d = w - v;
  return eta_pair_factor(v, w) * d * d;
}

cplx ip_d2eta_deta(cplx v, cplx w) {
  const cplx d = w - v;
  return eta_pair_factor(v, w) * d * (2.0 - std::norm(d));
}

}  // namespace atomkernel
