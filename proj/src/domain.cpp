#include "atomkernel/domain.hpp"

#include <cmath>
#include <limits>

namespace atomkernel {

std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Torus: return "torus";
    case DomainKind::Line: return "line";
    case DomainKind::Plane: return "plane";
  }
  return "?";
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidValueError(std::string("non-finite ") + what);
  }
}

double wrap_unit(double t) {
  double r = t - std::floor(t);
  if (r >= 1.0) r -= 1.0;  // guards floor rounding at t slightly below an integer
  if (r < 0.0) r = 0.0;
  return r;
}

}  // namespace

DomainPoint DomainPoint::torus(double t) {
  require_finite(t, "torus coordinate");
  return DomainPoint(DomainKind::Torus, cplx(wrap_unit(t), 0.0));
}

DomainPoint DomainPoint::line(double x) {
  require_finite(x, "line coordinate");
  return DomainPoint(DomainKind::Line, cplx(x, 0.0));
}

DomainPoint DomainPoint::plane(cplx z) {
  require_finite(z.real(), "plane coordinate");
  require_finite(z.imag(), "plane coordinate");
  return DomainPoint(DomainKind::Plane, z);
}

double DomainPoint::coord() const {
  if (kind_ == DomainKind::Plane) {
    throw VariantMismatchError("coord() is only defined for torus and line points");
  }
  return z_.real();
}

double distance(const DomainPoint& a, const DomainPoint& b) {
  if (a.kind() != b.kind()) {
    throw VariantMismatchError("distance between " + to_string(a.kind()) + " and " +
                               to_string(b.kind()) + " points");
  }
  switch (a.kind()) {
    case DomainKind::Torus: {
      const double d = std::fabs(a.coord() - b.coord());
      return std::min(d, 1.0 - d);
    }
    case DomainKind::Line:
      return std::fabs(a.coord() - b.coord());
    case DomainKind::Plane:
      return std::abs(a.z() - b.z());
  }
  return std::numeric_limits<double>::quiet_NaN();
}

SupportSet::SupportSet(std::vector<DomainPoint> pts) : pts_(std::move(pts)) {
  if (pts_.empty()) return;
  const DomainKind k = pts_.front().kind();
  for (const auto& p : pts_) {
    if (p.kind() != k) {
      throw VariantMismatchError("support set mixes point domains");
    }
  }
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    for (std::size_t j = i + 1; j < pts_.size(); ++j) {
      if (distance(pts_[i], pts_[j]) == 0.0) {
        throw InvalidValueError("support set contains coincident points");
      }
    }
  }
}

DomainKind SupportSet::kind() const {
  if (pts_.empty()) {
    throw InvalidValueError("empty support set has no domain");
  }
  return pts_.front().kind();
}

double min_separation(const SupportSet& T) {
  if (T.size() < 2) {
    throw SeparationError("min_separation needs at least two points");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < T.size(); ++i) {
    for (std::size_t j = i + 1; j < T.size(); ++j) {
      best = std::min(best, distance(T[i], T[j]));
    }
  }
  return best;
}

bool in_neighborhood(const DomainPoint& x, const SupportSet& T, double delta) {
  for (const auto& t : T) {
    if (distance(x, t) < delta) return true;
  }
  return false;
}

}  // namespace atomkernel
