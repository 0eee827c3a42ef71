#pragma once

#include <complex>
#include <string>
#include <vector>

#include "atomkernel/errors.hpp"

namespace atomkernel {

using cplx = std::complex<double>;

enum class DomainKind { Torus, Line, Plane };

std::string to_string(DomainKind k);

// A point in one of the three supported domains. Torus coordinates are
// canonicalized into [0, 1); line and torus points only use the real part.
class DomainPoint {
 public:
  static DomainPoint torus(double t);
  static DomainPoint line(double x);
  static DomainPoint plane(cplx z);

  DomainKind kind() const { return kind_; }

  // Real coordinate for torus and line points.
  double coord() const;

  // Complex coordinate; line/torus points map to (coord, 0).
  cplx z() const { return z_; }

 private:
  DomainPoint(DomainKind k, cplx z) : kind_(k), z_(z) {}
  DomainKind kind_;
  cplx z_;
};

double distance(const DomainPoint& a, const DomainPoint& b);

// Ordered list of pairwise-distinct points from a single domain.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(std::vector<DomainPoint> pts);

  std::size_t size() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }
  const DomainPoint& operator[](std::size_t i) const { return pts_[i]; }
  const std::vector<DomainPoint>& points() const { return pts_; }
  DomainKind kind() const;

  auto begin() const { return pts_.begin(); }
  auto end() const { return pts_.end(); }

 private:
  std::vector<DomainPoint> pts_;
};

// Smallest pairwise distance; requires at least two points.
double min_separation(const SupportSet& T);

// True when x lies strictly within delta of some support point.
bool in_neighborhood(const DomainPoint& x, const SupportSet& T, double delta);

}  // namespace atomkernel
