#include "atomkernel/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace atomkernel {

namespace {

void require_finite_weight(cplx c) {
  if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
    throw InvalidValueError("non-finite atom weight");
  }
}

// Sum weights of exactly coincident atoms. Returns (location, total weight)
// pairs in first-appearance order.
std::vector<Atom> coalesce_exact(const AtomicMeasure& mu) {
  std::vector<Atom> out;
  for (const auto& a : mu) {
    bool merged = false;
    for (auto& o : out) {
      if (distance(o.x, a.x) == 0.0) {
        o.c += a.c;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(a);
  }
  return out;
}

}  // namespace

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) return;
  const DomainKind k = atoms_.front().x.kind();
  for (const auto& a : atoms_) {
    if (a.x.kind() != k) throw VariantMismatchError("measure mixes point domains");
    require_finite_weight(a.c);
  }
}

DomainKind AtomicMeasure::kind() const {
  if (atoms_.empty()) throw InvalidValueError("empty measure has no domain");
  return atoms_.front().x.kind();
}

SupportSet AtomicMeasure::support() const {
  std::vector<DomainPoint> pts;
  for (const auto& a : coalesce_exact(*this)) {
    if (std::abs(a.c) > 0.0) pts.push_back(a.x);
  }
  return SupportSet(std::move(pts));
}

double tv_norm(const AtomicMeasure& mu) {
  double s = 0.0;
  for (const auto& a : coalesce_exact(mu)) s += std::abs(a.c);
  return s;
}

AtomicMeasure normalize(const AtomicMeasure& mu, double merge_radius) {
  if (!(merge_radius >= 0.0)) throw InvalidValueError("merge_radius must be >= 0");
  if (mu.empty()) return mu;

  std::vector<Atom> pool = mu.atoms();
  std::vector<bool> used(pool.size(), false);
  std::vector<Atom> out;

  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (used[i]) continue;
    // Grow a cluster around atom i.
    std::vector<std::size_t> cluster{i};
    used[i] = true;
    for (std::size_t a = 0; a < cluster.size(); ++a) {
      for (std::size_t j = 0; j < pool.size(); ++j) {
        if (used[j]) continue;
        if (distance(pool[cluster[a]].x, pool[j].x) <= merge_radius) {
          cluster.push_back(j);
          used[j] = true;
        }
      }
    }

    cplx total(0.0, 0.0);
    double mass = 0.0;
    for (std::size_t idx : cluster) {
      total += pool[idx].c;
      mass += std::abs(pool[idx].c);
    }
    if (mass == 0.0 || std::abs(total) == 0.0) continue;

    // Modulus-weighted centroid. On the torus, average displacements from a
    // base representative so clusters straddling the seam stay tight.
    const DomainPoint& base = pool[cluster.front()].x;
    if (base.kind() == DomainKind::Plane) {
      cplx num(0.0, 0.0);
      for (std::size_t idx : cluster) num += std::abs(pool[idx].c) * pool[idx].x.z();
      out.push_back(Atom{DomainPoint::plane(num / mass), total});
    } else {
      double num = 0.0;
      for (std::size_t idx : cluster) {
        double d = pool[idx].x.coord() - base.coord();
        if (base.kind() == DomainKind::Torus) d -= std::round(d);
        num += std::abs(pool[idx].c) * d;
      }
      const double center = base.coord() + num / mass;
      out.push_back(Atom{base.kind() == DomainKind::Torus ? DomainPoint::torus(center)
                                                          : DomainPoint::line(center),
                         total});
    }
  }
  return AtomicMeasure(std::move(out));
}

double mass_in_neighborhood(const AtomicMeasure& mu, const SupportSet& T, double delta) {
  double s = 0.0;
  for (const auto& a : coalesce_exact(mu)) {
    if (in_neighborhood(a.x, T, delta)) s += std::abs(a.c);
  }
  return s;
}

MatchError atom_match_error(const AtomicMeasure& estimated, const AtomicMeasure& truth) {
  std::vector<Atom> est = coalesce_exact(estimated);
  std::vector<Atom> ref = coalesce_exact(truth);

  std::vector<bool> est_used(est.size(), false);
  std::vector<bool> ref_used(ref.size(), false);

  MatchError err;
  const std::size_t pairs = std::min(est.size(), ref.size());
  for (std::size_t n = 0; n < pairs; ++n) {
    // Globally closest unmatched pair.
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      if (est_used[i]) continue;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (ref_used[j]) continue;
        const double d = distance(est[i].x, ref[j].x);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    est_used[bi] = true;
    ref_used[bj] = true;
    err.support_err = std::max(err.support_err, best);
    const double denom = std::abs(ref[bj].c);
    if (denom > 0.0) {
      err.weight_err = std::max(err.weight_err, std::abs(est[bi].c - ref[bj].c) / denom);
    }
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (!est_used[i]) err.unmatched_mass += std::abs(est[i].c);
  }
  return err;
}

nlohmann::json measure_to_json(const AtomicMeasure& mu) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : mu) {
    nlohmann::json item;
    if (a.x.kind() == DomainKind::Plane) {
      item["x"] = {a.x.z().real(), a.x.z().imag()};
    } else {
      item["x"] = a.x.coord();
    }
    item["c"] = {a.c.real(), a.c.imag()};
    arr.push_back(std::move(item));
  }
  return arr;
}

AtomicMeasure measure_from_json(const nlohmann::json& j, DomainKind kind) {
  if (!j.is_array()) throw ConfigError("measure JSON must be an array of atoms");
  std::vector<Atom> atoms;
  for (const auto& item : j) {
    if (!item.contains("x") || !item.contains("c")) {
      throw ConfigError("atom entry needs fields x and c");
    }
    const auto& jx = item.at("x");
    DomainPoint p = DomainPoint::line(0.0);
    if (jx.is_array()) {
      if (jx.size() != 2 || kind != DomainKind::Plane) {
        throw ConfigError("two-component atom location requires a plane domain");
      }
      p = DomainPoint::plane(cplx(jx.at(0).get<double>(), jx.at(1).get<double>()));
    } else if (jx.is_number()) {
      const double v = jx.get<double>();
      switch (kind) {
        case DomainKind::Torus: p = DomainPoint::torus(v); break;
        case DomainKind::Line: p = DomainPoint::line(v); break;
        case DomainKind::Plane: p = DomainPoint::plane(cplx(v, 0.0)); break;
      }
    } else {
      throw ConfigError("atom location must be a number or [re, im]");
    }
    const auto& jc = item.at("c");
    if (!jc.is_array() || jc.size() != 2) throw ConfigError("atom weight must be [re, im]");
    atoms.push_back(Atom{p, cplx(jc.at(0).get<double>(), jc.at(1).get<double>())});
  }
  return AtomicMeasure(std::move(atoms));
}

}  // namespace atomkernel
