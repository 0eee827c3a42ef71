#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "atomkernel/domain.hpp"

namespace atomkernel {

struct Atom {
  DomainPoint x;
  cplx c;
};

// Finitely supported complex measure, stored as a flat atom list. Atom
// locations may repeat; total-variation accounting coalesces exact
// duplicates so that cancelling weights do not inflate the norm.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(std::vector<Atom> atoms);

  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  DomainKind kind() const;

  SupportSet support() const;  // distinct locations of nonzero atoms

  auto begin() const { return atoms_.begin(); }
  auto end() const { return atoms_.end(); }

 private:
  std::vector<Atom> atoms_;
};

// Total variation of the atomic measure: coincident atoms are summed first,
// then the moduli are added up.
double tv_norm(const AtomicMeasure& mu);

// Coalesce atoms closer than merge_radius into single atoms placed at the
// modulus-weighted centroid of each cluster; zero-weight atoms are dropped.
AtomicMeasure normalize(const AtomicMeasure& mu, double merge_radius);

// Mass |mu|(S) of the delta-neighborhood S of the support set T.
double mass_in_neighborhood(const AtomicMeasure& mu, const SupportSet& T, double delta);

struct MatchError {
  double support_err = 0.0;    // largest matched-pair distance
  double weight_err = 0.0;     // largest matched relative weight error
  double unmatched_mass = 0.0; // TV mass of estimated atoms left unmatched
};

// Greedy nearest matching of estimated atoms against the reference measure.
MatchError atom_match_error(const AtomicMeasure& estimated, const AtomicMeasure& truth);

// A measure designated as contamination in a recovery experiment; it is
// synthesized together with the target but treated as error mass.
struct ContaminationSpec {
  AtomicMeasure measure;
  double tv() const { return tv_norm(measure); }
};

nlohmann::json measure_to_json(const AtomicMeasure& mu);
AtomicMeasure measure_from_json(const nlohmann::json& j, DomainKind kind);

}  // namespace atomkernel
