#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <nlohmann/json.hpp>

#include "atomkernel/measure.hpp"
#include "atomkernel/rng.hpp"

using namespace atomkernel;

namespace {

AtomicMeasure torus_measure(std::initializer_list<std::pair<double, cplx>> atoms) {
  std::vector<Atom> v;
  for (const auto& [x, c] : atoms) v.push_back({DomainPoint::torus(x), c});
  return AtomicMeasure(std::move(v));
}

}  // namespace

TEST_SUITE("measure") {

TEST_CASE("tv_norm sums moduli of distinct atoms") {
  CHECK(tv_norm(torus_measure({{0.2, cplx(1, 0)}, {0.7, cplx(0, -2)}})) ==
        doctest::Approx(3.0).epsilon(1e-15));
  CHECK(tv_norm(AtomicMeasure()) == 0.0);
  // coincident atoms cancel before the moduli are summed
  CHECK(tv_norm(torus_measure({{0.2, cplx(1, 0)}, {0.2, cplx(-1, 0)}})) == 0.0);
}

TEST_CASE("tv_norm triangle inequality and homogeneity") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Atom> a, b;
    const int na = 1 + int(rng.next_u64() % 5);
    const int nb = 1 + int(rng.next_u64() % 5);
    for (int i = 0; i < na; ++i) {
      a.push_back({DomainPoint::torus(rng.uniform()), rng.normal_complex()});
    }
    for (int i = 0; i < nb; ++i) {
      b.push_back({DomainPoint::torus(rng.uniform()), rng.normal_complex()});
    }
    const AtomicMeasure mu(a);
    const AtomicMeasure nu(b);
    std::vector<Atom> sum = a;
    sum.insert(sum.end(), b.begin(), b.end());
    REQUIRE(tv_norm(AtomicMeasure(sum)) <= tv_norm(mu) + tv_norm(nu) + 1e-12);

    const cplx scale = 3.7 * rng.unit_phase();
    std::vector<Atom> scaled = a;
    for (auto& atom : scaled) atom.c *= scale;
    REQUIRE(tv_norm(AtomicMeasure(scaled)) ==
            doctest::Approx(std::abs(scale) * tv_norm(mu)).epsilon(1e-14));
  }
}

TEST_CASE("normalize merges nearby atoms at the weighted centroid") {
  const AtomicMeasure merged =
      normalize(torus_measure({{0.2, cplx(1, 0)}, {0.2001, cplx(1, 0)}}), 1e-3);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].x.coord() == doctest::Approx(0.20005).epsilon(1e-12));
  CHECK(merged[0].c.real() == doctest::Approx(2.0).epsilon(1e-15));

  const AtomicMeasure untouched = normalize(torus_measure({{0.2, cplx(1, 0)}}), 0.0);
  REQUIRE(untouched.size() == 1);
  CHECK(untouched[0].x.coord() == 0.2);

  const AtomicMeasure separated =
      normalize(torus_measure({{0.2, cplx(1, 0)}, {0.7, cplx(1, 0)}}), 1e-3);
  CHECK(separated.size() == 2);
}

TEST_CASE("normalize handles the torus seam") {
  const AtomicMeasure merged =
      normalize(torus_measure({{0.999, cplx(1, 0)}, {0.001, cplx(1, 0)}}), 0.01);
  REQUIRE(merged.size() == 1);
  // centroid sits on the seam, equally far from both inputs
  const double d = distance(merged[0].x, DomainPoint::torus(0.0));
  CHECK(d <= 1e-12);
}

TEST_CASE("normalize drops cancelled clusters and keeps tv non-increasing") {
  const AtomicMeasure gone =
      normalize(torus_measure({{0.5, cplx(1, 0)}, {0.5001, cplx(-1, 0)}}), 1e-2);
  CHECK(gone.empty());

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Atom> a;
    const int n = 1 + int(rng.next_u64() % 6);
    for (int i = 0; i < n; ++i) {
      a.push_back({DomainPoint::torus(rng.uniform()), rng.normal_complex()});
    }
    const AtomicMeasure mu(a);
    REQUIRE(tv_norm(normalize(mu, 0.05)) <= tv_norm(mu) + 1e-12);
  }
}

TEST_CASE("mass_in_neighborhood") {
  const SupportSet T({DomainPoint::torus(0.3)});
  CHECK(mass_in_neighborhood(torus_measure({{0.3, cplx(2, 0)}}), T, 0.01) ==
        doctest::Approx(2.0));
  CHECK(mass_in_neighborhood(torus_measure({{0.3, cplx(2, 0)}, {0.6, cplx(1, 0)}}), T, 0.01) ==
        doctest::Approx(2.0));
  CHECK(mass_in_neighborhood(AtomicMeasure(), T, 0.01) == 0.0);
}

TEST_CASE("neighborhood mass never exceeds the tv norm") {
  Rng rng(19);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Atom> a;
    const int n = 1 + int(rng.next_u64() % 6);
    for (int i = 0; i < n; ++i) {
      a.push_back({DomainPoint::torus(rng.uniform()), rng.normal_complex()});
    }
    const AtomicMeasure mu(a);
    std::vector<DomainPoint> pts;
    const int k = 1 + int(rng.next_u64() % 3);
    for (int i = 0; i < k; ++i) pts.push_back(DomainPoint::torus(rng.uniform()));
    SupportSet T;
    try {
      T = SupportSet(pts);
    } catch (const InvalidValueError&) {
      continue;  // rare duplicate draw
    }
    const double delta = rng.uniform(1e-3, 0.4);
    REQUIRE(mass_in_neighborhood(mu, T, delta) <= tv_norm(mu) + 1e-12);
  }
}

TEST_CASE("atom_match_error") {
  const AtomicMeasure truth = torus_measure({{0.3, cplx(2, 0)}});
  SUBCASE("identical measures") {
    const MatchError e = atom_match_error(truth, truth);
    CHECK(e.support_err == 0.0);
    CHECK(e.weight_err == 0.0);
    CHECK(e.unmatched_mass == 0.0);
  }
  SUBCASE("small position offset") {
    const MatchError e = atom_match_error(torus_measure({{0.3001, cplx(2, 0)}}), truth);
    CHECK(e.support_err == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(e.weight_err == doctest::Approx(0.0));
    CHECK(e.unmatched_mass == 0.0);
  }
  SUBCASE("spurious atom contributes unmatched mass") {
    const MatchError e =
        atom_match_error(torus_measure({{0.3, cplx(2, 0)}, {0.9, cplx(0.01, 0)}}), truth);
    CHECK(e.support_err == doctest::Approx(0.0));
    CHECK(e.unmatched_mass == doctest::Approx(0.01));
  }
  SUBCASE("relative weight error") {
    const MatchError e = atom_match_error(torus_measure({{0.3, cplx(2.2, 0)}}), truth);
    CHECK(e.weight_err == doctest::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("json round trip") {
  const AtomicMeasure torus = torus_measure({{0.25, cplx(1, -2)}, {0.5, cplx(0, 3)}});
  const AtomicMeasure back = measure_from_json(measure_to_json(torus), DomainKind::Torus);
  REQUIRE(back.size() == torus.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].x.coord() == torus[i].x.coord());
    CHECK(back[i].c == torus[i].c);
  }

  const AtomicMeasure plane(
      {Atom{DomainPoint::plane(cplx(1.5, -0.25)), cplx(0.5, 0.5)}});
  const AtomicMeasure pback = measure_from_json(measure_to_json(plane), DomainKind::Plane);
  REQUIRE(pback.size() == 1);
  CHECK(pback[0].x.z() == plane[0].x.z());

  CHECK_THROWS_AS(measure_from_json(nlohmann::json{{"bogus", 1}}, DomainKind::Torus),
                  ConfigError);
}

TEST_CASE("contamination spec reports its tv mass") {
  ContaminationSpec spec{torus_measure({{0.1, cplx(0.03, 0)}, {0.8, cplx(0, -0.02)}})};
  CHECK(spec.tv() == doctest::Approx(0.05).epsilon(1e-14));
}

}  // TEST_SUITE
