#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "atomkernel/domain.hpp"
#include "atomkernel/rng.hpp"

using namespace atomkernel;

TEST_SUITE("domain") {

TEST_CASE("torus coordinates are canonicalized into [0,1)") {
  CHECK(DomainPoint::torus(1.25).coord() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(DomainPoint::torus(-0.3).coord() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(DomainPoint::torus(3.0).coord() == 0.0);
  for (double t : {-7.3, -1.0, 0.0, 0.4, 0.999999, 12.5}) {
    const double c = DomainPoint::torus(t).coord();
    CHECK(c >= 0.0);
    CHECK(c < 1.0);
  }
}

TEST_CASE("non-finite coordinates are rejected") {
  CHECK_THROWS_AS(DomainPoint::torus(std::nan("")), InvalidValueError);
  CHECK_THROWS_AS(DomainPoint::line(INFINITY), InvalidValueError);
  CHECK_THROWS_AS(DomainPoint::plane(cplx(0.0, -INFINITY)), InvalidValueError);
}

TEST_CASE("distance examples") {
  CHECK(distance(DomainPoint::torus(0.95), DomainPoint::torus(0.1)) ==
        doctest::Approx(0.15).epsilon(1e-13));
  CHECK(distance(DomainPoint::torus(0.3), DomainPoint::torus(0.3)) == 0.0);
  CHECK(distance(DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(3, 4))) ==
        doctest::Approx(5.0).epsilon(1e-15));
  CHECK(distance(DomainPoint::line(-2.0), DomainPoint::line(1.5)) ==
        doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("distance rejects mixed variants") {
  CHECK_THROWS_AS(distance(DomainPoint::torus(0.1), DomainPoint::line(0.1)),
                  VariantMismatchError);
  CHECK_THROWS_AS(distance(DomainPoint::plane(cplx(1, 1)), DomainPoint::line(1.0)),
                  VariantMismatchError);
}

TEST_CASE("distance is a metric on random triples") {
  Rng rng(42);
  auto sample = [&](int variant) {
    switch (variant) {
      case 0: return DomainPoint::torus(rng.uniform());
      case 1: return DomainPoint::line(rng.uniform(-10.0, 10.0));
      default: return DomainPoint::plane(cplx(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)));
    }
  };
  for (int variant = 0; variant < 3; ++variant) {
    for (int trial = 0; trial < 10000; ++trial) {
      const DomainPoint a = sample(variant);
      const DomainPoint b = sample(variant);
      const DomainPoint c = sample(variant);
      const double dab = distance(a, b);
      const double dba = distance(b, a);
      REQUIRE(dab == dba);
      REQUIRE(dab >= 0.0);
      REQUIRE(distance(a, a) == 0.0);
      REQUIRE(dab <= distance(a, c) + distance(c, b) + 1e-12);
      if (variant == 0) REQUIRE(dab <= 0.5);
    }
  }
}

TEST_CASE("support sets reject duplicates and mixed variants") {
  CHECK_THROWS_AS(SupportSet({DomainPoint::torus(0.25), DomainPoint::torus(1.25)}),
                  InvalidValueError);
  CHECK_THROWS_AS(SupportSet({DomainPoint::line(0.7), DomainPoint::line(0.7)}),
                  InvalidValueError);
  CHECK_THROWS_AS(SupportSet({DomainPoint::torus(0.2), DomainPoint::line(0.5)}),
                  VariantMismatchError);
  const SupportSet ok({DomainPoint::torus(0.2), DomainPoint::torus(0.5)});
  CHECK(ok.size() == 2);
  CHECK(ok.kind() == DomainKind::Torus);
}

TEST_CASE("min_separation examples") {
  const SupportSet t({DomainPoint::torus(0.1), DomainPoint::torus(0.3), DomainPoint::torus(0.95)});
  CHECK(min_separation(t) == doctest::Approx(0.15).epsilon(1e-13));

  const SupportSet p({DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(4, 0)),
                      DomainPoint::plane(cplx(4, 4))});
  CHECK(min_separation(p) == doctest::Approx(4.0).epsilon(1e-15));

  CHECK_THROWS_AS(min_separation(SupportSet({DomainPoint::torus(0.5)})), SeparationError);
}

TEST_CASE("min_separation is permutation invariant") {
  Rng rng(7);
  std::vector<DomainPoint> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(DomainPoint::line(rng.uniform(-3.0, 3.0)));
  const double ref = min_separation(SupportSet(pts));
  for (int shuffle = 0; shuffle < 20; ++shuffle) {
    for (std::size_t i = pts.size(); i > 1; --i) {
      std::swap(pts[i - 1], pts[rng.next_u64() % i]);
    }
    CHECK(min_separation(SupportSet(pts)) == ref);
  }
}

TEST_CASE("in_neighborhood uses strict open balls") {
  const SupportSet T({DomainPoint::torus(0.3)});
  CHECK(in_neighborhood(DomainPoint::torus(0.31), T, 0.02));
  CHECK_FALSE(in_neighborhood(DomainPoint::torus(0.35), T, 0.02));
  CHECK(in_neighborhood(DomainPoint::torus(0.3), T, 1e-12));
  // boundary point: distance exactly delta is outside the open ball
  CHECK_FALSE(in_neighborhood(DomainPoint::line(1.0), SupportSet({DomainPoint::line(0.0)}), 1.0));
}

}  // TEST_SUITE
