#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "atomkernel/certificate.hpp"
#include "atomkernel/rng.hpp"

using namespace atomkernel;

namespace {

SupportSet random_torus_support(Rng& rng, int s, double min_sep) {
  while (true) {
    std::vector<double> y(s);
    for (int j = 0; j < s; ++j) y[j] = rng.uniform();
    std::sort(y.begin(), y.end());
    double gap = 1.0 - y[s - 1] + y[0];  // wrap gap
    for (int j = 1; j < s; ++j) gap = std::min(gap, y[j] - y[j - 1]);
    if (gap < min_sep) continue;
    std::vector<DomainPoint> pts;
    for (double v : y) pts.push_back(DomainPoint::torus(v));
    return SupportSet{pts};
  }
}

Eigen::VectorXcd random_signs(Rng& rng, int s) {
  Eigen::VectorXcd omega(s);
  for (int j = 0; j < s; ++j) omega[j] = rng.unit_phase();
  return omega;
}

}  // namespace

TEST_CASE("quartic kernel values and frequency") {
  CHECK(fejer4_freq(128) == 65);
  CHECK(fejer4_freq(64) == 33);
  CHECK(fejer4_freq(9) == 5);   // odd degree falls back to floor(m/2)+1
  CHECK(fejer4_freq(1) == 1);
  CHECK_THROWS_AS(fejer4_freq(0), InvalidValueError);

  for (int m : {9, 16, 64, 128}) {
    const double M = fejer4_freq(m);
    Fejer4 at0 = fejer4(m, 0.0);
    CHECK(at0.value == doctest::Approx(M * M * M * M).epsilon(1e-13));
    CHECK(std::abs(at0.deriv) < 1e-9 * at0.value);
    const double c2 = M_PI * M_PI * (1.0 - M * M) / 6.0;
    CHECK(at0.second == doctest::Approx(8.0 * c2 * at0.value).epsilon(1e-11));
    CHECK(at0.second < 0.0);
    // periodic up to representation error of the shifted argument
    Fejer4 shifted = fejer4(m, 3.0 + 0.1234);
    Fejer4 base = fejer4(m, 0.1234);
    const double scale = at0.value * M_PI * M;
    CHECK(std::abs(shifted.value - base.value) < 1e-12 * (std::abs(base.value) + scale));
    CHECK(std::abs(shifted.deriv - base.deriv) < 1e-12 * (std::abs(base.deriv) + scale * M_PI * M));
  }
}

TEST_CASE("quartic kernel derivatives match central differences") {
  Rng rng(11);
  for (int m : {8, 33, 128}) {
    const double M = fejer4_freq(m);
    const double k0 = fejer4(m, 0.0).value;
    const double s1 = k0 * M_PI * M;        // natural first-derivative scale
    const double s2 = s1 * M_PI * M;        // natural curvature scale
    const double h = 1e-5;
    for (int i = 0; i < 500; ++i) {
      const double x = rng.uniform() - 0.5;
      Fejer4 c = fejer4(m, x), p = fejer4(m, x + h), q = fejer4(m, x - h);
      const double fd1 = (p.value - q.value) / (2.0 * h);
      const double fd2 = (p.value - 2.0 * c.value + q.value) / (h * h);
      CHECK(std::abs(fd1 - c.deriv) / (std::abs(c.deriv) + s1) < 1e-4);
      CHECK(std::abs(fd2 - c.second) / (std::abs(c.second) + s2) < 1e-4);
    }
    // the series branch agrees with the raw quotient just inside the switch
    const double cut = std::min(1e-4, 0.05 / (M_PI * M));
    const double u = 0.9 * cut;
    const double un = std::sin(M_PI * M * u), vn = std::sin(M_PI * u);
    const double dun = M_PI * M * std::cos(M_PI * M * u);
    const double dvn = M_PI * std::cos(M_PI * u);
    const double r = un / vn;
    const double dr = (dun - r * dvn) / vn;
    const double ddr = (-M_PI * M_PI * M * M * un - 2.0 * dr * dvn + M_PI * M_PI * r * vn) / vn;
    Fejer4 f = fejer4(m, u);
    CHECK(f.value == doctest::Approx(r * r * r * r).epsilon(1e-9));
    CHECK(f.deriv == doctest::Approx(4.0 * r * r * r * dr).epsilon(1e-7));
    CHECK(f.second ==
          doctest::Approx(12.0 * r * r * dr * dr + 4.0 * r * r * r * ddr).epsilon(1e-7));
  }
}

TEST_CASE("quartic kernel Fourier coefficients") {
  Rng rng(2);
  for (int m : {9, 16, 33}) {
    Eigen::VectorXd hat = fejer4_hat(m);
    const int M = fejer4_freq(m);
    const double M4 = std::pow(double(M), 4);
    CHECK(hat.size() == 2 * m + 1);
    CHECK(hat.sum() == doctest::Approx(M4).epsilon(1e-13));
    CHECK(hat.minCoeff() >= 0.0);
    for (int k = 1; k <= m; ++k) {
      CHECK(hat[m + k] == hat[m - k]);
      if (k > 2 * (M - 1)) CHECK(hat[m + k] == 0.0);
    }
    // the coefficients really synthesize the kernel
    for (int i = 0; i < 30; ++i) {
      const double x = rng.uniform();
      cplx acc(0, 0);
      for (int k = -m; k <= m; ++k)
        acc += hat[k + m] * std::exp(cplx(0, 2.0 * M_PI * k * x));
      CHECK(std::abs(acc - fejer4(m, x).value) < 1e-10 * M4);
    }
  }
}

TEST_CASE("torus certificate: single atom") {
  const int m = 128;
  SupportSet T{{DomainPoint::torus(0.5)}};
  Eigen::VectorXcd omega(1);
  omega << cplx(1, 0);
  Certificate cert = build_torus_certificate(T, omega, m);

  CHECK(std::abs(cert.psi(DomainPoint::torus(0.5)) - cplx(1, 0)) < 1e-10);
  CHECK(std::abs(cert.psi_deriv(DomainPoint::torus(0.5))) < 1e-10);
  CHECK(cert.interp_residual < 1e-12);
  CHECK(cert.deriv_residual < 1e-12);
  CHECK_FALSE(cert.separation_warning);

  ValidationReport rep = validate(cert);
  CHECK(rep.far_bound_ok);
  CHECK(rep.near_bound_ok);
  CHECK(rep.offgrid_sup <= 1.0 - 0.009);
  CHECK(rep.sup_norm <= 1.0 + 1e-9);
}

TEST_CASE("torus certificate: errors and warnings") {
  const int m = 128;
  Eigen::VectorXcd omega2(2);
  omega2 << cplx(1, 0), cplx(0, 1);

  SupportSet tight{{DomainPoint::torus(0.2), DomainPoint::torus(0.2 + 0.01 / m)}};
  CHECK_THROWS_AS(build_torus_certificate(tight, omega2, m), SeparationError);

  SupportSet close{{DomainPoint::torus(0.2), DomainPoint::torus(0.2 + 1.2 / m)}};
  Certificate warned = build_torus_certificate(close, omega2, m);
  CHECK(warned.separation_warning);
  CHECK(warned.interp_residual < 1e-8);

  Eigen::VectorXcd bad(2);
  bad << cplx(0.5, 0), cplx(1, 0);
  SupportSet ok{{DomainPoint::torus(0.2), DomainPoint::torus(0.4)}};
  CHECK_THROWS_AS(build_torus_certificate(ok, bad, m), InvalidValueError);

  Eigen::VectorXcd omega1(1);
  omega1 << cplx(1, 0);
  CHECK_THROWS_AS(build_torus_certificate(ok, omega1, m), InvalidValueError);

  SupportSet line{{DomainPoint::line(0.2), DomainPoint::line(0.4)}};
  CHECK_THROWS_AS(build_torus_certificate(line, omega2, m), InvalidValueError);
}

TEST_CASE("torus certificate: random supports interpolate and validate") {
  const int m = 128, s = 5;
  Rng rng(20260814);
  for (int trial = 0; trial < 100; ++trial) {
    SupportSet T = random_torus_support(rng, s, 2.0 / m);
    Eigen::VectorXcd omega = random_signs(rng, s);
    Certificate cert = build_torus_certificate(T, omega, m);
    CHECK(cert.interp_residual <= 1e-8);
    CHECK(cert.deriv_residual <= 1e-8);
    CHECK(cert.condition_raw < 1e8);
    CHECK(cert.nu_norm <= cert.nu_norm_bound + 1e-9);

    if (trial % 10 == 0) {
      ValidationReport rep = validate(cert);
      CHECK(rep.near_bound_ok);
      CHECK(rep.far_bound_ok);
      CHECK(rep.sup_norm <= 1.0 + 1e-9);
      CHECK(rep.interp_residual <= 1e-8);
      CHECK(rep.deriv_residual <= 1e-8);
    }
  }
}

TEST_CASE("torus certificate: psi agrees with the adjoint of nu") {
  const int m = 33;
  Rng rng(5);
  SupportSet T = random_torus_support(rng, 3, 2.0 / m);
  Eigen::VectorXcd omega = random_signs(rng, 3);
  Certificate cert = build_torus_certificate(T, omega, m);
  AdjointFunction adj = adjoint_function(cert.op, cert.nu);
  for (int i = 0; i < 200; ++i) {
    DomainPoint x = DomainPoint::torus(rng.uniform());
    CHECK(std::abs(cert.psi(x) - adj(x)) < 1e-10);
  }
}

TEST_CASE("torus condition number decreases with separation") {
  for (int m : {64, 128}) {
    Eigen::VectorXcd omega(2);
    omega << cplx(1, 0), cplx(0, 1);
    double prev_scaled = std::numeric_limits<double>::infinity();
    double prev_raw = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
      const double delta = (0.5 + 1.5 * k / 9.0) / m;
      SupportSet T{{DomainPoint::torus(0.31), DomainPoint::torus(0.31 + delta)}};
      Certificate cert = build_torus_certificate(T, omega, m);
      CHECK(cert.condition <= prev_scaled + 1e-10);
      CHECK(cert.condition_raw <= prev_raw + 1e-10);
      prev_scaled = cert.condition;
      prev_raw = cert.condition_raw;
    }
  }
}

TEST_CASE("constant-one coefficient certificate fails the far bound") {
  const int m = 16;
  Certificate fake;
  fake.space = KernelSpace::trig_torus(m);
  fake.op = MeasurementOperator::torus_fourier(m, true);
  fake.support = {DomainPoint::torus(0.3)};
  fake.omega = Eigen::VectorXcd::Ones(1);
  fake.nu = Eigen::VectorXcd::Zero(2 * m + 1);
  fake.nu[m] = std::sqrt(double(2 * m + 1));  // psi identically one
  ValidationReport rep = validate(fake);
  CHECK_FALSE(rep.far_bound_ok);
  CHECK_FALSE(rep.near_bound_ok);
  CHECK(rep.offgrid_sup == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("validation rejects grids without 8 points per near region") {
  const int m = 128;
  Eigen::VectorXcd omega(1);
  omega << cplx(1, 0);
  SupportSet T{{DomainPoint::torus(0.5)}};
  Certificate cert = build_torus_certificate(T, omega, m);
  CHECK_THROWS_AS(validate(cert, 1.0 / 1024.0), GridTooCoarseError);

  KernelSpace space = KernelSpace::bargmann(2.0);
  SupportSet W{{DomainPoint::plane(cplx(0.1, 0.2))}};
  Certificate bc = build_bargmann_certificate(space, W, omega);
  CHECK_THROWS_AS(validate(bc, 0.2), GridTooCoarseError);
}

TEST_CASE("windowed certificate: build, bounds, and identities") {
  const int m = 32;
  const double L = 100.0, rho = 0.1;

  SupportSet single{{DomainPoint::line(0.0)}};
  Eigen::VectorXcd one(1);
  one << cplx(1, 0);
  Certificate c1 = build_pw_certificate(single, one, m, rho, L);
  CHECK(std::abs(c1.psi(DomainPoint::line(0.0)) - cplx(1, 0)) < 1e-10);
  CHECK(std::abs(c1.psi_deriv(DomainPoint::line(0.0))) < 1e-10);
  CHECK(c1.nu_norm <= c1.nu_norm_bound);

  Rng rng(3);
  std::vector<double> ys = {-0.3, 0.05, 0.31};
  std::vector<DomainPoint> pts;
  for (double y : ys) pts.push_back(DomainPoint::line(y * L));
  SupportSet T{pts};
  Eigen::VectorXcd omega = random_signs(rng, 3);
  Certificate cert = build_pw_certificate(T, omega, m, rho, L);
  CHECK(cert.interp_residual <= 1e-8);
  CHECK(cert.deriv_residual <= 1e-8);
  CHECK(cert.nu_norm <= cert.nu_norm_bound);

  ValidationReport rep = validate(cert);
  CHECK(rep.near_bound_ok);
  CHECK(rep.far_bound_ok);
  CHECK(rep.sup_norm <= 1.0 + 1e-9);
  CHECK(rep.beyond_window_sup > 0.0);  // informational wrap-around sweep ran

  // psi equals the adjoint of nu as a function on the line
  AdjointFunction adj = adjoint_function(cert.op, cert.nu);
  for (int i = 0; i < 50; ++i) {
    DomainPoint x = DomainPoint::line((rng.uniform() - 0.5) * L);
    CHECK(std::abs(cert.psi(x) - adj(x)) < 1e-9);
  }

  SupportSet outside{{DomainPoint::line(0.7 * L)}};
  CHECK_THROWS_AS(build_pw_certificate(outside, one, m, rho, L), InvalidValueError);
}

TEST_CASE("windowed certificates approach the torus certificate as rho shrinks") {
  const int m = 32;
  const double L = 100.0;
  Rng rng(3);
  std::vector<double> ys = {-0.3, 0.05, 0.31};
  std::vector<DomainPoint> tl, tt;
  for (double y : ys) {
    tl.push_back(DomainPoint::line(y * L));
    tt.push_back(DomainPoint::torus(y));
  }
  Eigen::VectorXcd omega = random_signs(rng, 3);
  Certificate tor = build_torus_certificate(SupportSet{tt}, omega, m);

  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {0.2, 0.1, 0.05, 0.025}) {
    Certificate cert = build_pw_certificate(SupportSet{tl}, omega, m, rho, L);
    const int n = 64 * m;
    double dev = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y = -0.5 + double(i) / n;
      dev = std::max(dev, std::abs(cert.psi(DomainPoint::line(y * L)) -
                                   tor.psi(DomainPoint::torus(y))));
    }
    CHECK(dev <= prev + 1e-10);
    prev = dev;
  }
}

TEST_CASE("coherence sums") {
  SupportSet W{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(4, 0))}};
  CHECK(sigma_bar(W, cplx(0, 0)) ==
        doctest::Approx(1.0 + 85.0 * std::exp(-8.0)).epsilon(1e-14));
  SupportSet single{{DomainPoint::plane(cplx(1, -2))}};
  CHECK(sigma_bar(single, cplx(1, -2)) == doctest::Approx(1.0).epsilon(1e-14));

  const double down = sigma_down(W);
  const double up = sigma_up(W, 4.5);
  CHECK(down >= 1.0);
  CHECK(up >= down);
  // the midpoint dominates here: two coherence terms at distance 2 each
  CHECK(up == doctest::Approx(2.0 * std::exp(-2.0) * 15.0).epsilon(0.02));
}

TEST_CASE("separation condition check") {
  SupportSet W{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(4, 0))}};
  SeparationCheck loose = check_separation(W, 1e-3, 4.5);
  CHECK(loose.ok);
  CHECK(loose.sup_value < 1.0);
  CHECK(loose.radius > 0.0);
  SeparationCheck strict = check_separation(W, 0.5, 4.5);
  CHECK_FALSE(strict.ok);
  CHECK_THROWS_AS(check_separation(W, 0.0, 4.5), InvalidValueError);
}

TEST_CASE("coherent certificate: single atom is exact") {
  KernelSpace space = KernelSpace::bargmann(2.0);
  SupportSet W{{DomainPoint::plane(cplx(0.3, -0.2))}};
  Eigen::VectorXcd omega(1);
  omega << cplx(0, 1);
  Certificate cert = build_bargmann_certificate(space, W, omega);

  CHECK(cert.phi_deviation == 0.0);
  CHECK(std::abs(cert.alpha[0] - cplx(0, 1)) < 1e-14);
  CHECK(std::abs(cert.beta[0]) < 1e-14);
  CHECK(cert.condition == doctest::Approx(1.0).epsilon(1e-12));

  ValidationReport rep = validate(cert);
  CHECK(rep.hessian_ok);
  CHECK(rep.hessian_margin > 0.9);  // both eigenvalues near -1 at the atom
  CHECK(rep.near_bound_ok);
  CHECK(rep.far_bound_ok);
  CHECK(rep.far_margin > 0.01);
  CHECK(rep.sup_norm <= 1.0 + 1e-9);
}

TEST_CASE("coherent certificate: two atoms at distance four") {
  KernelSpace space = KernelSpace::bargmann(4.5);
  SupportSet W{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(4, 0))}};
  Eigen::VectorXcd omega(2);
  omega << cplx(1, 0), cplx(0, 1);
  Certificate cert = build_bargmann_certificate(space, W, omega);

  CHECK(cert.sigma_down_minus_1 ==
        doctest::Approx(85.0 * std::exp(-8.0)).epsilon(1e-12));
  CHECK(cert.phi_deviation <= cert.sigma_down_minus_1);
  CHECK(cert.phi_deviation ==
        doctest::Approx(19.0 * std::exp(-8.0)).epsilon(1e-10));
  CHECK(cert.interp_residual < 1e-12);
  CHECK(cert.deriv_residual < 1e-12);

  // Neumann coefficient bounds
  const double eps = cert.phi_deviation;
  const double bound = 2.0 * eps / (1.0 - 2.0 * eps);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(cert.alpha[k] - cert.omega[k]) <= bound + 1e-12);
    CHECK(std::abs(cert.beta[k]) <= bound + 1e-12);
  }

  ValidationReport rep = validate(cert);
  CHECK(rep.hessian_ok);
  CHECK(rep.near_bound_ok);
  CHECK(rep.far_bound_ok);
  CHECK(rep.far_margin > 0.01);
  CHECK(rep.sup_norm <= 1.0 + 1e-9);

  // psi is the adjoint of the monomial coefficient vector
  AdjointFunction adj = adjoint_function(cert.op, cert.nu);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    cplx z(4.5 * (2.0 * rng.uniform() - 1.0), 4.5 * (2.0 * rng.uniform() - 1.0));
    if (std::abs(z) > 4.5) continue;
    DomainPoint p = DomainPoint::plane(z);
    CHECK(std::abs(cert.psi(p) - adj(p)) < 1e-9);
  }

  // coefficient-free copy evaluates through nu and matches
  Certificate bare = cert;
  bare.alpha.resize(0);
  bare.beta.resize(0);
  for (int i = 0; i < 20; ++i) {
    cplx z(3.0 * (2.0 * rng.uniform() - 1.0), 3.0 * (2.0 * rng.uniform() - 1.0));
    DomainPoint p = DomainPoint::plane(z);
    CHECK(std::abs(cert.psi(p) - bare.psi(p)) < 1e-9);
    CHECK(std::abs(cert.psi_deriv(p) - bare.psi_deriv(p)) < 1e-9);
  }
}

TEST_CASE("coherent certificate: identity deviation shrinks with separation") {
  KernelSpace space = KernelSpace::bargmann(6.0);
  Eigen::VectorXcd omega(2);
  omega << cplx(1, 0), cplx(-1, 0);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10; ++k) {
    const double d = 4.0 + 0.4 * k;
    SupportSet W{{DomainPoint::plane(cplx(-d / 2, 0)), DomainPoint::plane(cplx(d / 2, 0))}};
    Certificate cert = build_bargmann_certificate(space, W, omega);
    CHECK(cert.phi_deviation <= prev + 1e-10);
    prev = cert.phi_deviation;
  }
}

TEST_CASE("coherent certificate: errors") {
  KernelSpace space = KernelSpace::bargmann(3.0);
  Eigen::VectorXcd omega(2);
  omega << cplx(1, 0), cplx(1, 0);

  SupportSet crowd{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(0.5, 0))}};
  CHECK_THROWS_AS(build_bargmann_certificate(space, crowd, omega), SeparationError);

  SupportSet outside{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(5, 0))}};
  CHECK_THROWS_AS(build_bargmann_certificate(space, outside, omega), InvalidValueError);

  SupportSet torus_pts{{DomainPoint::torus(0.1), DomainPoint::torus(0.5)}};
  CHECK_THROWS_AS(build_bargmann_certificate(space, torus_pts, omega), InvalidValueError);

  KernelSpace wrong = KernelSpace::trig_torus(8);
  SupportSet W{{DomainPoint::plane(cplx(0, 0)), DomainPoint::plane(cplx(2.5, 0))}};
  CHECK_THROWS_AS(build_bargmann_certificate(wrong, W, omega), InvalidValueError);
}

TEST_CASE("certificate serialization carries the diagnostics") {
  const int m = 16;
  SupportSet T{{DomainPoint::torus(0.25), DomainPoint::torus(0.75)}};
  Eigen::VectorXcd omega(2);
  omega << cplx(1, 0), cplx(-1, 0);
  Certificate cert = build_torus_certificate(T, omega, m);
  nlohmann::json j = certificate_to_json(cert);
  CHECK(j.contains("condition"));
  CHECK(j.contains("nu"));
  CHECK(j["quartic_freq"] == fejer4_freq(m));
  CHECK(j["support"].size() == 2);

  ValidationReport rep = validate(cert);
  nlohmann::json v = validation_to_json(rep);
  CHECK(v.contains("far_margin"));
  CHECK(v["ok"] == rep.ok());
}
