#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "qdnems/electron.hpp"
#include "qdnems/errors.hpp"
#include "qdnems/special.hpp"
#include "qdnems/units.hpp"

using namespace qdnems;
namespace oracle = testing_oracle;

TEST_SUITE("electron") {
  TEST_CASE("bessel sequence agrees with the power series") {
    for (const double x : {0.05, 0.7, 2.404825557695773, 5.0, 11.3, 17.9}) {
      const auto seq = special::bessel_j_sequence(x, 30);
      for (int n = 0; n <= 30; ++n) {
        CHECK(seq[static_cast<std::size_t>(n)] == doctest::Approx(oracle::bessel_series(n, x)).epsilon(1e-10));
        CHECK(std::abs(seq[static_cast<std::size_t>(n)] - oracle::bessel_series(n, x)) < 1e-12);
      }
    }
  }

  TEST_CASE("orders far above the argument underflow cleanly") {
    const auto seq = special::bessel_j_sequence(1.0, 200);
    CHECK(seq[200] >= 0.0);
    CHECK(seq[200] < 1e-300);
    CHECK(std::isfinite(seq[60]));
  }

  TEST_CASE("bessel zeros match series bisection") {
    // Frozen from the oracle: J_0 and J_1 first zeros.
    CHECK(special::bessel_zero(0, 1) == doctest::Approx(2.404826).epsilon(1e-6));
    CHECK(special::bessel_zero(1, 1) == doctest::Approx(3.831706).epsilon(1e-6));
    for (int n = 0; n <= 8; ++n) {
      for (int k = 1; k <= 4; ++k) {
        const double root = special::bessel_zero(n, k);
        CHECK(root == doctest::Approx(oracle::bessel_zero_series(n, k)).epsilon(1e-12));
        CHECK(std::abs(oracle::bessel_series(n, root)) < 1e-11);
      }
    }
  }

  TEST_CASE("zeros increase with index and interlace across orders") {
    for (int n = 0; n < 50; ++n) {
      for (int k = 1; k < 50; ++k) {
        CHECK(special::bessel_zero(n, k + 1) > special::bessel_zero(n, k));
        CHECK(special::bessel_zero(n, k) < special::bessel_zero(n + 1, k));
        CHECK(special::bessel_zero(n + 1, k) < special::bessel_zero(n, k + 1));
      }
    }
  }

  TEST_CASE("zero table rejects out-of-range requests") {
    CHECK_THROWS_AS(special::bessel_zero(51, 1), std::domain_error);
    CHECK_THROWS_AS(special::bessel_zero(0, 0), std::domain_error);
    CHECK_THROWS_AS(special::bessel_zero(0, 51), std::domain_error);
    CHECK_THROWS_AS(special::bessel_zero(-1, 1), std::domain_error);
  }

  TEST_CASE("zero field gives exact +-l degeneracy") {
    const DotGeometry dot;
    const auto field = MagneticConfig::make(0.0, dot.effective_mass);
    for (int l = 1; l <= 10; ++l)
      for (int nu = 1; nu <= 3; ++nu) CHECK(electron_energy(l, nu, dot, field) == electron_energy(-l, nu, dot, field));
    const auto basis = ElectronBasis::build(dot, field, 6, 3);
    for (const auto& s : basis.states()) CHECK(s.energy_meV >= basis.states().front().energy_meV);
    CHECK(basis[0].l == 0);
    CHECK(basis[0].nu == 1);
  }

  TEST_CASE("Zeeman shift is linear in field and in l") {
    const DotGeometry dot;
    const auto zero = MagneticConfig::make(0.0, dot.effective_mass);
    const auto b1 = MagneticConfig::make(200.0, dot.effective_mass);
    const auto b2 = MagneticConfig::make(400.0, dot.effective_mass);
    for (int l = -3; l <= 3; ++l) {
      const double s1 = electron_energy(l, 1, dot, b1) - electron_energy(l, 1, dot, zero);
      const double s2 = electron_energy(l, 1, dot, b2) - electron_energy(l, 1, dot, zero);
      CHECK(s2 == doctest::Approx(2.0 * s1).epsilon(1e-12));
      CHECK(s1 == doctest::Approx(l * b1.bohr_magneton_meV_per_T * b1.field_tesla()).epsilon(1e-12));
    }
  }

  TEST_CASE("splitting at 500 G reproduces the calibration anchor") {
    const DotGeometry dot;
    const auto field = MagneticConfig::make(500.0, dot.effective_mass);
    const double split = electron_energy(1, 1, dot, field) - electron_energy(-1, 1, dot, field);
    // 6e-3 meV anchor; m_e = 0.98 gives 5.9065e-3.
    CHECK(split == doctest::Approx(6e-3).epsilon(0.05));
    CHECK(split == doctest::Approx(5.9065e-3).epsilon(1e-4));
  }

  TEST_CASE("kinetic term follows 1/R^2") {
    DotGeometry dot;
    const double e1 = kinetic_energy(1, 1, dot);
    dot.radius_nm *= 2.0;
    CHECK(kinetic_energy(1, 1, dot) == doctest::Approx(e1 / 4.0).epsilon(1e-14));
  }

  TEST_CASE("weak-field report") {
    const DotGeometry dot;
    const auto report = validate_weak_field(dot, MagneticConfig::make(500.0, dot.effective_mass));
    // l_B = 25.66 / sqrt(0.05 T) nm.
    CHECK(report.length_ratio == doctest::Approx(25.65569 / std::sqrt(0.05) / 75.0).epsilon(1e-6));
    CHECK(report.length_ratio == doctest::Approx(1.53).epsilon(0.01));
    CHECK(report.diamagnetic_to_zeeman == doctest::Approx(0.1).epsilon(0.2));
    CHECK(report.diamagnetic_to_zeeman_ground_state < report.diamagnetic_to_zeeman);
    CHECK(report.pass);

    const auto tiny = validate_weak_field(dot, MagneticConfig::make(1e-3, dot.effective_mass));
    CHECK(tiny.diamagnetic_to_zeeman < 1e-6);
    CHECK(tiny.pass);

    const auto strong = MagneticConfig::make(2e4, dot.effective_mass);
    CHECK_FALSE(validate_weak_field(dot, strong).pass);
    try {
      electron_energy(1, 1, dot, strong);
      FAIL("expected WeakFieldError");
    } catch (const WeakFieldError& e) {
      CHECK(e.length_ratio() < 1.0);
    }
  }

  TEST_CASE("wavefunctions vanish at the wall, flip under theta + pi, and are orthonormal") {
    const DotGeometry dot;
    const auto field = MagneticConfig::make(0.0, dot.effective_mass);
    const auto s01 = make_state(0, 1, dot, field);
    const auto s11 = make_state(1, 1, dot, field);
    const auto s02 = make_state(0, 2, dot, field);
    for (const auto& s : {s01, s11, s02}) {
      CHECK(std::abs(wavefunction_value(s, dot, dot.radius_nm, 0.3)) < 1e-14);
      CHECK(std::abs(wavefunction_value(s, dot, 1.5 * dot.radius_nm, 0.3)) == 0.0);
    }
    const auto a = wavefunction_value(s11, dot, 30.0, 0.4);
    const auto b = wavefunction_value(s11, dot, 30.0, 0.4 + units::pi);
    CHECK(std::abs(a + b) < 1e-15);

    // Radial Simpson integrals; the angular factor integrates to 2 pi or 0.
    auto radial_overlap = [&](const ElectronState& x, const ElectronState& y) {
      return 2.0 * units::pi * oracle::simpson([&](double r) {
        return radial_amplitude(x, dot, r) * radial_amplitude(y, dot, r) * r;
      }, 0.0, dot.radius_nm, 4000);
    };
    CHECK(radial_overlap(s01, s01) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(radial_overlap(s11, s11) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(radial_overlap(s01, s02)) < 1e-8);

    // Full 2D check for the (0,1) norm, including the angular factor.
    const double norm2d = oracle::simpson([&](double r) {
      return r * oracle::simpson([&](double th) { return std::norm(wavefunction_value(s11, dot, r, th)); },
                                 0.0, 2.0 * units::pi, 64);
    }, 0.0, dot.radius_nm, 2000);
    CHECK(norm2d == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("duplicate states are rejected") {
    const DotGeometry dot;
    const auto field = MagneticConfig::make(0.0, dot.effective_mass);
    const auto s = make_state(1, 1, dot, field);
    CHECK_THROWS(ElectronBasis({s, s}));
  }
}
