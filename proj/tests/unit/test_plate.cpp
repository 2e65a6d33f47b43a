#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "qdnems/errors.hpp"
#include "qdnems/plate.hpp"
#include "qdnems/units.hpp"

using namespace qdnems;
namespace oracle = testing_oracle;

namespace {

const ModeTable& default_table() {
  static const ModeTable table = solve_modes(PlateSpec{}, RitzSize{}, 20);
  return table;
}

double fundamental(const PlateSpec& plate, RitzSize size = {6, 12}) {
  return solve_ritz(RitzBasis(plate, size.nx, size.ny)).front().frequency_GHz;
}

}  // namespace

TEST_SUITE("plate") {
  TEST_CASE("closed-form Q estimates") {
    const auto q = q_estimates(PlateSpec{});
    CHECK(q.q_pj == doctest::Approx(3.2 * std::pow(200.0, 5) / (1200.0 * std::pow(50.0, 4))));
    CHECK(q.q_pj == doctest::Approx(136.5).epsilon(1e-3));
    CHECK(q.q_ji == doctest::Approx(138.9).epsilon(1e-3));
  }

  TEST_CASE("mode lifetime") {
    CHECK(mode_lifetime_ns(1.5, 100.0) == doctest::Approx(10.61).epsilon(1e-3));
    CHECK(std::isinf(mode_lifetime_ns(1.5, std::numeric_limits<double>::infinity())));
    CHECK_THROWS_AS(mode_lifetime_ns(1.5, 0.0), ConfigError);
  }

  TEST_CASE("fundamental sits near the clamped beam value") {
    const auto& table = default_table();
    const double f1 = table.modes.front().frequency_GHz;
    CHECK(f1 == doctest::Approx(1.79).epsilon(0.005));
    CHECK(std::abs(f1 / 1.88 - 1.0) < 0.10);
    // Cylindrical bending of a wide plate: within a few percent of the strip.
    const PlateSpec p;
    const double beam = oracle::cantilever_fundamental_GHz(p.length_nm, p.thickness_nm,
                                                           p.material.density_kg_m3,
                                                           p.material.youngs_modulus_GPa,
                                                           p.material.poisson_ratio);
    CHECK(std::abs(f1 / beam - 1.0) < 0.05);
  }

  TEST_CASE("Ritz convergence under doubling") {
    ConvergenceReport report;
    solve_modes(PlateSpec{}, RitzSize{}, 20, 100.0, &report);
    CHECK(report.max_relative_shift < 0.01);
    CHECK(report.refined.nx == 2 * RitzSize{}.nx);
    CHECK_THROWS_AS(solve_modes(PlateSpec{}, RitzSize{6, 16}, 40), NumericalError);
  }

  TEST_CASE("frequencies are sorted, positive and carry their quanta") {
    const auto& table = default_table();
    for (std::size_t a = 0; a < table.size(); ++a) {
      const auto& m = table.modes[a];
      CHECK(m.index == static_cast<int>(a) + 1);
      CHECK(m.frequency_GHz > 0.0);
      CHECK(m.quantum_meV == doctest::Approx(units::quantum_from_GHz(m.frequency_GHz)));
      CHECK(m.gamma_meV == 0.0);
      if (a > 0) CHECK(m.frequency_GHz >= table.modes[a - 1].frequency_GHz);
    }
    CHECK(table.modes[0].parity == Parity::even);
    CHECK(table.modes[1].parity == Parity::odd);
  }

  TEST_CASE("variational: frequencies never rise as the basis grows") {
    const PlateSpec plate;
    const auto small = solve_ritz(RitzBasis(plate, 4, 8));
    const auto medium = solve_ritz(RitzBasis(plate, 6, 12));
    const auto large = solve_ritz(RitzBasis(plate, 8, 16));
    for (std::size_t a = 0; a < 10; ++a) {
      CHECK(medium[a].frequency_GHz <= small[a].frequency_GHz * (1.0 + 1e-12));
      CHECK(large[a].frequency_GHz <= medium[a].frequency_GHz * (1.0 + 1e-12));
    }
  }

  TEST_CASE("mass orthonormality and exact parity") {
    const auto& table = default_table();
    const auto& basis = *table.basis;
    for (std::size_t a = 0; a < table.size(); ++a) {
      for (std::size_t b = a; b < table.size(); ++b) {
        const double ip = mass_inner_product(table, table.modes[a], table.modes[b]);
        CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
      const auto& m = table.modes[a];
      for (int i = 0; i < basis.nx(); ++i)
        for (int j = 0; j < basis.ny(); ++j)
          if (basis.width_parity(j) != m.parity)
            CHECK(m.coefficients[static_cast<std::size_t>(i * basis.ny() + j)] == 0.0);
    }
  }

  TEST_CASE("shapes: unit mean square, clamped edge, parity in y") {
    const auto& table = default_table();
    const PlateSpec& p = table.plate;
    for (std::size_t a = 0; a < 4; ++a) {
      const auto& m = table.modes[a];
      const double mean_sq = oracle::simpson([&](double x) {
        return oracle::simpson([&](double y) {
          const double w = mode_shape_eval(table, m, x, y);
          return w * w;
        }, -0.5 * p.width_nm, 0.5 * p.width_nm, 240);
      }, 0.0, p.length_nm, 80) / (p.width_nm * p.length_nm);
      CHECK(mean_sq == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(std::abs(mode_shape_eval(table, m, 0.0, 123.0)) < 1e-12);
      const double sign = m.parity == Parity::even ? 1.0 : -1.0;
      CHECK(mode_shape_eval(table, m, 150.0, -210.0) ==
            doctest::Approx(sign * mode_shape_eval(table, m, 150.0, 210.0)).epsilon(1e-12));
    }
  }

  TEST_CASE("laplacian matches finite differences of the shape") {
    const auto& table = default_table();
    const auto& m = table.modes[2];
    const double x = 120.0, y = 80.0, h = 0.5;
    const double fd = (mode_shape_eval(table, m, x + h, y) + mode_shape_eval(table, m, x - h, y) +
                       mode_shape_eval(table, m, x, y + h) + mode_shape_eval(table, m, x, y - h) -
                       4.0 * mode_shape_eval(table, m, x, y)) /
                      (h * h);
    CHECK(mode_laplacian(table, m, x, y) == doctest::Approx(fd).epsilon(1e-4));
    const auto grid = mode_laplacians(table, {x, 40.0}, {y, -10.0});
    CHECK(grid(2, 0) == doctest::Approx(mode_laplacian(table, m, x, y)).epsilon(1e-13));
  }

  TEST_CASE("frequency scaling with thickness and length") {
    const PlateSpec base;
    const double f0 = fundamental(base);
    PlateSpec thick = base;
    thick.thickness_nm *= 1.5;
    CHECK(fundamental(thick) == doctest::Approx(1.5 * f0).epsilon(0.01));
    PlateSpec scaled = base;
    scaled.length_nm *= 1.3;
    scaled.width_nm *= 1.3;
    CHECK(fundamental(scaled) == doctest::Approx(f0 / (1.3 * 1.3)).epsilon(0.01));
  }

  TEST_CASE("quality factor sets every gamma") {
    ModeTable table = default_table();
    table.set_quality_factor(100.0);
    for (const auto& m : table.modes) CHECK(m.gamma_meV == doctest::Approx(m.quantum_meV / 100.0));
    CHECK_THROWS_AS(table.set_quality_factor(-1.0), ConfigError);
  }

  TEST_CASE("retuning keeps the table sorted and renumbered") {
    ModeTable table = default_table();
    const double target = 0.5 * table.modes[0].quantum_meV;
    retune_mode(table, 5, target);
    CHECK(table.modes[0].quantum_meV == target);
    for (std::size_t a = 0; a < table.size(); ++a) CHECK(table.modes[a].index == static_cast<int>(a) + 1);
    CHECK_THROWS_AS(retune_mode(table, 99, 1.0), ConfigError);
  }

  TEST_CASE("mode table round trip is exact") {
    ModeTable table = default_table();
    table.set_quality_factor(100.0);
    std::stringstream buffer;
    write_mode_table(buffer, table);
    const ModeTable back = read_mode_table(buffer);
    REQUIRE(back.size() == table.size());
    CHECK(back.quality_factor == 100.0);
    for (std::size_t a = 0; a < table.size(); ++a) {
      CHECK(back.modes[a].frequency_GHz == table.modes[a].frequency_GHz);
      CHECK(back.modes[a].parity == table.modes[a].parity);
      CHECK(back.modes[a].coefficients == table.modes[a].coefficients);
      CHECK(mode_shape_eval(back, back.modes[a], 77.0, 33.0) ==
            mode_shape_eval(table, table.modes[a], 77.0, 33.0));
    }
  }

  TEST_CASE("invalid plates are rejected") {
    PlateSpec p;
    p.thickness_nm = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = PlateSpec{};
    p.material.poisson_ratio = 0.6;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }
}
