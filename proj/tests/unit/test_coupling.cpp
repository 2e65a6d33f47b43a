#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "qdnems/coupling.hpp"
#include "qdnems/errors.hpp"
#include "qdnems/units.hpp"

using namespace qdnems;
namespace oracle = testing_oracle;

namespace {

struct Fixture {
  DotGeometry dot;
  MagneticConfig field = MagneticConfig::make(0.0, 0.98);
  ModeTable modes = solve_modes(PlateSpec{}, RitzSize{}, 8);
  ElectronBasis electrons = ElectronBasis::build(dot, field, 3, 2);
  CouplingConfig config;
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Brute-force polar Simpson integral of conj(psi_out) lap(w) psi_in with the
// mass-normalized zero-point amplitude, meV.
std::complex<double> brute_force_element(const ElectronState& out, const PhononMode& mode,
                                         const ElectronState& in, const DotGeometry& dot,
                                         const ModeTable& table, const CouplingConfig& config) {
  const PlateSpec& p = table.plate;
  const double omega = mode.quantum_meV / units::hbar * 1e9;
  const double volume = p.width_nm * p.length_nm * p.thickness_nm * 1e-27;
  const double x_zp_nm =
      std::sqrt(1.054571817e-34 / (2.0 * p.material.density_kg_m3 * volume * omega)) * 1e9;
  const double xc = 0.5 * p.length_nm + dot.offset_x_nm;
  const double yc = dot.offset_y_nm;
  auto integrand = [&](double r, double th, bool imag) {
    const auto v = std::conj(wavefunction_value(out, dot, r, th)) *
                   mode_laplacian(table, mode, xc + r * std::cos(th), yc + r * std::sin(th)) *
                   wavefunction_value(in, dot, r, th) * r;
    return imag ? v.imag() : v.real();
  };
  auto integrate = [&](bool imag) {
    return oracle::simpson([&](double r) {
      return oracle::simpson([&](double th) { return integrand(r, th, imag); }, -units::pi,
                             units::pi, 256);
    }, 0.0, dot.radius_nm, 256);
  };
  const double pref = config.deformation_potential_eV * 1e3 * x_zp_nm *
                      (-config.layer_offset(p)) * config.overall_scale;
  return pref * std::complex<double>(integrate(false), integrate(true));
}

}  // namespace

TEST_SUITE("coupling") {
  TEST_CASE("elements agree with a brute-force polar integral") {
    const auto& f = fixture();
    const auto s_plus = make_state(1, 1, f.dot, f.field);
    const auto s_minus = make_state(-1, 1, f.dot, f.field);
    const auto s_zero = make_state(0, 1, f.dot, f.field);
    for (std::size_t a : {0u, 1u, 4u}) {
      const auto& mode = f.modes.modes[a];
      for (const auto& [out, in] : {std::pair{s_plus, s_minus}, std::pair{s_zero, s_plus},
                                    std::pair{s_plus, s_plus}}) {
        const auto fast = dp_overlap(out, mode, in, f.dot, f.modes, f.config);
        const auto slow = brute_force_element(out, mode, in, f.dot, f.modes, f.config);
        CHECK(std::abs(fast - slow) <= 1e-6 * std::max(std::abs(slow), 1e-12));
      }
    }
  }

  TEST_CASE("tensor is Hermitian and obeys the parity-reality rule for a centred dot") {
    const auto& f = fixture();
    CouplingDiagnostics d;
    auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config, &d);
    calibrate_scale(tensor, 5e-5);
    std::vector<Parity> parities;
    for (const auto& m : f.modes.modes) parities.push_back(m.parity);
    d = diagnose(tensor, true, parities);
    CHECK(d.hermiticity_defect_meV <= 1e-12);
    REQUIRE(d.parity_violation_meV.has_value());
    CHECK(*d.parity_violation_meV <= 1e-12);
    // Symmetrization only removes quadrature noise.
    CHECK(d.raw_asymmetry_meV <= 1e-10 * d.max_abs_meV);
    for (std::size_t a = 0; a < tensor.mode_count(); ++a) {
      for (std::size_t i = 0; i < tensor.electron_count(); ++i) {
        const auto g = tensor(i, a, i);
        CHECK(g.imag() == 0.0);
      }
    }
  }

  TEST_CASE("fixed-mode blocks split into disjoint symmetric real and imaginary parts") {
    const auto& f = fixture();
    const auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config);
    for (std::size_t a = 0; a < tensor.mode_count(); ++a) {
      const auto v = block_views(tensor, a);
      CHECK((v.real_part - v.real_part.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * tensor.max_abs());
      CHECK((v.imag_part - v.imag_part.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * tensor.max_abs());
      CHECK(v.real_part.cwiseProduct(v.imag_part).cwiseAbs().maxCoeff() <= 1e-20);
      // Reassemble g = A + i^sign(l'-l) B.
      for (std::size_t i = 0; i < tensor.electron_count(); ++i) {
        for (std::size_t j = 0; j < tensor.electron_count(); ++j) {
          const int diff = tensor.electrons()[i].l - tensor.electrons()[j].l;
          const std::complex<double> unit = diff > 0 ? std::complex<double>(0, 1)
                                            : diff < 0 ? std::complex<double>(0, -1)
                                                       : std::complex<double>(0, 0);
          const auto rebuilt = v.real_part(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                               unit * v.imag_part(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          CHECK(std::abs(rebuilt - tensor(i, a, j)) <= 1e-15 * tensor.max_abs() + 1e-30);
        }
      }
    }
  }

  TEST_CASE("off-centre dot stays Hermitian") {
    const auto& f = fixture();
    DotGeometry dot = f.dot;
    dot.offset_x_nm = 10.0;
    dot.offset_y_nm = 37.0;
    const auto electrons = ElectronBasis::build(dot, f.field, 2, 1);
    CouplingDiagnostics d;
    const auto tensor = build_coupling_tensor(electrons, f.modes, dot, f.config, &d);
    CHECK(d.hermiticity_defect_meV <= 1e-12);
    CHECK_FALSE(d.parity_violation_meV.has_value());
  }

  TEST_CASE("couplings scale as one over root frequency") {
    const auto& f = fixture();
    const auto s_plus = make_state(1, 1, f.dot, f.field);
    const auto s_minus = make_state(-1, 1, f.dot, f.field);
    PhononMode synthetic = f.modes.modes[0];
    synthetic.quantum_meV *= 2.0;
    synthetic.frequency_GHz *= 2.0;
    const auto base = dp_overlap(s_plus, f.modes.modes[0], s_minus, f.dot, f.modes, f.config);
    const auto doubled = dp_overlap(s_plus, synthetic, s_minus, f.dot, f.modes, f.config);
    CHECK(std::abs(doubled / base - 1.0 / std::sqrt(2.0)) < 1e-12);
  }

  TEST_CASE("diagonal elements match for +l and -l; odd modes leave them zero") {
    const auto& f = fixture();
    const auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config);
    const auto p = *tensor.electron_index(1, 1);
    const auto m = *tensor.electron_index(-1, 1);
    for (std::size_t a = 0; a < tensor.mode_count(); ++a) {
      CHECK(std::abs(tensor(p, a, p) - tensor(m, a, m)) <= 1e-12 * tensor.max_abs());
      if (f.modes.modes[a].parity == Parity::odd) CHECK(std::abs(tensor(p, a, p)) <= 1e-12 * tensor.max_abs());
    }
  }

  TEST_CASE("calibration hits the target exactly and is idempotent") {
    const auto& f = fixture();
    auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config);
    const double s1 = calibrate_scale(tensor, 5e-5);
    CHECK(two_level_effective_coupling(tensor) == doctest::Approx(5e-5).epsilon(1e-12));
    const double s2 = calibrate_scale(tensor, 5e-5);
    CHECK(s1 == s2);
    const double raw_max = tensor.max_abs() / tensor.scale();
    calibrate_scale(tensor, 2e-5, CalibrationMode::direct);
    const auto p = *tensor.electron_index(1, 1);
    const auto m = *tensor.electron_index(-1, 1);
    double direct = 0.0;
    for (std::size_t a = 0; a < tensor.mode_count(); ++a) direct = std::max(direct, std::abs(tensor(p, a, m)));
    CHECK(direct == doctest::Approx(2e-5).epsilon(1e-12));
    CHECK(tensor.max_abs() == doctest::Approx(raw_max * tensor.scale()).epsilon(1e-12));
    CHECK_THROWS_AS(calibrate_scale(tensor, -1.0), ConfigError);
  }

  TEST_CASE("plausibility window flag follows the largest element") {
    const auto& f = fixture();
    auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config);
    std::vector<Parity> parities;
    for (const auto& m : f.modes.modes) parities.push_back(m.parity);
    tensor.set_scale(1e-5 / (tensor.max_abs() / tensor.scale()));
    CHECK(diagnose(tensor, true, parities).plausible);
    tensor.set_scale(1e-3 / (tensor.max_abs() / tensor.scale()));
    CHECK_FALSE(diagnose(tensor, true, parities).plausible);
  }

  TEST_CASE("invalid configuration") {
    const auto& f = fixture();
    CouplingConfig c;
    c.layer_offset_nm = 40.0;
    CHECK_THROWS_AS(build_coupling_tensor(f.electrons, f.modes, f.dot, c), ConfigError);
    DotGeometry big = f.dot;
    big.radius_nm = 120.0;
    CHECK_THROWS_AS(build_coupling_tensor(f.electrons, f.modes, big, f.config), ConfigError);
  }

  TEST_CASE("coupling table round trip") {
    const auto& f = fixture();
    auto tensor = build_coupling_tensor(f.electrons, f.modes, f.dot, f.config);
    calibrate_scale(tensor, 5e-5);
    std::stringstream buffer;
    write_coupling_table(buffer, tensor);
    const auto back = read_coupling_table(buffer);
    REQUIRE(back.electron_count() == tensor.electron_count());
    REQUIRE(back.mode_count() == tensor.mode_count());
    CHECK(back.scale() == tensor.scale());
    for (std::size_t i = 0; i < tensor.electron_count(); ++i)
      for (std::size_t a = 0; a < tensor.mode_count(); ++a)
        for (std::size_t j = 0; j < tensor.electron_count(); ++j) CHECK(back(i, a, j) == tensor(i, a, j));
  }
}
