#include "qdnems/electron.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "qdnems/errors.hpp"
#include "qdnems/quadrature.hpp"
#include "qdnems/special.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

void DotGeometry::validate() const {
  if (!(radius_nm > 0.0)) throw ConfigError("dot radius must be positive");
  if (!(effective_mass > 0.0)) throw ConfigError("effective mass must be positive");
}

MagneticConfig MagneticConfig::make(double field_gauss, double effective_mass) {
  if (field_gauss < 0.0) throw ConfigError("magnetic field must be non-negative");
  if (!(effective_mass > 0.0)) throw ConfigError("effective mass must be positive");
  MagneticConfig cfg;
  cfg.field_gauss = field_gauss;
  const double tesla = units::tesla_from_gauss(field_gauss);
  cfg.magnetic_length_nm = tesla > 0.0 ? units::magnetic_length_unit / std::sqrt(tesla)
                                       : std::numeric_limits<double>::infinity();
  cfg.bohr_magneton_meV_per_T = units::bohr_magneton_free / effective_mass;
  return cfg;
}

double MagneticConfig::field_tesla() const { return units::tesla_from_gauss(field_gauss); }

bool MagneticConfig::weak_field(const DotGeometry& dot) const {
  return magnetic_length_nm > dot.radius_nm;
}

double kinetic_energy(int l, int nu, const DotGeometry& dot) {
  const double alpha = special::bessel_zero(std::abs(l), nu);
  return units::hbar2_over_2m0 / dot.effective_mass * alpha * alpha /
         (dot.radius_nm * dot.radius_nm);
}

double electron_energy(int l, int nu, const DotGeometry& dot, const MagneticConfig& field) {
  if (field.field_gauss > 0.0 && !field.weak_field(dot)) {
    const double ratio = field.magnetic_length_nm / dot.radius_nm;
    std::ostringstream msg;
    msg << "weak-field approximation violated: l_B/R = " << ratio << " <= 1";
    throw WeakFieldError(msg.str(), ratio);
  }
  return kinetic_energy(l, nu, dot) + field.bohr_magneton_meV_per_T * l * field.field_tesla();
}

ElectronState make_state(int l, int nu, const DotGeometry& dot, const MagneticConfig& field) {
  ElectronState s;
  s.l = l;
  s.nu = nu;
  s.alpha = special::bessel_zero(std::abs(l), nu);
  s.kinetic_meV = kinetic_energy(l, nu, dot);
  s.energy_meV = electron_energy(l, nu, dot, field);
  return s;
}

ElectronBasis::ElectronBasis(std::vector<ElectronState> states) : states_(std::move(states)) {
  std::sort(states_.begin(), states_.end(), [](const ElectronState& a, const ElectronState& b) {
    return std::tie(a.energy_meV, a.l, a.nu) < std::tie(b.energy_meV, b.l, b.nu);
  });
  for (std::size_t i = 1; i < states_.size(); ++i) {
    if (states_[i].l == states_[i - 1].l && states_[i].nu == states_[i - 1].nu) {
      throw ConfigError("duplicate electron state in basis");
    }
  }
}

ElectronBasis ElectronBasis::build(const DotGeometry& dot, const MagneticConfig& field, int l_max,
                                   int nu_max, std::optional<double> kinetic_cutoff_meV) {
  if (l_max < 0 || l_max > special::max_root_order) {
    throw ConfigError("l_max must be in [0, 50]");
  }
  if (nu_max < 1 || nu_max > special::max_root_index) {
    throw ConfigError("nu_max must be in [1, 50]");
  }
  dot.validate();
  std::vector<ElectronState> states;
  for (int l = -l_max; l <= l_max; ++l) {
    for (int nu = 1; nu <= nu_max; ++nu) {
      if (kinetic_cutoff_meV && kinetic_energy(l, nu, dot) > *kinetic_cutoff_meV) continue;
      states.push_back(make_state(l, nu, dot, field));
    }
  }
  if (states.empty()) throw ConfigError("electron basis is empty under the kinetic cutoff");
  return ElectronBasis(std::move(states));
}

std::optional<std::size_t> ElectronBasis::index_of(int l, int nu) const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].l == l && states_[i].nu == nu) return i;
  }
  return std::nullopt;
}

double radial_amplitude(const ElectronState& state, const DotGeometry& dot, double r_nm) {
  if (r_nm >= dot.radius_nm) return 0.0;
  const int order = std::abs(state.l);
  const auto seq = special::bessel_j_sequence(state.alpha, order + 1);
  const double norm = std::sqrt(units::pi) * dot.radius_nm * std::abs(seq.back());
  return special::bessel_j(order, state.alpha * r_nm / dot.radius_nm) / norm;
}

std::complex<double> wavefunction_value(const ElectronState& state, const DotGeometry& dot,
                                        double r_nm, double theta) {
  return radial_amplitude(state, dot, r_nm) * std::polar(1.0, state.l * theta);
}

WeakFieldReport validate_weak_field(const DotGeometry& dot, const MagneticConfig& field) {
  WeakFieldReport report;
  report.length_ratio = field.magnetic_length_nm / dot.radius_nm;
  report.pass = field.weak_field(dot);
  if (field.field_gauss <= 0.0) return report;

  // E_diam / E_Zeeman = r^2 / (4 l_B^2), independent of the effective mass.
  const double lb2 = field.magnetic_length_nm * field.magnetic_length_nm;
  const double R = dot.radius_nm;
  report.diamagnetic_to_zeeman = R * R / (4.0 * lb2);

  const ElectronState ground = make_state(0, 1, dot, MagneticConfig::make(0.0, dot.effective_mass));
  const auto rule = quadrature::gauss_legendre(64, 0.0, R);
  double r2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double r = rule.nodes[i];
    const double a = radial_amplitude(ground, dot, r);
    r2 += rule.weights[i] * 2.0 * units::pi * r * r * r * a * a;
  }
  report.diamagnetic_to_zeeman_ground_state = r2 / (4.0 * lb2);

  const double zeeman = field.bohr_magneton_meV_per_T * field.field_tesla();
  report.energy_error_bound = report.diamagnetic_to_zeeman * zeeman / ground.kinetic_meV;
  return report;
}

}  // namespace qdnems
