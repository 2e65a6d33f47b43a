#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

namespace qdnems {

/// Hard-wall circular dot. Offsets locate the dot centre relative to the
/// plate centre (x along the length, y along the width).
struct DotGeometry {
  double radius_nm = 75.0;
  double effective_mass = 0.98;  // in units of the free-electron mass
  double offset_x_nm = 0.0;
  double offset_y_nm = 0.0;

  void validate() const;  // throws ConfigError
};

/// Perpendicular field. magnetic_length_nm is +inf at zero field.
struct MagneticConfig {
  double field_gauss = 0.0;
  double magnetic_length_nm = 0.0;
  double bohr_magneton_meV_per_T = 0.0;  // effective-mass Bohr magneton

  static MagneticConfig make(double field_gauss, double effective_mass);
  double field_tesla() const;
  /// l_B > R; always true at zero field.
  bool weak_field(const DotGeometry& dot) const;
};

struct ElectronState {
  int l = 0;
  int nu = 1;
  double alpha = 0.0;        // nu-th zero of J_|l|
  double kinetic_meV = 0.0;  // field-free part
  double energy_meV = 0.0;   // kinetic plus Zeeman
};

double kinetic_energy(int l, int nu, const DotGeometry& dot);

/// Kinetic plus Zeeman energy. Throws WeakFieldError when l_B <= R at B > 0.
double electron_energy(int l, int nu, const DotGeometry& dot, const MagneticConfig& field);

ElectronState make_state(int l, int nu, const DotGeometry& dot, const MagneticConfig& field);

/// Electron states sorted by (energy, l, nu).
class ElectronBasis {
 public:
  ElectronBasis() = default;
  explicit ElectronBasis(std::vector<ElectronState> states);

  /// All |l| <= l_max, 1 <= nu <= nu_max, optionally keeping only states whose
  /// kinetic energy is at most kinetic_cutoff_meV.
  static ElectronBasis build(const DotGeometry& dot, const MagneticConfig& field, int l_max,
                             int nu_max, std::optional<double> kinetic_cutoff_meV = std::nullopt);

  std::size_t size() const noexcept { return states_.size(); }
  const ElectronState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<ElectronState>& states() const noexcept { return states_; }
  std::optional<std::size_t> index_of(int l, int nu) const;

 private:
  std::vector<ElectronState> states_;
};

struct WeakFieldReport {
  double length_ratio = 0.0;  // l_B / R, +inf at zero field
  /// Diamagnetic energy at the dot edge (r = R) over the |l| = 1 Zeeman shift.
  double diamagnetic_to_zeeman = 0.0;
  /// Same ratio with r^2 averaged over the (0, 1) ground state.
  double diamagnetic_to_zeeman_ground_state = 0.0;
  /// Edge diamagnetic energy relative to the ground-state energy: a bound on
  /// the relative error from dropping the diamagnetic term.
  double energy_error_bound = 0.0;
  bool pass = true;
};

WeakFieldReport validate_weak_field(const DotGeometry& dot, const MagneticConfig& field);

/// Radial factor J_|l|(alpha r / R) / (sqrt(pi) R |J_|l|+1(alpha)|), nm^-1;
/// zero for r >= R.
double radial_amplitude(const ElectronState& state, const DotGeometry& dot, double r_nm);

/// Full eigenfunction in dot-centred polar coordinates, nm^-1.
std::complex<double> wavefunction_value(const ElectronState& state, const DotGeometry& dot,
                                        double r_nm, double theta);

}  // namespace qdnems
